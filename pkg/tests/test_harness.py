import os
from pathlib import Path

import numpy as np
import pytest

from nskw.errors import ConfigError
from nskw.harness import (ExperimentSpec, format_config, parse_config, parse_text,
                          run_energy_budget, run_vanish, run_weak_strong)
from nskw.harness.cli import main
from nskw.harness.experiments import worker_count

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_COMPARE = """\
d = 1
n = 16
refine = 2
kappa = 0.01
mu = 0.05
dt = 1e-3
t_end = 0.02
output_every = 5
profile = sine
rho_amp = 0.3
u_amp = 0.2
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


# -- config parsing ---------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.cfg")))
def test_shipped_configs_parse(name):
    assert isinstance(parse_config(CONFIGS / name), ExperimentSpec)


def test_defaults_when_empty():
    spec = parse_text("# nothing\n\n")
    assert spec.kind == "run" and spec.config.n == 64 and spec.deltas == (1e-2, 5e-3, 2.5e-3)


@pytest.mark.parametrize("text,line,match", [
    ("n = 32\nbogus = 1\n", 2, "unknown key"),
    ("n = 32\nn = 64\n", 2, "duplicate"),
    ("kappa = abc\n", 1, "invalid value"),
    ("\n\njust words\n", 3, "key = value"),
    ("dealias = maybe\n", 1, "invalid value"),
])
def test_parse_errors_carry_line_numbers(text, line, match):
    with pytest.raises(ConfigError, match=match) as info:
        parse_text(text)
    assert info.value.line == line and str(info.value).startswith(f"line {line}:")


@pytest.mark.parametrize("text", [
    "nu = 0.1\nq = 3\n",
    "gamma = 1.0\n",
    "stress = power_law\np = 0.5\n",
    "experiment = fly\n",
    "refine = 3\n",
    "eps_list = 1e-3, 1e-2\n",
])
def test_semantic_errors(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_seed_propagates_to_initial_condition():
    assert parse_text("seed = 9\n").config.ic.seed == 9


@pytest.mark.parametrize("name", ["weak_strong.cfg", "quick_2d.cfg", "regularized.cfg"])
def test_format_round_trip(name):
    spec = parse_config(CONFIGS / name)
    text = format_config(spec)
    assert parse_text(text) == spec
    assert format_config(parse_text(text)) == text


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("NSKW_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("NSKW_THREADS", "junk")
    assert worker_count() == 1


# -- experiments ------------------------------------------------------------------------

def test_energy_budget_report():
    rep = run_energy_budget(parse_text(SMALL_COMPARE).config)
    assert rep.trajectory.completed and rep.mass_drift < 1e-12
    assert rep.residual[0] == 0.0


def test_weak_strong_small():
    rep = run_weak_strong(parse_text(SMALL_COMPARE + "deltas = 1e-2, 5e-3\n"))
    assert rep.baseline.max_rel_entropy < 1e-8
    assert abs(rep.exponent - 2.0) < 0.05
    assert all(r.gronwall.passed for r in [rep.baseline] + rep.results)
    rec = rep.results[0].trajectory.output_records
    assert all(np.isfinite(r.margin) for r in rec)


def test_weak_strong_rejects_bad_deltas():
    with pytest.raises(ValueError):
        run_weak_strong(parse_text(SMALL_COMPARE), deltas=(0.0,))


def test_vanish_small():
    rep = run_vanish(parse_text(SMALL_COMPARE + "eps_list = 1e-2, 1e-3\n"))
    assert rep.strictly_decreasing
    assert all(r.gronwall.passed for r in rep.results)
    assert len(rep.cauchy) == 1


# -- CLI ------------------------------------------------------------------------------

def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "a.cfg", SMALL_COMPARE)
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    assert {"diagnostics.csv", "diagnostics.ckpt", "manifest.cfg"} <= set(os.listdir(out))
    assert "status=completed" in capsys.readouterr().out
    # the manifest reproduces the run byte for byte
    out2 = tmp_path / "out2"
    assert main(["run", str(out / "manifest.cfg"), "--out", str(out2)]) == 0
    assert (out / "diagnostics.csv").read_bytes() == (out2 / "diagnostics.csv").read_bytes()


def test_cli_run_plot(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = write(tmp_path, "a.cfg", SMALL_COMPARE)
    assert main(["run", cfg, "--out", str(tmp_path / "o"), "--plot"]) == 0
    assert (tmp_path / "o" / "diagnostics.svg").read_text().lstrip().startswith("<?xml")


def test_cli_verify_lemmas(capsys):
    assert main(["verify-lemmas", "--samples", "200", "--seed", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5 and all(line.startswith("LEMMA ") for line in lines)


def test_cli_weak_strong(tmp_path, capsys):
    cfg = write(tmp_path, "w.cfg", SMALL_COMPARE)
    out = tmp_path / "ws"
    assert main(["weak-strong", cfg, "--deltas", "1e-2,5e-3", "--out", str(out)]) == 0
    assert "exponent=" in capsys.readouterr().out
    assert (out / "summary.csv").exists() and (out / "delta_0.csv").exists()


def test_cli_vanish(tmp_path, capsys):
    cfg = write(tmp_path, "v.cfg", SMALL_COMPARE)
    out = tmp_path / "v"
    assert main(["vanish", cfg, "--eps", "1e-2,1e-3", "--out", str(out)]) == 0
    assert "b_app_strictly_decreasing=True" in capsys.readouterr().out
    assert (out / "eps_0.01.csv").exists()


def test_cli_compare(tmp_path, capsys):
    cfg = write(tmp_path, "a.cfg", SMALL_COMPARE)
    main(["run", cfg, "--out", str(tmp_path / "a")])
    ck = str(tmp_path / "a" / "diagnostics.ckpt")
    capsys.readouterr()
    assert main(["compare", ck, ck]) == 0
    assert capsys.readouterr().out.strip() == "rel_entropy=0.0"
    other = write(tmp_path, "b.cfg", SMALL_COMPARE.replace("n = 16", "n = 32"))
    main(["run", other, "--out", str(tmp_path / "b")])
    assert main(["compare", ck, str(tmp_path / "b" / "diagnostics.ckpt")]) == 2


def test_cli_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_cli_bad_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "bad.cfg", "n = 32\nwhat = 1\n")
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_cli_bad_checkpoint(tmp_path):
    p = tmp_path / "x.ckpt"
    p.write_bytes(b"garbage")
    assert main(["compare", str(p), str(p)]) == 2


def test_cli_rejected_run_exit_code(tmp_path):
    cfg = write(tmp_path, "r.cfg", SMALL_COMPARE.replace("dt = 1e-3", "dt = 1e-2")
                .replace("t_end = 0.02", "t_end = 1.0").replace("kappa = 0.01", "kappa = 1.0")
                .replace("n = 16", "n = 64"))
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 3


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])

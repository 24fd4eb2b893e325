"""Command-line entry point ``nskw``.

Exit codes: 0 all checks passed, 1 a check failed, 2 invalid input,
3 runtime failure (rejected step, failed reference run).
"""
import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from ..constitutive import PressureLaw
from ..dynamics import read_checkpoint
from ..entropy import ReferencePair, relative_entropy
from ..errors import ConfigError, StepRejected, VacuumError
from ..lemmas import run_lemma_suite
from .config import parse_config
from .experiments import ReferenceFailed, run_energy_budget, run_vanish, run_weak_strong
from .output import emit_trajectory, emit_vanish, emit_weak_strong

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_run(args):
    spec = parse_config(args.config)
    rep = run_energy_budget(spec.config)
    paths = emit_trajectory(rep.trajectory, args.out, spec, plot=args.plot)
    print(f"status={rep.trajectory.status} steps={len(rep.trajectory.records) - 1} "
          f"E0={rep.E0:.12g} max_budget_residual={rep.max_residual:.6e} "
          f"mass_drift={rep.mass_drift:.3e}")
    print(f"csv={paths['csv']}")
    if not rep.trajectory.completed:
        print(rep.trajectory.message, file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if rep.passed() else EXIT_FAIL


def cmd_verify_lemmas(args):
    ok = True
    for rep in run_lemma_suite(samples=args.samples, seed=args.seed):
        print(rep.line())
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_weak_strong(args):
    spec = parse_config(args.config)
    if args.deltas:
        spec = replace(spec, deltas=args.deltas)
    rep = run_weak_strong(spec)
    emit_weak_strong(rep, args.out, spec, plot=args.plot)
    print(f"C={rep.C:.6g} exponent={rep.exponent:.6f}")
    ok = rep.baseline.max_rel_entropy < 1e-8 and abs(rep.exponent - 2.0) <= 0.05
    for r in [rep.baseline] + rep.results:
        print(f"delta={r.delta:g} E0={r.E0:.6e} max_E={r.max_rel_entropy:.6e} "
              f"min_margin={r.gronwall.min_margin:.6e} C_min={r.gronwall.C_min:.6g} "
              f"pass={r.gronwall.passed}")
        ok &= r.gronwall.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_vanish(args):
    spec = parse_config(args.config)
    if args.eps:
        spec = replace(spec, eps_list=args.eps)
    rep = run_vanish(spec)
    emit_vanish(rep, args.out, spec, plot=args.plot)
    ok = rep.strictly_decreasing
    for r in rep.results:
        print(f"eps={r.eps:g} max_abs_b_app={r.max_b_app:.6e} "
              f"min_margin={r.gronwall.min_margin:.6e} pass={r.gronwall.passed}")
        ok &= r.gronwall.passed
    print(f"b_app_strictly_decreasing={rep.strictly_decreasing}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_compare(args):
    state, head = read_checkpoint(args.ckpt1)
    ref_state, _ = read_checkpoint(args.ckpt2)
    if state.grid.shape != ref_state.grid.shape:
        raise ConfigError("checkpoints are on different grids")
    law = PressureLaw(head["a_p"], head["gamma"], head["rho_bar"])
    ref = ReferencePair(ref_state.grid, ref_state.rho, ref_state.m / ref_state.rho, t=ref_state.t)
    value = relative_entropy(state, ref, head["kappa"], law)
    print(f"rel_entropy={value!r}")
    return EXIT_OK if np.isfinite(value) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="nskw", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def with_out(sp):
        sp.add_argument("--out", default="nskw_out", help="output directory")
        sp.add_argument("--plot", action="store_true", help="also write SVG plots")

    sp = sub.add_parser("run", help="integrate one configuration")
    sp.add_argument("config")
    with_out(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify-lemmas", help="randomized lemma suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.set_defaults(func=cmd_verify_lemmas)

    sp = sub.add_parser("weak-strong", help="perturbations against a strong reference")
    sp.add_argument("config")
    sp.add_argument("--deltas", type=_floats, default=None)
    with_out(sp)
    sp.set_defaults(func=cmd_weak_strong)

    sp = sub.add_parser("vanish", help="vanishing-regularization sweep")
    sp.add_argument("config")
    sp.add_argument("--eps", type=_floats, default=None)
    with_out(sp)
    sp.set_defaults(func=cmd_vanish)

    sp = sub.add_parser("compare", help="relative entropy of ckpt1 with ckpt2 as reference")
    sp.add_argument("ckpt1")
    sp.add_argument("ckpt2")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StepRejected, VacuumError, ReferenceFailed) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        # malformed checkpoints and invalid parameter combinations
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

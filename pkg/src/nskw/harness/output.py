"""Writing run artifacts: diagnostics CSV, checkpoints, manifest and plots."""
import logging
import os

from .. import __version__
from ..dynamics import write_checkpoint
from ..entropy import write_csv
from .config import ExperimentSpec, format_config

log = logging.getLogger(__name__)


def _ensure_dir(outdir):
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {outdir}: {exc.strerror}") from exc
    return outdir


def write_manifest(path, spec):
    """All configuration keys plus the code version; loadable by
    :func:`~nskw.harness.config.parse_config`."""
    if not isinstance(spec, ExperimentSpec):
        spec = ExperimentSpec(config=spec)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nskw {__version__}\n")
        fh.write(format_config(spec))


def plot_series(path, t, series, ylabel):
    """Static SVG line plot; silently skipped when matplotlib is missing."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping %s", path)
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        ax.plot(t, y, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    # fixed metadata keeps the SVG reproducible
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_trajectory(traj, outdir, spec=None, name="diagnostics", plot=False):
    """CSV at the output cadence, final checkpoint and manifest."""
    _ensure_dir(outdir)
    paths = {}
    paths["csv"] = os.path.join(outdir, f"{name}.csv")
    write_csv(paths["csv"], traj.output_records)
    paths["checkpoint"] = os.path.join(outdir, f"{name}.ckpt")
    write_checkpoint(paths["checkpoint"], traj.final, traj.config)
    paths["manifest"] = os.path.join(outdir, "manifest.cfg")
    write_manifest(paths["manifest"], spec if spec is not None else traj.config)
    if plot:
        recs = traj.output_records
        t = [r.t for r in recs]
        series = {"E(t)": [r.energy for r in recs]}
        if any(r.rel_entropy == r.rel_entropy for r in recs):
            series["relative entropy"] = [r.rel_entropy for r in recs]
            series["Gronwall margin"] = [r.margin for r in recs]
        paths["plot"] = plot_series(os.path.join(outdir, f"{name}.svg"), t, series, "value")
    return paths


def write_table(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def emit_weak_strong(report, outdir, spec=None, plot=False):
    _ensure_dir(outdir)
    for r in [report.baseline] + report.results:
        emit_trajectory(r.trajectory, outdir, spec, name=f"delta_{r.delta:g}", plot=plot)
    path = os.path.join(outdir, "summary.csv")
    write_table(path, ("delta", "rel_entropy_0", "max_rel_entropy", "b_final", "min_margin",
                       "C_min", "passed"), report.summary_rows())
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"# C={report.C!r} exponent={report.exponent!r}\n")
    return path


def emit_vanish(report, outdir, spec=None, plot=False):
    _ensure_dir(outdir)
    rows = []
    for k, r in enumerate(report.results):
        emit_trajectory(r.trajectory, outdir, spec, name=f"eps_{r.eps:g}", plot=plot)
        cauchy = report.cauchy[k - 1] if k else float("nan")
        rows.append((r.eps, r.max_b_app, r.gronwall.min_margin, float(r.rel_entropy.max()), cauchy,
                     r.gronwall.passed))
    path = os.path.join(outdir, "summary.csv")
    write_table(path, ("eps", "max_abs_b_app", "min_margin", "max_rel_entropy",
                       "cauchy_rel_entropy", "passed"), rows)
    return path

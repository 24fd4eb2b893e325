"""Headline experiments: energy budget, weak-strong comparison and the
vanishing-regularization sweep.

Both comparison experiments use a *strong reference*: a run of the
unregularized system (``eps = nu = 0``) on a grid ``refine`` times finer
than the experiment grid, with the same time step, spectrally restricted to
the experiment grid at every output time.  Reference time derivatives are
the semi-discrete right-hand sides on the fine grid.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..dynamics import perturbation, run, state_from_fields
from ..entropy import (ReferencePair, energy_budget, error_b, error_b_app, gronwall_check,
                       gronwall_constant, reference_from_state, relative_entropy)
from ..errors import StepRejected

log = logging.getLogger(__name__)


def worker_count():
    """Worker cap from ``NSKW_THREADS`` (default 1: sequential)."""
    try:
        return max(1, int(os.environ.get("NSKW_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


class ReferenceFailed(RuntimeError):
    """The fine-grid reference run did not complete."""


# -- energy budget -------------------------------------------------------------

@dataclass
class BudgetReport:
    trajectory: object
    residual: np.ndarray
    E0: float
    mass_drift: float

    @property
    def max_residual(self):
        return float(np.max(self.residual))

    def passed(self, rtol=1e-4):
        return (self.trajectory.completed and self.max_residual <= rtol * max(abs(self.E0), 1e-300)
                and self.mass_drift < 1e-10)


def run_energy_budget(cfg, initial=None):
    traj = run(cfg, initial)
    m0 = traj.records[0].mass
    drift = max(abs(r.mass - m0) for r in traj.records) / abs(m0)
    return BudgetReport(traj, energy_budget(traj), traj.records[0].energy, drift)


# -- strong reference --------------------------------------------------------------

@dataclass
class StrongReference:
    fine_config: object
    trajectory: object
    refs: list          # ReferencePair per output time, on the experiment grid

    @property
    def times(self):
        return np.array([r.t for r in self.refs])


def strong_reference(cfg, refine=4):
    """Fine-grid run of the unregularized system from ``cfg``'s initial
    profile; aborts with :class:`ReferenceFailed` if the run is rejected."""
    fine = replace(cfg, n=cfg.n * refine, eps=0.0, nu=0.0)
    traj = run(fine)
    if not traj.completed:
        raise ReferenceFailed(f"reference run failed: {traj.message}")
    coarse = cfg.grid
    refs = [reference_from_state(s, fine).restrict(coarse) for s in traj.snapshots]
    return StrongReference(fine, traj, refs)


def _initial_from_reference(cfg, reference, delta=0.0):
    r0 = reference.refs[0]
    v0 = r0.v + delta * perturbation(cfg.grid) if delta else r0.v
    return state_from_fields(cfg.grid, r0.r, v0, 0.0, cfg.rho_min)


def _annotate(traj, rel, rhs, margin):
    for rec, e, g, m in zip(traj.output_records, rel, rhs, margin):
        rec.rel_entropy, rec.gronwall_rhs, rec.margin = float(e), float(g), float(m)


# -- weak-strong ----------------------------------------------------------------------

@dataclass
class DeltaResult:
    delta: float
    trajectory: object
    t: np.ndarray
    rel_entropy: np.ndarray
    b: np.ndarray
    gronwall: object

    @property
    def E0(self):
        return float(self.rel_entropy[0])

    @property
    def max_rel_entropy(self):
        return float(np.max(self.rel_entropy))


@dataclass
class WeakStrongReport:
    reference: StrongReference
    C: float
    baseline: DeltaResult
    results: list = field(default_factory=list)

    @property
    def exponent(self):
        """Least-squares slope of ``log E_rel(0)`` against ``log delta``."""
        d = np.array([r.delta for r in self.results])
        e = np.array([r.E0 for r in self.results])
        if d.size < 2:
            return float("nan")
        return float(np.polyfit(np.log(d), np.log(e), 1)[0])

    def summary_rows(self):
        rows = []
        for r in [self.baseline] + self.results:
            rows.append((r.delta, r.E0, r.max_rel_entropy, float(r.b[-1]), r.gronwall.min_margin,
                         r.gronwall.C_min, r.gronwall.passed))
        return rows


def _compare(cfg, reference, traj, C, tol, nu=0.0, eps=0.0):
    states = traj.snapshots
    refs = reference.refs[:len(states)]
    t = np.array([s.t for s in states])
    rel = np.array([relative_entropy(s, r, cfg.kappa, cfg.pressure, cfg.rho_min)
                    for s, r in zip(states, refs)])
    b = error_b(states, refs, cfg.kappa, cfg.pressure, cfg.rho_min)
    b_app = None
    if nu or eps:
        b_app = error_b_app(states, refs, nu, eps, cfg.kappa, cfg.q, cfg.pressure, cfg.rho_min)
    rep = gronwall_check(t, rel, b, b_app, C, tol)
    _annotate(traj, rel, rep.rhs, rep.margin)
    return t, rel, b, b_app, rep


def run_weak_strong(spec, deltas=None, tol=1e-6):
    """Perturb the reference velocity by ``delta * w`` and track the relative
    entropy and Gronwall margin against the strong reference."""
    cfg = replace(spec.config, eps=0.0, nu=0.0)
    deltas = tuple(spec.deltas if deltas is None else deltas)
    if any(not d > 0 for d in deltas):
        raise ValueError("deltas must be positive")
    reference = strong_reference(cfg, spec.refine)
    C = gronwall_constant(reference.refs, cfg.pressure)

    def one(delta):
        traj = run(cfg, _initial_from_reference(cfg, reference, delta))
        if not traj.completed:
            raise StepRejected(f"delta={delta}: {traj.message}")
        t, rel, b, _, rep = _compare(cfg, reference, traj, C, tol)
        return DeltaResult(delta, traj, t, rel, b, rep)

    results = _map(one, (0.0,) + deltas)
    return WeakStrongReport(reference, C, results[0], results[1:])


# -- vanishing regularization ---------------------------------------------------------

@dataclass
class EpsResult:
    eps: float
    trajectory: object
    t: np.ndarray
    rel_entropy: np.ndarray
    b: np.ndarray
    b_app: np.ndarray
    gronwall: object

    @property
    def max_b_app(self):
        return float(np.max(np.abs(self.b_app))) if self.b_app is not None else 0.0


@dataclass
class VanishReport:
    reference: StrongReference
    C: float
    results: list
    cauchy: list     # max_t E_rel between successive-eps solutions

    @property
    def strictly_decreasing(self):
        m = [r.max_b_app for r in self.results]
        return all(a > b for a, b in zip(m, m[1:]))


def run_vanish(spec, eps_list=None, tol=1e-6):
    """Runs of the regularized system with ``nu = eps`` for each listed
    ``eps`` from the same data, compared with the strong reference."""
    cfg0 = spec.config
    eps_list = tuple(spec.eps_list if eps_list is None else eps_list)
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])) or any(e < 0 for e in eps_list):
        raise ValueError("eps list must be nonnegative and strictly decreasing")
    reference = strong_reference(cfg0, spec.refine)
    C = gronwall_constant(reference.refs, cfg0.pressure)

    def one(eps):
        cfg = replace(cfg0, eps=eps, nu=eps)
        traj = run(cfg, _initial_from_reference(cfg, reference))
        if not traj.completed:
            raise StepRejected(f"eps={eps}: {traj.message}")
        t, rel, b, b_app, rep = _compare(cfg, reference, traj, C, tol, nu=eps, eps=eps)
        if b_app is None:
            b_app = np.zeros_like(b)
        return EpsResult(eps, traj, t, rel, b, b_app, rep)

    results = _map(one, eps_list)
    cauchy = []
    for coarse, finer in zip(results, results[1:]):
        pairs = zip(finer.trajectory.snapshots, coarse.trajectory.snapshots)
        cauchy.append(max(relative_entropy(s, _as_ref(r), cfg0.kappa, cfg0.pressure, cfg0.rho_min)
                          for s, r in pairs))
    return VanishReport(reference, C, results, cauchy)


def _as_ref(state):
    return ReferencePair(state.grid, state.rho, state.m / state.rho, t=state.t)

"""Energy, relative entropy, reference residuals and the Gronwall bound.

The relative entropy of a state ``(rho, u)`` with respect to a smooth
reference ``(r, v)`` is

    E_rel = 1/2 int rho |u - v|^2 + kappa/2 int rho |grad ln rho - grad ln r|^2
            + int H(rho | r).

``b`` and ``b_app`` are the time-accumulated pairings of the state with the
reference residuals ``A1..A3`` and with the regularization terms; the check
of :func:`gronwall_check` is the discrete form of

    E_rel(t) <= E_rel(0) e^{Ct} + b(t) + C int_0^t b(s) e^{C(t-s)} ds  (+ same for b_app).
"""
import csv
import math
from dataclasses import dataclass, fields
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .constitutive import frobenius
from .korteweg import RHO_MIN, DensityProfile, check_floor, korteweg_div_form_a

CSV_COLUMNS = ("t", "mass", "energy", "diss_S", "diss_nu", "diss_kw", "diss_p",
               "rel_entropy", "gronwall_rhs", "margin")


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    diss_S: float
    diss_nu: float
    diss_kw: float
    diss_p: float
    rel_entropy: float = math.nan
    gronwall_rhs: float = math.nan
    margin: float = math.nan
    min_rho: float = math.nan
    divu_inf: float = math.nan

    @property
    def dissipation(self):
        return self.diss_S + self.diss_nu + self.diss_kw + self.diss_p

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


# -- energy ---------------------------------------------------------------

def energy(state, kappa, pressure, rho_min=RHO_MIN):
    """``1/2 int |m|^2/rho + 2 kappa int |grad sqrt(rho)|^2 + int H(rho)``."""
    g = state.grid
    prof = DensityProfile(g, state.rho, rho_min)
    kin = 0.5 * g.integrate(np.sum(state.m ** 2, axis=0) / prof.rho)
    cap = 0.0
    if kappa:
        gs = g.gradient(prof.sqrt)
        cap = 2.0 * kappa * g.integrate(np.sum(gs * gs, axis=0))
    return kin + cap + g.integrate(pressure.H(prof.rho))


def diagnostics(state, cfg):
    """Mass, energy and the four dissipation rates of one state."""
    g = state.grid
    prof = DensityProfile(g, state.rho, cfg.rho_min)
    rho = prof.rho
    u = g.project(state.m / rho)
    D = g.sym_gradient(u)
    diss_S = g.integrate(rho * cfg.stress.dissipation(D))
    diss_nu = cfg.nu * g.integrate(frobenius(D) ** cfg.q) if cfg.nu else 0.0
    diss_kw = diss_p = 0.0
    if cfg.eps:
        if cfg.kappa:
            diss_kw = cfg.kappa * cfg.eps * g.integrate(rho * np.sum(prof.hess_log ** 2, axis=(0, 1)))
        gr = g.gradient(rho)
        diss_p = cfg.eps * g.integrate(cfg.pressure.d2H(rho) * np.sum(gr * gr, axis=0))
    return DiagnosticsRecord(
        t=float(state.t), mass=state.mass, energy=energy(state, cfg.kappa, cfg.pressure, cfg.rho_min),
        diss_S=diss_S, diss_nu=diss_nu, diss_kw=diss_kw, diss_p=diss_p,
        min_rho=float(rho.min()), divu_inf=float(np.max(np.abs(np.trace(D)))),
    )


def energy_budget(trajectory):
    """Residual ``E(t_k) + int_0^{t_k} (dissipation) dt - E(0)`` at every step.

    The time integral is the cumulative Simpson rule over the per-step
    records, so the quadrature error sits below the RK4 error.
    """
    t = trajectory.record_times
    E = np.array([r.energy for r in trajectory.records])
    D = np.array([r.dissipation for r in trajectory.records])
    if t.size < 2:
        return np.zeros_like(E)
    if t.size < 3:
        return E + cumulative_trapezoid(D, t, initial=0.0) - E[0]
    return E + cumulative_simpson(D, x=t, initial=0.0) - E[0]


def density_floor_bound(trajectory):
    """Lower bound ``min rho_0 * exp(-int_0^t |div u|_inf)`` at every step."""
    t = trajectory.record_times
    divu = np.array([r.divu_inf for r in trajectory.records])
    integral = cumulative_trapezoid(divu, t, initial=0.0) if t.size > 1 else np.zeros(1)
    return trajectory.records[0].min_rho * np.exp(-integral)


# -- reference pairs -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReferencePair:
    """Smooth comparison pair ``(r, v)`` with time derivatives and the stress
    law used to evaluate ``A1``."""

    grid: object
    r: np.ndarray
    v: np.ndarray
    dr_dt: np.ndarray = None
    dv_dt: np.ndarray = None
    stress: object = None
    t: float = 0.0

    def __post_init__(self):
        if np.min(self.r) <= 0:
            raise ValueError("reference density must be positive")

    @cached_property
    def profile(self):
        return DensityProfile(self.grid, self.r, rho_min=min(RHO_MIN, float(np.min(self.r))))

    @cached_property
    def grad_v(self):
        return self.grid.jacobian(self.v)

    @cached_property
    def Dv(self):
        G = self.grad_v
        return 0.5 * (G + np.swapaxes(G, 0, 1))

    @property
    def r_min(self):
        return float(np.min(self.r))

    @property
    def r_max(self):
        return float(np.max(self.r))

    @cached_property
    def gradv_max(self):
        return float(np.max(frobenius(self.grad_v)))

    @cached_property
    def Sv_max(self):
        if self.stress is None:
            return 0.0
        return float(np.max(frobenius(self.stress.apply(self.Dv))))

    @cached_property
    def divv_max(self):
        return float(np.max(np.abs(np.trace(self.grad_v))))

    @property
    def has_derivatives(self):
        return self.dr_dt is not None and self.dv_dt is not None

    def restrict(self, target):
        """The same pair resampled spectrally onto ``target``."""
        rs = lambda f: None if f is None else self.grid.resample(f, target)  # noqa: E731
        return ReferencePair(target, rs(self.r), rs(self.v), rs(self.dr_dt), rs(self.dv_dt),
                             self.stress, self.t)


def reference_from_state(state, cfg):
    """Reference pair from a state, with exact semi-discrete time derivatives
    taken from the right-hand side of the evolution equations."""
    from .dynamics import continuity_rhs, momentum_rhs

    rho = check_floor(state.rho, cfg.rho_min)
    v = state.m / rho
    dr = continuity_rhs(state, cfg)
    dm = momentum_rhs(state, cfg)
    dv = (dm - v * dr) / rho
    return ReferencePair(state.grid, rho, v, dr, dv, cfg.stress, state.t)


def references_from_snapshots(snapshots, stress=None, rho_min=RHO_MIN):
    """Reference pairs from a snapshot sequence; time derivatives by
    second-order centered differences (one-sided at the ends)."""
    if len(snapshots) < 3:
        raise ValueError("need at least three snapshots for time derivatives")
    t = np.array([s.t for s in snapshots])
    if np.any(np.diff(t) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    r = np.stack([check_floor(s.rho, rho_min) for s in snapshots])
    v = np.stack([s.m / rr for s, rr in zip(snapshots, r)])
    dr = np.gradient(r, t, axis=0, edge_order=2)
    dv = np.gradient(v, t, axis=0, edge_order=2)
    g = snapshots[0].grid
    return [ReferencePair(g, r[k], v[k], dr[k], dv[k], stress, float(t[k])) for k in range(len(t))]


def steady_reference(grid, r, v=None, stress=None):
    """Time-independent pair with zero time derivatives."""
    r = np.asarray(r, dtype=float)
    v = np.zeros((grid.d,) + grid.shape) if v is None else np.asarray(v, dtype=float)
    return ReferencePair(grid, r, v, np.zeros_like(r), np.zeros_like(v), stress)


# -- relative entropy ----------------------------------------------------------------

def relative_entropy(state, ref, kappa, pressure, rho_min=RHO_MIN):
    g = state.grid
    prof = DensityProfile(g, state.rho, rho_min)
    u = state.m / prof.rho
    du = u - ref.v
    out = 0.5 * g.integrate(prof.rho * np.sum(du * du, axis=0))
    if kappa:
        dl = prof.grad_log - ref.profile.grad_log
        out += 0.5 * kappa * g.integrate(prof.rho * np.sum(dl * dl, axis=0))
    return out + g.integrate(pressure.H_rel(prof.rho, ref.r))


# -- residuals -------------------------------------------------------------------

def _require_derivatives(ref):
    if not ref.has_derivatives:
        raise ValueError("reference pair lacks time derivatives")


def _advect(v, G):
    # (v . grad) w with G[i, j] = d_j w_i
    return np.einsum("j...,ij...->i...", v, G)


def residual_A1(ref, pressure, kappa, stress=None):
    """``d_t v + (v.grad)v - div(r S(Dv))/r + grad p(r)/r - kappa div(r grad^2 ln r)/r``."""
    _require_derivatives(ref)
    g, r = ref.grid, ref.r
    stress = stress if stress is not None else ref.stress
    out = ref.dv_dt + _advect(ref.v, ref.grad_v) + g.gradient(pressure.p(r)) / r
    if stress is not None:
        out = out - g.tensor_divergence(r * stress.apply(ref.Dv)) / r
    if kappa:
        out = out - kappa * korteweg_div_form_a(g, ref.profile) / r
    return out


def residual_A2(ref):
    """``grad(d_t r / r) + (v.grad) grad ln r + div(r (grad v)^T) / r``."""
    _require_derivatives(ref)
    g, r = ref.grid, ref.r
    GT = np.swapaxes(ref.grad_v, 0, 1)
    return (g.gradient(ref.dr_dt / r) + _advect(ref.v, ref.profile.hess_log)
            + g.tensor_divergence(r * GT) / r)


def residual_A3(ref, pressure):
    """``d_t H'(r) + v . grad H'(r) + p'(r) div v``."""
    _require_derivatives(ref)
    g, r = ref.grid, ref.r
    return (pressure.d2H(r) * ref.dr_dt + np.sum(ref.v * g.gradient(pressure.dH(r)), axis=0)
            + pressure.dp(r) * np.trace(ref.grad_v))


# -- error functionals ------------------------------------------------------------------

def _align(states, refs):
    if len(states) != len(refs):
        raise ValueError("state and reference sequences differ in length")
    t = np.array([s.t for s in states])
    tr = np.array([r.t for r in refs])
    if not np.allclose(t, tr, rtol=0, atol=1e-12 * max(1.0, float(np.abs(t).max()))):
        raise ValueError("state and reference time grids are misaligned")
    for s, r in zip(states, refs):
        if s.grid.shape != r.grid.shape:
            raise ValueError("state and reference grids differ")
    return t


def _states(trajectory):
    return getattr(trajectory, "snapshots", trajectory)


def b_integrands(state, ref, kappa, pressure, rho_min=RHO_MIN):
    """The three pointwise-in-time pairings whose time integral is ``b``:
    ``-int rho (u-v).A1``, ``-kappa int rho (grad ln rho - grad ln r).A2``,
    ``-int (rho - r) A3``."""
    g = state.grid
    prof = DensityProfile(g, state.rho, rho_min)
    u = state.m / prof.rho
    first = -g.integrate(prof.rho * np.sum((u - ref.v) * residual_A1(ref, pressure, kappa), axis=0))
    second = 0.0
    if kappa:
        dl = prof.grad_log - ref.profile.grad_log
        second = -kappa * g.integrate(prof.rho * np.sum(dl * residual_A2(ref), axis=0))
    third = -g.integrate((prof.rho - ref.r) * residual_A3(ref, pressure))
    return np.array([first, second, third])


def error_b(trajectory, refs, kappa, pressure, rho_min=RHO_MIN):
    """Cumulative trapezoidal integral of the summed :func:`b_integrands`."""
    states = _states(trajectory)
    t = _align(states, refs)
    f = np.array([b_integrands(s, r, kappa, pressure, rho_min).sum() for s, r in zip(states, refs)])
    return cumulative_trapezoid(f, t, initial=0.0) if t.size > 1 else np.zeros(1)


def b_app_integrands(state, ref, nu, eps, kappa, q, rho_min=RHO_MIN, pressure=None):
    """The five regularization pairings whose time integral is ``b_app``:

    ``nu int |Du|^(q-2) Du:Dv``, ``kappa eps int rho grad^2 ln rho : grad^2 ln r``,
    ``eps int v_i d_j rho (d_j u_i - d_j v_i)``,
    ``kappa eps int rho (grad ln rho)_j (grad ln rho - grad ln r)_i (grad^2 ln r)_ij``,
    ``eps int grad rho . grad H'(r)``.
    """
    out = np.zeros(5)
    if nu == 0 and eps == 0:
        return out
    g = state.grid
    prof = DensityProfile(g, state.rho, rho_min)
    rho = prof.rho
    u = state.m / rho
    if nu:
        D = g.sym_gradient(u)
        out[0] = nu * g.integrate(np.sum(frobenius(D) ** (q - 2) * D * ref.Dv, axis=(0, 1)))
    if eps:
        gr = g.gradient(rho)
        dG = g.jacobian(u) - ref.grad_v
        out[2] = eps * g.integrate(np.einsum("i...,j...,ij...->...", ref.v, gr, dG))
        if kappa:
            Hr = ref.profile.hess_log
            out[1] = kappa * eps * g.integrate(rho * np.sum(prof.hess_log * Hr, axis=(0, 1)))
            dl = prof.grad_log - ref.profile.grad_log
            out[3] = kappa * eps * g.integrate(rho * np.einsum("j...,i...,ij...->...", prof.grad_log, dl, Hr))
        if pressure is None:
            raise ValueError("pressure law required when eps > 0")
        out[4] = eps * g.integrate(np.sum(gr * g.gradient(pressure.dH(ref.r)), axis=0))
    return out


def error_b_app(trajectory, refs, nu, eps, kappa, q, pressure, rho_min=RHO_MIN):
    states = _states(trajectory)
    t = _align(states, refs)
    f = np.array([b_app_integrands(s, r, nu, eps, kappa, q, rho_min, pressure).sum()
                  for s, r in zip(states, refs)])
    return cumulative_trapezoid(f, t, initial=0.0) if t.size > 1 else np.zeros(1)


# -- Gronwall bound ----------------------------------------------------------------------

def gronwall_constant(refs, pressure):
    """``max|S(Dv)|/2 + max|grad v| + C_p max|div v|`` over the reference
    sequence, with ``C_p`` the pressure-bound constant on ``[min r, max r]``."""
    from .lemmas import pressure_bound_constant

    refs = [refs] if isinstance(refs, ReferencePair) else list(refs)
    Sv = max(r.Sv_max for r in refs)
    gv = max(r.gradv_max for r in refs)
    dv = max(r.divv_max for r in refs)
    if dv == 0.0:
        return 0.5 * Sv + gv
    cp = pressure_bound_constant(pressure, min(r.r_min for r in refs), max(r.r_max for r in refs))
    return 0.5 * Sv + gv + cp * dv


def gronwall_rhs(t, E0, b, C, b_app=None):
    """``E0 e^{Ct} + b + C int_0^t b(s) e^{C(t-s)} ds`` (plus the same for
    ``b_app``), with trapezoidal quadrature on the sample times ``t``."""
    t = np.asarray(t, dtype=float)
    total = np.asarray(b, dtype=float)
    if b_app is not None:
        total = total + np.asarray(b_app, dtype=float)
    growth = np.exp(C * t)
    conv = np.zeros_like(t)
    if C and t.size > 1:
        conv = growth * cumulative_trapezoid(total * np.exp(-C * t), t, initial=0.0)
    return E0 * growth + total + C * conv


@dataclass
class GronwallReport:
    t: np.ndarray
    rel_entropy: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray
    C: float
    C_min: float
    tolerance: float
    passed: bool

    @property
    def min_margin(self):
        return float(np.min(self.margin))


def gronwall_check(t, E_series, b_series, b_app_series=None, C=0.0, tol=1e-6):
    """Pointwise margin ``RHS - E_rel``; passes when every margin is at
    least ``-tol (1 + E_rel(0))``.  Also reports the smallest ``C >= 0``
    (to bisection accuracy) for which the check passes, or nan if none up
    to ``max(64, 64 C)``."""
    E = np.asarray(E_series, dtype=float)
    t = np.asarray(t, dtype=float)
    floor = -tol * (1.0 + E[0])

    def margin(c):
        return gronwall_rhs(t, E[0], b_series, c, b_app_series) - E

    m = margin(C)
    ok = lambda c: bool(np.all(margin(c) >= floor))  # noqa: E731
    if ok(0.0):
        c_min = 0.0
    else:
        hi = max(C, 1.0)
        cap = max(64.0, 64.0 * C)
        while not ok(hi) and hi < cap:
            hi *= 2.0
        if ok(hi):
            lo = 0.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                lo, hi = (lo, mid) if ok(mid) else (mid, hi)
            c_min = hi
        else:
            c_min = math.nan
    return GronwallReport(t=t, rel_entropy=E, rhs=m + E, margin=m, C=float(C), C_min=c_min,
                          tolerance=tol, passed=bool(np.all(m >= floor)))


# -- CSV ------------------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def write_csv(path, records):
    """One row per record with the fixed column set; ``repr`` floats
    round-trip exactly, missing values are written as ``nan``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow([_fmt(x) for x in rec.row()])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected CSV header")
    names = [f.name for f in fields(DiagnosticsRecord)]
    out = []
    for row in rows[1:]:
        vals = dict(zip(CSV_COLUMNS, map(float, row)))
        out.append(DiagnosticsRecord(**{k: vals[k] for k in names if k in vals}))
    return out

"""Numerical oracles for the auxiliary inequalities and identities.

Margin-type checks return ``rhs - lhs`` of an inequality so that a
nonnegative value means the inequality holds; residual-type checks return a
normalized size of ``lhs - rhs`` for an identity.  All sampling uses
seeded :class:`numpy.random.Generator` instances; random densities and
velocities are band-limited fields from :func:`nskw.fields.random_field`.
"""
from dataclasses import dataclass

import numpy as np

from .constitutive import PressureLaw
from .errors import ConfigError
from .fields import make_grid, random_field
from .korteweg import RHO_MIN, DensityProfile


@dataclass
class LemmaReport:
    lemma: str
    samples: int
    worst_margin: float
    tolerance: float
    seed: int
    witness: object = None
    detail: str = ""

    @property
    def passed(self):
        return bool(self.worst_margin >= -self.tolerance)

    def line(self):
        return (f"LEMMA {self.lemma} pass={self.passed} worst_margin={self.worst_margin:.6e} "
                f"samples={self.samples} seed={self.seed}")


# -- monotonicity of |A|^(q-2) A -----------------------------------------------

def cq_constant(q):
    """``min(1/2, 2^(2-q))``."""
    if not q > 2:
        raise ValueError("C_q requires q > 2")
    return min(0.5, 2.0 ** (2.0 - q))


def _F(q, A):
    # matrix axes last here: A has shape (..., d, d)
    s = np.sqrt(np.sum(A * A, axis=(-2, -1)))[..., None, None]
    return np.power(s, q - 2.0) * A


def check_monotonicity_bound(q, A, B):
    """``(F(A) - F(B)):(A - B) - C_q |A - B|^q`` with ``F(A) = |A|^(q-2) A``.

    Accepts single matrices or stacks with matrix axes last.
    """
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    dA = A - B
    lhs = np.sum((_F(q, A) - _F(q, B)) * dA, axis=(-2, -1))
    nd = np.sqrt(np.sum(dA * dA, axis=(-2, -1)))
    return lhs - cq_constant(q) * np.power(nd, q)


def monotonicity_scale(q, A, B):
    """Magnitude used to normalize :func:`check_monotonicity_bound` so that
    round-off is comparable across scales."""
    nA = np.sqrt(np.sum(A * A, axis=(-2, -1)))
    nB = np.sqrt(np.sum(B * B, axis=(-2, -1)))
    nd = np.sqrt(np.sum((A - B) ** 2, axis=(-2, -1)))
    return 1.0 + (nA ** (q - 1) + nB ** (q - 1)) * nd + nd ** q


def _random_matrices(rng, count, d):
    M = rng.standard_normal((count, d, d))
    return M * (10.0 ** rng.uniform(-2, 2, size=count))[:, None, None]


def cq_report(samples=10_000, seed=0, qs=(2.5, 3.0, 4.0, 6.0), d=2, tolerance=1e-12):
    rng = np.random.default_rng(seed)
    worst, witness = np.inf, None
    for q in qs:
        A = _random_matrices(rng, samples, d)
        # half the pairs are close, to probe small |A - B|
        B = np.where(np.arange(samples)[:, None, None] % 2 == 0,
                     _random_matrices(rng, samples, d),
                     A + 1e-3 * _random_matrices(rng, samples, d))
        m = check_monotonicity_bound(q, A, B) / monotonicity_scale(q, A, B)
        k = int(np.argmin(m))
        if m[k] < worst:
            worst, witness = float(m[k]), (q, A[k], B[k])
    return LemmaReport("cq", samples * len(qs), worst, tolerance, seed, witness,
                       f"q in {list(qs)}")


# -- Poincare-type inequality --------------------------------------------------------

def _lq(grid, f, q):
    return grid.integrate(np.abs(f) ** q) ** (1.0 / q)


def poincare_ratio(grid, rho, u, q):
    """Per component ``(|u|_q - |int rho u| / |rho|_1) / |grad u|_q``; nan
    where ``grad u`` vanishes."""
    rho = np.asarray(rho, dtype=float)
    mass = grid.integrate(np.abs(rho))
    if not mass > 0:
        raise ValueError("density has zero total mass")
    u = np.asarray(u, dtype=float)
    if u.ndim == grid.d:
        u = u[None]
    out = []
    for c in u:
        gu = grid.gradient(c)
        den = _lq(grid, np.sqrt(np.sum(gu * gu, axis=0)), q)
        num = _lq(grid, c, q) - abs(grid.integrate(rho * c)) / mass
        out.append(num / den if den > 1e-14 * (1 + _lq(grid, c, q)) else np.nan)
    return np.array(out)


def poincare_margin(grid, rho, u, q, C):
    """``|int rho u| / |rho|_1 + C |grad u|_q - |u|_q``, minimized over
    components of ``u``."""
    if not q > grid.d:
        raise ValueError("Poincare inequality requires q > d")
    rho = np.asarray(rho, dtype=float)
    mass = grid.integrate(np.abs(rho))
    if not mass > 0:
        raise ValueError("density has zero total mass")
    u = np.asarray(u, dtype=float)
    if u.ndim == grid.d:
        u = u[None]
    margins = []
    for c in u:
        gu = grid.gradient(c)
        rhs = abs(grid.integrate(rho * c)) / mass + C * _lq(grid, np.sqrt(np.sum(gu * gu, axis=0)), q)
        margins.append(rhs - _lq(grid, c, q))
    return float(min(margins))


def _bump(grid, rng):
    # periodized Gaussian bump of random width and center, plus a small floor
    x0 = rng.uniform(0, 1, size=grid.d)
    width = 10.0 ** rng.uniform(-1.5, -0.5)
    r2 = 0.0
    for x, c in zip(grid.x, x0):
        dx = (x - c + 0.5) % 1.0 - 0.5
        r2 = r2 + dx * dx
    return np.exp(-0.5 * r2 / width ** 2) + 10.0 ** rng.uniform(-4, -1)


def poincare_sample(grid, rng):
    """One random ``(rho, u)`` pair: ``rho`` is either a band-limited
    positive field or a concentrated bump; ``u`` is a band-limited field
    plus a random constant offset."""
    if rng.random() < 0.5:
        lo = 10.0 ** rng.uniform(-3, 0)
        rho = random_field(grid, rng, lo, lo + 10.0 ** rng.uniform(-1, 1))
    else:
        rho = _bump(grid, rng)
    u = random_field(grid, rng, -1.0, 1.0) + rng.normal(0.0, 1.0)
    return rho, u


def poincare_calibrate(d=1, q=4.0, samples=10_000, seed=0, n=64, safety=1.1):
    """Empirical constant: the largest sampled :func:`poincare_ratio`
    times ``safety``."""
    grid = make_grid(d, n, False)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        rho, u = poincare_sample(grid, rng)
        r = poincare_ratio(grid, rho, u, q)
        if np.isfinite(r).any():
            worst = max(worst, float(np.nanmax(r)))
    return safety * worst


def poincare_report(samples=10_000, seed=0, d=1, q=4.0, n=64):
    """Calibrate on one seeded batch, then verify on an independent batch."""
    C = poincare_calibrate(d, q, samples, seed, n)
    grid = make_grid(d, n, False)
    rng = np.random.default_rng([seed, 1])
    worst, witness = np.inf, None
    for _ in range(samples):
        rho, u = poincare_sample(grid, rng)
        scale = 1.0 + _lq(grid, u, q)
        m = poincare_margin(grid, rho, u, q, C) / scale
        if m < worst:
            worst, witness = m, (rho, u)
    return LemmaReport("poincare", samples, float(worst), 1e-12, seed, witness,
                       f"d={d} q={q} C={C:.6g} (calibrated, holdout-verified)")


# -- pressure bound ----------------------------------------------------------------

def pressure_ratio(pressure, rho, r):
    """``|p(rho|r)| / H(rho|r)`` with the Taylor limit ``r p''(r) / p'(r)``
    where ``|rho - r| <= 1e-3 r``."""
    rho, r = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(r, dtype=float))
    near = np.abs(rho - r) <= 1e-3 * r
    Hr = pressure.H_rel(rho, r)
    safe = np.where(near, 1.0, Hr)
    direct = np.abs(pressure.p_rel(rho, r)) / safe
    return np.where(near, r * pressure.d2p(r) / pressure.dp(r), direct)


def pressure_bound_constant(pressure, r_min, r_max, rho_grid=None, r_points=65):
    """Largest :func:`pressure_ratio` over ``rho`` in ``rho_grid`` (default
    ``0`` plus a log-spaced grid up to ``10 r_max``) and ``r`` uniformly
    sampled in ``[r_min, r_max]``."""
    if not 0 < r_min <= r_max:
        raise ValueError("need 0 < r_min <= r_max")
    if rho_grid is None:
        rho_grid = np.concatenate([[0.0], np.logspace(np.log10(r_min) - 6, np.log10(10 * r_max), 2001)])
    r = np.linspace(r_min, r_max, r_points)
    return float(np.max(pressure_ratio(pressure, np.asarray(rho_grid)[:, None], r[None, :])))


def pressure_report(samples=10_000, seed=0, gammas=(1.4, 2.0, 3.0), r_range=(0.5, 2.0)):
    """Constant from the deterministic grid, verified on random holdout pairs."""
    rng = np.random.default_rng(seed)
    worst, witness = np.inf, None
    details = []
    for g in gammas:
        law = PressureLaw(1.0, g, 1.0)
        C = pressure_bound_constant(law, *r_range)
        rho = np.concatenate([[0.0], 10.0 ** rng.uniform(-6, np.log10(20 * r_range[1]), samples - 1)])
        r = rng.uniform(*r_range, size=samples)
        lhs = np.abs(law.p_rel(rho, r))
        m = (C * law.H_rel(rho, r) - lhs) / (1.0 + lhs)
        k = int(np.argmin(m))
        if m[k] < worst:
            worst, witness = float(m[k]), (g, rho[k], r[k])
        details.append(f"gamma={g}: C={C:.12g}")
    return LemmaReport("pressure_bound", samples * len(gammas), worst, 1e-12, seed, witness,
                       "; ".join(details) + f"; r in {list(r_range)}, rho in [0, {20 * r_range[1]}]")


# -- Jungel inequalities ------------------------------------------------------------

def jungel_margins(grid, rho, rho_min=RHO_MIN):
    """``(L - 1/8 int |grad rho^(1/4)|^4, L - 1/7 int |grad^2 sqrt(rho)|^2)``
    with ``L = int rho |grad^2 ln rho|^2``."""
    prof = DensityProfile(grid, rho, rho_min)
    L = grid.integrate(prof.rho * np.sum(prof.hess_log ** 2, axis=(0, 1)))
    gq = grid.gradient(prof.quarter)
    r1 = grid.integrate(np.sum(gq * gq, axis=0) ** 2) / 8.0
    r2 = grid.integrate(np.sum(grid.hessian(prof.sqrt) ** 2, axis=(0, 1))) / 7.0
    return L - r1, L - r2


def jungel_reports(samples=10_000, seed=0, d=1, n=64, tolerance=1e-9):
    grid = make_grid(d, n, False)
    rng = np.random.default_rng(seed)
    worst = [np.inf, np.inf]
    witness = [None, None]
    for _ in range(samples):
        lo = rng.uniform(0.3, 1.5)
        rho = random_field(grid, rng, lo, rng.uniform(lo, 3.0))
        for k, m in enumerate(jungel_margins(grid, rho)):
            if m < worst[k]:
                worst[k], witness[k] = m, rho
    return [LemmaReport(name, samples, float(w), tolerance, seed, wit, f"d={d} n={n} rho in [0.3, 3]")
            for name, w, wit in zip(("jungel_1_8", "jungel_1_7"), worst, witness)]


# -- identities ----------------------------------------------------------------------

def _l2(grid, f):
    return np.sqrt(grid.integrate(np.sum(np.reshape(f, (-1,) + grid.shape) ** 2, axis=0)))


def delta_rho_residual(grid, rho, rho_min=RHO_MIN):
    """Relative L2 size of ``lap rho - 8 sqrt(rho) |grad rho^(1/4)|^2 - 2 sqrt(rho) lap sqrt(rho)``."""
    prof = DensityProfile(grid, rho, rho_min)
    lap = grid.laplacian(prof.rho)
    gq = grid.gradient(prof.quarter)
    res = lap - 8.0 * prof.sqrt * np.sum(gq * gq, axis=0) - 2.0 * prof.sqrt * grid.laplacian(prof.sqrt)
    scale = _l2(grid, lap)
    return float(_l2(grid, res) / scale) if scale > 0 else float(_l2(grid, res))


def grad_identity_residual(grid, rho, rho_min=RHO_MIN):
    """``|L - R| / (1 + |R|)`` for
    ``L = int lap sqrt(rho) (4 |grad rho^(1/4)|^2 + lap sqrt(rho))`` and
    ``R = int |grad^2 sqrt(rho) - 4 grad rho^(1/4) (x) grad rho^(1/4)|^2``."""
    prof = DensityProfile(grid, rho, rho_min)
    ls = grid.laplacian(prof.sqrt)
    gq = grid.gradient(prof.quarter)
    L = grid.integrate(ls * (4.0 * np.sum(gq * gq, axis=0) + ls))
    T = grid.hessian(prof.sqrt) - 4.0 * gq[:, None] * gq[None, :]
    R = grid.integrate(np.sum(T * T, axis=(0, 1)))
    return abs(L - R) / (1.0 + abs(R))


def bohm_residual(grid, rho, rho_min=RHO_MIN):
    """Largest pairwise relative L2 discrepancy among the three Korteweg forms."""
    from .korteweg import bohm_intermediate, korteweg_div_form_a, korteweg_div_form_b

    prof = DensityProfile(grid, rho, rho_min)
    forms = [f(grid, prof) for f in (korteweg_div_form_a, korteweg_div_form_b, bohm_intermediate)]
    scale = max(_l2(grid, f) for f in forms)
    if scale == 0:
        return 0.0
    return max(_l2(grid, forms[i] - forms[j]) for i in range(3) for j in range(i + 1, 3)) / scale


def energy_derivative_residual(cfg, state):
    """Normalized ``|dE/dt + int rho S(Du):Du|`` where ``dE/dt`` is the
    directional derivative of the discrete energy along the semi-discrete
    right-hand side.  The identity requires ``eps = nu = 0``."""
    from .dynamics import continuity_rhs, momentum_rhs

    if cfg.eps or cfg.nu:
        raise ConfigError("identity holds only for eps = nu = 0")
    g = state.grid
    prof = DensityProfile(g, state.rho, cfg.rho_min)
    rho = prof.rho
    u_raw = state.m / rho
    dE_drho = -0.5 * np.sum(u_raw ** 2, axis=0) + cfg.pressure.dH(rho)
    if cfg.kappa:
        dE_drho = dE_drho - 2.0 * cfg.kappa * g.laplacian(prof.sqrt) / prof.sqrt
    drho = continuity_rhs(state, cfg)
    dm = momentum_rhs(state, cfg)
    p_rho = dE_drho * drho
    p_m = np.sum(u_raw * dm, axis=0)
    dEdt = g.integrate(p_rho + p_m)
    u = g.project(u_raw)
    diss = g.integrate(rho * cfg.stress.dissipation(g.sym_gradient(u)))
    scale = g.integrate(np.abs(p_rho)) + g.integrate(np.abs(p_m)) + abs(diss)
    return abs(dEdt + diss) / scale if scale > 0 else abs(dEdt + diss)


# -- suite -----------------------------------------------------------------------------

def run_lemma_suite(samples=10_000, seed=0):
    """All sampling oracles; returns one :class:`LemmaReport` per lemma."""
    reports = [cq_report(samples, seed)]
    reports += jungel_reports(samples, seed)
    reports.append(pressure_report(samples, seed))
    reports.append(poincare_report(samples, seed))
    return reports


__all__ = [
    "LemmaReport", "cq_constant", "check_monotonicity_bound", "poincare_margin",
    "poincare_ratio", "poincare_calibrate", "pressure_ratio", "pressure_bound_constant",
    "jungel_margins", "delta_rho_residual", "grad_identity_residual", "bohm_residual",
    "energy_derivative_residual", "run_lemma_suite",
]

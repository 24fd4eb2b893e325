"""Right-hand side and explicit time integration of the regularized system

    d_t rho + div(m)       = eps lap(rho)
    d_t m   + div(m (x) u) = div(rho S(Du)) - grad p(rho) + kappa div(rho grad^2 ln rho)
                             - eps (grad rho . grad) u + nu div(|Du|^(q-2) Du)

with ``m = rho u`` on the periodic unit torus.  Setting ``eps = nu = 0`` gives
the Navier-Stokes-Korteweg system itself.  Spatial discretization is a
collocation Fourier method; with ``dealias`` enabled the state is kept in the
span of the modes ``|k_j| <= n/3`` (2/3 rule), which is the discrete
counterpart of a Galerkin truncation.
"""
import logging
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .constitutive import PressureLaw, StressModel, frobenius
from .errors import BlowUpError, ConfigError, NonFiniteFieldError, StepRejected, VacuumError
from .fields import TWO_PI, make_grid, random_field
from .korteweg import RHO_MIN, check_floor, korteweg_div_form_b

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4", "ssprk3")
PROFILES = ("constant", "sine", "random")


@dataclass(frozen=True, eq=False)
class State:
    """Density and momentum at time ``t``; ``m`` has shape ``(d,) + grid.shape``."""

    grid: object
    rho: np.ndarray
    m: np.ndarray
    t: float = 0.0

    def velocity(self, rho_min=RHO_MIN):
        return self.m / np.maximum(self.rho, rho_min)

    @property
    def mass(self):
        return self.grid.integrate(self.rho)


@dataclass(frozen=True)
class InitialCondition:
    """Named initial profiles.

    ``constant``: rho = rho_mean, u = 0.
    ``sine``: rho = rho_mean + rho_amp * prod_j sin(2 pi x_j),
    u_j = u_amp * sin(2 pi x_j).
    ``random``: seeded band-limited fields (``modes`` lowest modes) with
    rho in [rho_mean (1 - rho_amp), rho_mean (1 + rho_amp)] and each u_j in
    [-u_amp, u_amp].
    """

    profile: str = "sine"
    rho_mean: float = 1.0
    rho_amp: float = 0.3
    u_amp: float = 0.1
    modes: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown initial profile {self.profile!r}")
        if not self.rho_mean > 0:
            raise ConfigError("rho_mean must be positive")

    def fields(self, grid):
        """Return ``(rho, u)`` sampled on ``grid``."""
        d = grid.d
        if self.profile == "constant":
            return np.full(grid.shape, self.rho_mean), np.zeros((d,) + grid.shape)
        if self.profile == "sine":
            s = [np.sin(TWO_PI * x) for x in grid.x]
            rho = self.rho_mean + self.rho_amp * np.prod(s, axis=0)
            return rho, self.u_amp * np.stack(s)
        rng = np.random.default_rng(self.seed)
        lo, hi = self.rho_mean * (1 - self.rho_amp), self.rho_mean * (1 + self.rho_amp)
        rho = random_field(grid, rng, lo, hi, max_mode=self.modes)
        u = np.stack([random_field(grid, rng, -self.u_amp, self.u_amp, max_mode=self.modes)
                      for _ in range(d)])
        return rho, u


def state_from_fields(grid, rho, u, t=0.0, rho_min=RHO_MIN):
    """Build a :class:`State` with ``m = rho u``; momentum is zeroed where
    ``rho < rho_min``."""
    rho = np.asarray(rho, dtype=float)
    m = np.where(rho >= rho_min, rho * np.asarray(u, dtype=float), 0.0)
    if grid.dealias:
        rho, m = grid.truncate(rho), grid.truncate(m)
    return State(grid, rho, m, t)


def perturbation(grid):
    """Fixed zero-mean low-mode velocity perturbation
    ``w_j = cos(2 pi x_j) + 0.5 sin(4 pi x_j)``."""
    return np.stack([np.cos(TWO_PI * x) + 0.5 * np.sin(2 * TWO_PI * x) for x in grid.x])


@dataclass(frozen=True)
class SimConfig:
    d: int = 1
    n: int = 64
    kappa: float = 0.0
    eps: float = 0.0
    nu: float = 0.0
    q: float = 4.0
    stress: StressModel = field(default_factory=StressModel)
    pressure: PressureLaw = field(default_factory=PressureLaw)
    dt: float = 1e-4
    t_end: float = 0.1
    rho_min: float = RHO_MIN
    output_every: int = 10
    ic: InitialCondition = field(default_factory=InitialCondition)
    integrator: str = "rk4"
    dealias: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("kappa", "eps", "nu"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        p = self.stress.growth_exponent
        if self.nu > 0 and not self.q > max(3.0, 1.5 * p):
            raise ConfigError(
                f"q = {self.q} violates q > max(3, 3p/2) = {max(3.0, 1.5 * p)} required when nu > 0")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        if not self.rho_min > 0:
            raise ConfigError("rho_min must be positive")
        if self.output_every < 1:
            raise ConfigError("output_every must be >= 1")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"integrator must be one of {INTEGRATORS}")
        try:
            make_grid(self.d, self.n, self.dealias)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def grid(self):
        return make_grid(self.d, self.n, self.dealias)

    @property
    def n_steps(self):
        k = self.t_end / self.dt
        if abs(k - round(k)) > 1e-8 * max(1.0, k):
            raise ConfigError("t_end must be an integer multiple of dt")
        return int(round(k))

    def initial_state(self):
        rho, u = self.ic.fields(self.grid)
        return state_from_fields(self.grid, rho, u, 0.0, self.rho_min)


# -- right-hand side -------------------------------------------------------

def _velocity(state, cfg):
    rho = check_floor(state.rho, cfg.rho_min)
    return rho, state.grid.project(state.m / rho)


def continuity_rhs(state, cfg):
    """``-div(m) + eps lap(rho)``; its mean is exactly zero."""
    g = state.grid
    check_floor(state.rho, cfg.rho_min)
    out = -g.divergence(state.m)
    if cfg.eps:
        out = out + cfg.eps * g.laplacian(state.rho)
    return out


def momentum_rhs(state, cfg):
    g = state.grid
    rho, u = _velocity(state, cfg)
    G = g.jacobian(u)
    D = 0.5 * (G + np.swapaxes(G, 0, 1))
    # (m (x) u)[i, j] = u_i m_j
    T = rho * cfg.stress.apply(D) - u[:, None] * state.m[None, :]
    if cfg.nu:
        T = T + cfg.nu * np.power(frobenius(D), cfg.q - 2.0) * D
    try:
        out = g.tensor_divergence(T) - g.gradient(cfg.pressure.p(rho))
    except NonFiniteFieldError:
        raise BlowUpError(f"blow-up detected at t={state.t:.6g}") from None
    if cfg.kappa:
        out = out + cfg.kappa * korteweg_div_form_b(g, rho, cfg.rho_min)
    if cfg.eps:
        out = out - cfg.eps * np.einsum("j...,ij...->i...", g.gradient(rho), G)
    out = g.project(out)
    if not np.all(np.isfinite(out)):
        raise BlowUpError(f"blow-up detected at t={state.t:.6g}")
    return out


def rhs(state, cfg):
    return continuity_rhs(state, cfg), momentum_rhs(state, cfg)


# -- time stepping -----------------------------------------------------------

def _combine(state, terms, t):
    rho = sum(c * r for c, (r, _) in terms)
    m = sum(c * mm for c, (_, mm) in terms)
    return State(state.grid, rho, m, t)


def _rk4(state, cfg):
    dt, t = cfg.dt, state.t
    s0 = (state.rho, state.m)
    k1 = rhs(state, cfg)
    k2 = rhs(_combine(state, [(1, s0), (dt / 2, k1)], t + dt / 2), cfg)
    k3 = rhs(_combine(state, [(1, s0), (dt / 2, k2)], t + dt / 2), cfg)
    k4 = rhs(_combine(state, [(1, s0), (dt, k3)], t + dt), cfg)
    return _combine(state, [(1, s0), (dt / 6, k1), (dt / 3, k2), (dt / 3, k3), (dt / 6, k4)], t + dt)


def _ssprk3(state, cfg):
    dt, t = cfg.dt, state.t
    s0 = (state.rho, state.m)
    s1 = _combine(state, [(1, s0), (dt, rhs(state, cfg))], t + dt)
    k = rhs(s1, cfg)
    s2 = _combine(state, [(0.75, s0), (0.25, (s1.rho, s1.m)), (0.25 * dt, k)], t + dt / 2)
    k = rhs(s2, cfg)
    return _combine(state, [(1 / 3, s0), (2 / 3, (s2.rho, s2.m)), (2 / 3 * dt, k)], t + dt)


def step(state, cfg):
    """Advance one explicit Runge-Kutta step.

    Raises :class:`StepRejected` if the new state is non-finite, has
    negative density beyond round-off, or falls below the density floor.
    """
    advance = _rk4 if cfg.integrator == "rk4" else _ssprk3
    try:
        new = advance(state, cfg)
    except (VacuumError, NonFiniteFieldError) as exc:
        raise StepRejected(f"step rejected at t={state.t:.6g}: {exc}") from exc
    if not (np.all(np.isfinite(new.rho)) and np.all(np.isfinite(new.m))):
        raise BlowUpError(f"step rejected: blow-up detected at t={new.t:.6g}")
    rmin = new.rho.min()
    if rmin < -1e-12:
        raise StepRejected(f"step rejected: negative density {rmin:.3e} at t={new.t:.6g}")
    if rmin < cfg.rho_min:
        raise StepRejected(f"step rejected: density {rmin:.3e} below floor at t={new.t:.6g}")
    return new


def stable_dt(cfg, state):
    """Advisory RK4 step bound from a spectral-radius estimate.

    Combines acoustic/advective ``K (|u| + c_s)``, dispersive
    ``sqrt(kappa) K^2`` and diffusive ``K^2 (eps + viscosity)`` rates at the
    largest retained wavenumber ``K``.
    """
    g = state.grid
    K = TWO_PI * (g.n / 3 if g.dealias else g.n / 2)
    rho = np.maximum(state.rho, cfg.rho_min)
    u = state.m / rho
    D = g.sym_gradient(u)
    s = frobenius(D)
    umax = np.sqrt(np.max(np.sum(u * u, axis=0)))
    cs = np.sqrt(np.max(cfg.pressure.dp(rho)))
    visc = np.max(cfg.stress.phi(s)) if cfg.stress.kind != "power_law" else np.max(s) ** max(cfg.stress.p - 2, 0)
    if cfg.nu:
        visc += cfg.nu * (cfg.q - 1) * np.max(s) ** (cfg.q - 2)
    rate = K * (umax + cs) + np.sqrt(cfg.kappa) * K * K + K * K * (cfg.eps + visc)
    return 2.8 / rate


# -- trajectories --------------------------------------------------------------

@dataclass
class Trajectory:
    """Snapshots at the output cadence plus one diagnostics record per step."""

    config: SimConfig
    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)
    status: str = "completed"
    message: str = ""
    snapshot_index: list = field(default_factory=lambda: [0])

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    @property
    def record_times(self):
        return np.array([r.t for r in self.records])

    @property
    def output_records(self):
        """Diagnostics records at the snapshot times."""
        return [self.records[k] for k in self.snapshot_index]

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def completed(self):
        return self.status == "completed"


def run(cfg, initial=None):
    """Integrate from ``initial`` (default: the configured profile) to
    ``t_end``. Step rejections end the run early with ``status='rejected'``;
    the last good state is always the final snapshot."""
    from .entropy import diagnostics

    state = cfg.initial_state() if initial is None else initial
    t0 = state.t
    if (state.grid.d, state.grid.n) != (cfg.d, cfg.n):
        raise ConfigError("initial state grid does not match the configuration")
    dt_max = stable_dt(cfg, state)
    if cfg.dt > dt_max:
        log.warning("dt=%g exceeds advisory stability bound %.3g", cfg.dt, dt_max)
    traj = Trajectory(cfg, [state], [diagnostics(state, cfg)])
    nsteps = cfg.n_steps
    for k in range(1, nsteps + 1):
        try:
            new = step(state, cfg)
        except StepRejected as exc:
            traj.status, traj.message = "rejected", str(exc)
            log.error("%s", exc)
            if traj.snapshots[-1] is not state:
                traj.snapshots.append(state)
                traj.snapshot_index.append(k - 1)
            return traj
        state = replace(new, t=t0 + k * cfg.dt)
        traj.records.append(diagnostics(state, cfg))
        if k % cfg.output_every == 0 or k == nsteps:
            traj.snapshots.append(state)
            traj.snapshot_index.append(k)
    return traj


# -- checkpoints -----------------------------------------------------------------

MAGIC = b"NSKW1"
_HEADER = struct.Struct("<qqdddddddd")


def write_checkpoint(path, state, cfg):
    """Binary checkpoint: ``b"NSKW1"``, then little-endian int64 ``d, n`` and
    float64 ``t, kappa, eps, nu, q, gamma, a_p, rho_bar``, then ``rho`` and
    each momentum component as row-major little-endian float64."""
    g = state.grid
    head = _HEADER.pack(g.d, g.n, state.t, cfg.kappa, cfg.eps, cfg.nu, cfg.q,
                        cfg.pressure.gamma, cfg.pressure.a_p, cfg.pressure.rho_bar)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(head)
        fh.write(np.ascontiguousarray(state.rho, dtype="<f8").tobytes())
        for comp in state.m:
            fh.write(np.ascontiguousarray(comp, dtype="<f8").tobytes())


def read_checkpoint(path, dealias=True):
    """Inverse of :func:`write_checkpoint`; returns ``(state, header)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not an NSKW1 checkpoint")
    off = len(MAGIC)
    d, n, t, kappa, eps, nu, q, gamma, a_p, rho_bar = _HEADER.unpack_from(blob, off)
    off += _HEADER.size
    grid = make_grid(d, n, dealias)
    data = np.frombuffer(blob, dtype="<f8", offset=off).astype(float)
    if data.size != (d + 1) * grid.size:
        raise ValueError(f"{path}: truncated checkpoint")
    rho = data[:grid.size].reshape(grid.shape)
    m = data[grid.size:].reshape((d,) + grid.shape)
    header = dict(d=d, n=n, t=t, kappa=kappa, eps=eps, nu=nu, q=q,
                  gamma=gamma, a_p=a_p, rho_bar=rho_bar)
    return State(grid, rho, m, t), header

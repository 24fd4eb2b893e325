"""Capillarity (Korteweg) force for the quantum case K(rho) = 1/rho.

Three algebraically equivalent forms are provided,

    div(rho grad^2 ln rho)                       (form a)
  = rho grad(lap(rho)/rho - |grad rho|^2/(2 rho^2))   (intermediate)
  = 2 rho grad(lap(sqrt rho) / sqrt rho)         (form b, used by the solver)

together with the divergence of the general Korteweg tensor for an arbitrary
capillarity coefficient ``K(rho)``, which reduces to the above for
``K = 1/rho``.  Numerically the forms differ only by aliasing and truncation
errors, so their mutual agreement is a resolution diagnostic.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import VacuumError

RHO_MIN = 1e-8


def check_floor(rho, rho_min=RHO_MIN):
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)):
        raise VacuumError("non-finite density")
    if rho.min() < rho_min:
        raise VacuumError(f"vacuum region: min density {rho.min():.3e} < floor {rho_min:.1e}")
    return rho


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """A density field with its derived quantities computed on demand.

    Raises :class:`VacuumError` on construction if any sample lies below
    ``rho_min``; there is no silent clamping.
    """

    grid: object
    rho: np.ndarray
    rho_min: float = RHO_MIN

    def __post_init__(self):
        check_floor(self.rho, self.rho_min)

    @cached_property
    def sqrt(self):
        return np.sqrt(self.rho)

    @cached_property
    def quarter(self):
        return np.power(self.rho, 0.25)

    @cached_property
    def log(self):
        return np.log(self.rho)

    @cached_property
    def grad_log(self):
        # 2 grad(sqrt rho)/sqrt rho: only differentiates the energy-controlled sqrt rho
        return 2.0 * self.grid.gradient(self.sqrt) / self.sqrt

    @cached_property
    def hess_log(self):
        return self.grid.hessian(self.log)


def _profile(grid, rho, rho_min):
    if isinstance(rho, DensityProfile):
        return rho
    return DensityProfile(grid, np.asarray(rho, dtype=float), rho_min)


def korteweg_div_form_a(grid, rho, rho_min=RHO_MIN):
    """``div(rho grad^2 ln rho)``."""
    prof = _profile(grid, rho, rho_min)
    T = grid.project(prof.rho * prof.hess_log)
    return grid.tensor_divergence(T)


def korteweg_div_form_b(grid, rho, rho_min=RHO_MIN):
    """``2 rho grad(lap(sqrt rho) / sqrt rho)``."""
    prof = _profile(grid, rho, rho_min)
    s = prof.sqrt
    if grid.dealias:
        s = grid.truncate(s)
    bohm = grid.project(grid.laplacian(s) / s)
    return grid.project(2.0 * prof.rho * grid.gradient(bohm))


def bohm_intermediate(grid, rho, rho_min=RHO_MIN):
    """``rho grad(lap(rho)/rho - |grad rho|^2 / (2 rho^2))``."""
    prof = _profile(grid, rho, rho_min)
    r = prof.rho
    g = grid.gradient(r)
    inner = grid.laplacian(r) / r - 0.5 * np.sum(g * g, axis=0) / (r * r)
    return grid.project(r * grid.gradient(grid.project(inner)))


def korteweg_div_general(grid, rho, K, dK, rho_min=RHO_MIN):
    """Divergence of the general Korteweg tensor

        (rho div(K grad rho) + (K - rho K')/2 |grad rho|^2) I - K grad rho (x) grad rho

    ``K`` and ``dK`` are callables evaluated pointwise on ``rho``.
    """
    prof = _profile(grid, rho, rho_min)
    r = prof.rho
    k, dk = np.broadcast_to(K(r), r.shape), np.broadcast_to(dK(r), r.shape)
    g = grid.gradient(r)
    iso = r * grid.divergence(grid.project(k * g)) + 0.5 * (k - r * dk) * np.sum(g * g, axis=0)
    T = -k * g[:, None] * g[None, :]
    for i in range(grid.d):
        T[i, i] += iso
    return grid.tensor_divergence(grid.project(T))

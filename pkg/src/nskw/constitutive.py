"""Viscous stress laws, gamma-law pressure and the pressure potential H.

Every stress law here is radial: ``S(A) = phi(|A|) A`` with the Frobenius
norm ``|A|``.  The pressure is ``p(rho) = a_p rho**gamma`` and the potential
energy density is

    H(rho) = rho * int_{rho_bar}^{rho} p(s) / s**2 ds
           = a_p (rho**gamma - rho rho_bar**(gamma - 1)) / (gamma - 1),

so that ``H''(rho) = p'(rho) / rho``.
"""
from dataclasses import dataclass, field

import numpy as np

STRESS_KINDS = ("newtonian", "power_law", "bingham", "composite", "inviscid")


def frobenius(A):
    """Frobenius norm over the two leading (matrix) axes."""
    return np.sqrt(np.sum(np.asarray(A) ** 2, axis=(0, 1)))


@dataclass(frozen=True)
class StressModel:
    """Constitutive law for the viscous stress.

    ``newtonian``   S(A) = mu A                            (p = 2)
    ``power_law``   S(A) = |A|^(p-2) A,  p > 1             (p = p)
    ``bingham``     S(A) = A / (delta + |A|)               (p = 1)
    ``composite``   S(A) = mu0 A + mu1 A / (delta + |A|)   (p = 2)
    ``inviscid``    S(A) = 0, the conservative limit; not coercive
    """

    kind: str = "newtonian"
    mu: float = 1.0
    p: float = 2.0
    delta: float = 1.0
    mu0: float = 1.0
    mu1: float = 1.0

    def __post_init__(self):
        if self.kind not in STRESS_KINDS:
            raise ValueError(f"unknown stress kind {self.kind!r}")
        if self.kind == "newtonian" and not self.mu > 0:
            raise ValueError("newtonian stress requires mu > 0")
        if self.kind == "power_law" and not self.p > 1:
            raise ValueError("power-law stress requires p > 1")
        if self.kind in ("bingham", "composite") and not self.delta > 0:
            raise ValueError(f"{self.kind} stress requires delta > 0")
        if self.kind == "composite" and not (self.mu0 > 0 and self.mu1 > 0):
            raise ValueError("composite stress requires mu0 > 0 and mu1 > 0")

    @property
    def growth_exponent(self):
        return {"newtonian": 2.0, "power_law": self.p, "bingham": 1.0,
                "composite": 2.0, "inviscid": 2.0}[self.kind]

    def phi(self, s):
        """Scalar factor with ``S(A) = phi(|A|) A``; finite at ``s = 0``
        except for power laws with p < 2, where ``phi(s) * s`` -> 0."""
        s = np.asarray(s, dtype=float)
        if self.kind == "newtonian":
            return np.full_like(s, self.mu)
        if self.kind == "inviscid":
            return np.zeros_like(s)
        if self.kind == "power_law":
            # phi(0) is irrelevant since S(0) = 0; pick 0 to avoid 0**negative
            safe = np.where(s > 0, s, 1.0)
            return np.where(s > 0, np.power(safe, self.p - 2.0), 0.0)
        if self.kind == "bingham":
            return 1.0 / (self.delta + s)
        return self.mu0 + self.mu1 / (self.delta + s)

    def apply(self, A):
        """Stress of a tensor field or stack, matrix axes first."""
        A = np.asarray(A, dtype=float)
        return self.phi(frobenius(A)) * A

    def dissipation(self, A):
        """Pointwise ``S(A):A`` for matrix axes first."""
        A = np.asarray(A, dtype=float)
        s = frobenius(A)
        return self.phi(s) * s * s

    def growth_bound(self):
        """Supremum of ``|S(A)| / |A|^(p-1)`` over nonzero ``A``."""
        if self.kind == "newtonian":
            return self.mu
        if self.kind in ("power_law", "bingham"):
            return 1.0
        if self.kind == "inviscid":
            return 0.0
        return self.mu0 + self.mu1 / self.delta


@dataclass(frozen=True)
class PressureLaw:
    """gamma-law pressure ``p(rho) = a_p rho**gamma`` with reference density
    ``rho_bar`` used by the potential ``H``."""

    a_p: float = 1.0
    gamma: float = 2.0
    rho_bar: float = 1.0

    def __post_init__(self):
        if not self.a_p > 0:
            raise ValueError("pressure coefficient a_p must be positive")
        if not self.gamma > 1:
            raise ValueError("adiabatic exponent must satisfy gamma > 1")
        if not self.rho_bar > 0:
            raise ValueError("reference density rho_bar must be positive")

    def p(self, rho):
        return self.a_p * np.power(rho, self.gamma)

    def dp(self, rho):
        return self.a_p * self.gamma * np.power(rho, self.gamma - 1.0)

    def d2p(self, rho):
        g = self.gamma
        return self.a_p * g * (g - 1.0) * np.power(rho, g - 2.0)

    def H(self, rho):
        g = self.gamma
        return self.a_p * (np.power(rho, g) - rho * self.rho_bar ** (g - 1.0)) / (g - 1.0)

    def dH(self, rho):
        g = self.gamma
        return self.a_p * (g * np.power(rho, g - 1.0) - self.rho_bar ** (g - 1.0)) / (g - 1.0)

    def d2H(self, rho):
        return self.a_p * self.gamma * np.power(rho, self.gamma - 2.0)

    def _taylor_rest(self, rho, r):
        # rho^g - r^g - g r^(g-1) (rho - r) = r^g phi(rho/r), phi(x) = x^g - 1 - g (x - 1);
        # the rho_bar terms of H cancel exactly, so evaluate the remainder directly
        g = self.gamma
        rho, r = np.asarray(rho, dtype=float), np.asarray(r, dtype=float)
        dx = rho / r - 1.0
        with np.errstate(divide="ignore"):
            phi = np.expm1(g * np.log1p(dx)) - g * dx
        return self.a_p * np.power(r, g) * phi

    def H_rel(self, rho, r):
        """``H(rho) - H(r) - H'(r)(rho - r)``, equal to ``p_rel / (gamma - 1)``."""
        return self._taylor_rest(rho, r) / (self.gamma - 1.0)

    def p_rel(self, rho, r):
        """``p(rho) - p(r) - p'(r)(rho - r)``."""
        return self._taylor_rest(rho, r)

    def band_constants(self):
        """Constants ``(a, b)`` with ``a rho^(g-1) - b <= p'(rho) <= rho^(g-1)/a + b``.

        For the pure power law ``b = 0`` already works, so any ``b > 0`` does.
        """
        c = self.a_p * self.gamma
        return min(c, 1.0 / c), 0.0


# -- single-matrix API ---------------------------------------------------

def _as_symmetric(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14):
        raise ValueError("stress argument must be a symmetric matrix")
    return A


def stress(model, A):
    """``S(A)`` for one symmetric matrix."""
    A = _as_symmetric(A)
    return model.phi(np.linalg.norm(A)) * A


def stress_dissipation(model, A):
    """``S(A):A`` for one symmetric matrix."""
    A = _as_symmetric(A)
    s = np.linalg.norm(A)
    return float(model.phi(s) * s * s)


def _check_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("negative density")
    return rho


def _check_reference(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("reference density must be positive")
    return r


def pressure(law, rho):
    return law.p(_check_density(rho))


def pressure_prime(law, rho):
    return law.dp(_check_density(rho))


def entropy_H(law, rho):
    return law.H(_check_density(rho))


def entropy_H_prime(law, rho):
    return law.dH(_check_density(rho))


def entropy_H_relative(law, rho, r):
    return law.H_rel(_check_density(rho), _check_reference(r))


# -- randomized verification of the structural assumptions --------------

@dataclass
class AssumptionReport:
    """Outcome of :func:`verify_assumptions`.

    Margins are normalized so the tolerance is scale-free:
    monotonicity uses ``(S(A)-S(B)):(A-B) / (1 + (|S(A)|+|S(B)|)|A-B|)``.
    """

    model: StressModel
    samples: int
    growth_constant: float
    coercivity_constant: float
    coercivity_threshold: float
    worst_monotonicity: float
    worst_dissipation: float
    violations: int
    witness: tuple = None
    passed: bool = field(default=True)


def _random_sym(rng, count, d):
    M = rng.standard_normal((count, d, d))
    M = 0.5 * (M + np.swapaxes(M, 1, 2))
    scale = 10.0 ** rng.uniform(-3, 3, size=count)
    return M * scale[:, None, None]


def verify_assumptions(model, samples=10_000, tolerance=1e-12, d=2, seed=0):
    """Randomized check of the growth bound, coercivity and monotonicity.

    Matrices are symmetric Gaussian with log-uniform magnitudes over six
    decades. The coercivity threshold ``c1`` is taken as the 10th percentile
    of sampled norms, and ``c`` is the smallest ``S(A):A / |A|^p`` above it.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    A = _random_sym(rng, samples, d)
    B = _random_sym(rng, samples, d)
    # matrix axes first for the vectorized model methods
    At, Bt = np.moveaxis(A, 0, -1), np.moveaxis(B, 0, -1)
    SA, SB = model.apply(At), model.apply(Bt)
    nA = frobenius(At)
    p = model.growth_exponent

    growth = frobenius(SA) / np.power(nA, p - 1.0)
    C = max(float(growth.max()), model.growth_bound())

    c1 = float(np.quantile(nA, 0.1))
    above = nA > c1
    diss = model.dissipation(At)
    c = float(np.min(diss[above] / np.power(nA[above], p))) if above.any() else np.nan

    dA = At - Bt
    mono = np.sum((SA - SB) * dA, axis=(0, 1))
    scale = 1.0 + (frobenius(SA) + frobenius(SB)) * frobenius(dA)
    mono_n = mono / scale
    worst = int(np.argmin(mono_n))
    bad = mono_n < -tolerance
    diss_n = diss / (1.0 + frobenius(SA) * nA)
    violations = int(bad.sum() + (diss_n < -tolerance).sum())
    witness = (A[worst], B[worst]) if violations else None
    return AssumptionReport(
        model=model, samples=samples, growth_constant=C, coercivity_constant=c,
        coercivity_threshold=c1, worst_monotonicity=float(mono_n[worst]),
        worst_dissipation=float(diss_n.min()), violations=violations,
        witness=witness, passed=violations == 0 and c > 0,
    )

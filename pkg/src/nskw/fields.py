"""Uniform periodic grids on the unit torus and spectral calculus.

Fields are plain numpy arrays whose trailing ``d`` axes are the spatial
axes of a :class:`Grid`:

* scalar field: shape ``(n,) * d``
* vector field: shape ``(d,) + (n,) * d``, component ``i`` in ``w[i]``
* tensor field: shape ``(d, d) + (n,) * d``, entry ``(i, j)`` in ``T[i, j]``

Index conventions follow the usual row/column rule: the gradient of a
vector field is ``(grad u)[i, j] = d_j u_i`` and the divergence of a tensor
acts on rows, ``(div T)[i] = sum_j d_j T[i, j]``.

All operations are pure; inputs are never modified.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import NonFiniteFieldError

TWO_PI = 2.0 * np.pi


def _check_finite(f):
    if not np.all(np.isfinite(f)):
        raise NonFiniteFieldError()


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` points per axis on ``[0, 1)^d``.

    Parameters
    ----------
    d : int
        Spatial dimension, 1 or 2.
    n : int
        Points per axis; a power of two, at least 8.
    dealias : bool
        Whether nonlinear products are truncated by the 2/3 rule
        (see :meth:`project`).
    """

    d: int
    n: int
    dealias: bool = True

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        n = self.n
        if n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {n}")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n ** self.d

    @property
    def axes(self):
        return tuple(range(-self.d, 0))

    @cached_property
    def x(self):
        """Coordinate arrays, one per axis, each of shape :attr:`shape`."""
        pts = np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([pts] * self.d), indexing="ij"))

    @cached_property
    def _k(self):
        # integer wavenumbers per axis, broadcastable to the rfftn layout
        ks = []
        for j in range(self.d):
            if j == self.d - 1:
                k = np.fft.rfftfreq(self.n) * self.n
            else:
                k = np.fft.fftfreq(self.n) * self.n
            shape = [1] * self.d
            shape[j] = k.size
            ks.append(np.round(k).reshape(shape))
        return ks

    @cached_property
    def _ik(self):
        # 2*pi*i*k with the Nyquist mode removed so odd derivatives stay real
        out = []
        for k in self._k:
            kk = np.where(np.abs(k) == self.n // 2, 0.0, k)
            out.append(1j * TWO_PI * kk)
        return out

    @cached_property
    def _lap(self):
        return sum(ik * ik for ik in self._ik).real

    @cached_property
    def _keep(self):
        cut = self.n / 3.0
        mask = np.ones(self._spectral_shape, dtype=bool)
        for k in self._k:
            mask = mask & (np.abs(k) <= cut)
        return mask

    @property
    def _spectral_shape(self):
        return (self.n,) * (self.d - 1) + (self.n // 2 + 1,)

    # -- transforms ------------------------------------------------------
    def fft(self, f):
        return np.fft.rfftn(f, axes=self.axes)

    def ifft(self, F):
        return np.fft.irfftn(F, s=self.shape, axes=self.axes)

    # -- differential operators -----------------------------------------
    def derivative(self, f, axis):
        """Spectral derivative of a scalar field along ``axis``."""
        if not 0 <= axis < self.d:
            raise ValueError(f"axis {axis} out of range for d={self.d}")
        f = np.asarray(f, dtype=float)
        _check_finite(f)
        return self.ifft(self._ik[axis] * self.fft(f))

    def gradient(self, f):
        f = np.asarray(f, dtype=float)
        _check_finite(f)
        F = self.fft(f)
        return np.stack([self.ifft(ik * F) for ik in self._ik])

    def divergence(self, w):
        w = np.asarray(w, dtype=float)
        _check_finite(w)
        W = self.fft(w)
        return self.ifft(sum(self._ik[j] * W[j] for j in range(self.d)))

    def laplacian(self, f):
        f = np.asarray(f, dtype=float)
        _check_finite(f)
        return self.ifft(self._lap * self.fft(f))

    def hessian(self, f):
        f = np.asarray(f, dtype=float)
        _check_finite(f)
        F = self.fft(f)
        d = self.d
        out = np.empty((d, d) + self.shape)
        for i in range(d):
            for j in range(i, d):
                out[i, j] = self.ifft(self._ik[i] * self._ik[j] * F)
                out[j, i] = out[i, j]
        return out

    def jacobian(self, u):
        """``(grad u)[i, j] = d_j u_i`` for a vector field ``u``."""
        u = np.asarray(u, dtype=float)
        _check_finite(u)
        U = self.fft(u)
        return np.stack(
            [np.stack([self.ifft(self._ik[j] * U[i]) for j in range(self.d)])
             for i in range(self.d)]
        )

    def sym_gradient(self, u):
        G = self.jacobian(u)
        return 0.5 * (G + np.swapaxes(G, 0, 1))

    def tensor_divergence(self, T):
        T = np.asarray(T, dtype=float)
        _check_finite(T)
        Tf = self.fft(T)
        return np.stack(
            [self.ifft(sum(self._ik[j] * Tf[i, j] for j in range(self.d)))
             for i in range(self.d)]
        )

    # -- quadrature and filtering ---------------------------------------
    def integrate(self, f):
        """Integral over the unit torus (sample mean); exact for
        trigonometric polynomials below the Nyquist mode."""
        r = np.mean(f, axis=self.axes)
        return float(r) if np.ndim(r) == 0 else r

    def truncate(self, f):
        """Zero every Fourier mode with ``|k_j| > n/3`` on some axis."""
        f = np.asarray(f, dtype=float)
        return self.ifft(self.fft(f) * self._keep)

    def project(self, f):
        """Apply :meth:`truncate` when the grid dealiases, else identity."""
        return self.truncate(f) if self.dealias else np.asarray(f, dtype=float)

    def resample(self, f, target):
        """Spectral interpolation or truncation of ``f`` onto ``target``.

        Modes representable on both grids are kept (the Nyquist mode of the
        coarser grid is dropped); everything else is zero.
        """
        if target.d != self.d:
            raise ValueError("grids differ in dimension")
        f = np.asarray(f, dtype=float)
        lead = f.shape[: f.ndim - self.d]
        F = np.fft.fftn(f, axes=self.axes) / self.size
        m = min(self.n, target.n) // 2
        keep = np.r_[0:m, -m + 1:0]
        G = np.zeros(lead + target.shape, dtype=complex)
        idx = np.ix_(*([keep] * self.d))
        G[(Ellipsis,) + idx] = F[(Ellipsis,) + idx]
        return np.fft.ifftn(G * target.size, axes=target.axes).real


@lru_cache(maxsize=None)
def make_grid(d, n, dealias=True):
    """Cached :class:`Grid` constructor; grids are immutable so sharing is safe."""
    return Grid(d, n, dealias)


def random_field(grid, rng, lo, hi, max_mode=None, decay=2.0):
    """Seeded band-limited random scalar field mapped affinely onto [lo, hi].

    Fourier coefficients with ``max_j |k_j| <= max_mode`` (default ``n // 8``)
    are complex Gaussian with amplitude ``|k|**-decay``; the mean mode is
    zero. The samples are then shifted and scaled so their minimum is ``lo``
    and maximum is ``hi``. The affine map keeps the field band-limited.
    """
    if max_mode is None:
        max_mode = grid.n // 8
    shape = grid._spectral_shape
    kk = np.zeros(shape)
    inside = np.ones(shape, dtype=bool)
    for k in grid._k:
        kk = kk + k * k
        inside = inside & (np.abs(k) <= max_mode)
    amp = np.where(inside & (kk > 0), np.power(np.maximum(kk, 1.0), -decay / 2), 0.0)
    coef = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * amp
    f = grid.ifft(coef)
    span = f.max() - f.min()
    if span == 0.0:
        return np.full(grid.shape, 0.5 * (lo + hi))
    return lo + (hi - lo) * (f - f.min()) / span


def dealias(grid, f):
    """2/3-rule truncation of ``f``; only meaningful on a dealiasing grid."""
    if not grid.dealias:
        raise ValueError("grid is not configured for dealiasing")
    return grid.truncate(f)

"""Uniform periodic grids, complex fields and spectral tools.

Everything here works on plain numpy arrays underneath; :class:`ComplexField`
just ties an array to the grid(s) it is sampled on.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import InvalidArgumentError, InvalidGridError, OutOfDomainError

__all__ = [
    "SpatialGrid",
    "ComplexField",
    "spectral_derivative",
    "derivative_array",
    "interpolate_field",
    "norm_squared",
    "catmull_rom_weights",
    "SpectralPointEvaluator",
]


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic grid ``x_j = x_min + j*dx`` for ``j < n_points``; point n wraps to 0."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise InvalidGridError("grid bounds must be finite")
        if not self.x_max > self.x_min:
            raise InvalidGridError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        n = self.n_points
        if int(n) != n or n < 8 or (int(n) & (int(n) - 1)) != 0:
            raise InvalidGridError(f"n_points must be a power of two >= 8, got {n}")
        object.__setattr__(self, "n_points", int(n))

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        return self.length / self.n_points

    @cached_property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_points)

    @cached_property
    def k(self):
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * sfft.fftfreq(self.n_points, d=self.dx)

    @property
    def k_nyquist(self):
        return np.pi / self.dx

    def contains(self, x):
        return self.x_min <= x < self.x_max

    def check_inside(self, x, what="position"):
        if not (np.isfinite(x) and self.contains(x)):
            raise OutOfDomainError(
                f"{what} {x!r} outside grid extent [{self.x_min}, {self.x_max})"
            )

    def to_dict(self):
        return {"x_min_nm": self.x_min, "x_max_nm": self.x_max, "n_points": self.n_points}


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples on one grid (1D) or a pair of grids (2D, axis order x1, x2)."""

    values: np.ndarray
    grids: tuple

    def __post_init__(self):
        grids = self.grids
        if isinstance(grids, SpatialGrid):
            grids = (grids,)
        grids = tuple(grids)
        values = np.asarray(self.values, dtype=complex)
        shape = tuple(g.n_points for g in grids)
        if values.shape != shape:
            raise InvalidArgumentError(
                f"values shape {values.shape} does not match grid shape {shape}"
            )
        object.__setattr__(self, "grids", grids)
        object.__setattr__(self, "values", values)

    @classmethod
    def on(cls, values, *grids):
        return cls(values, grids)

    @property
    def ndim(self):
        return len(self.grids)

    @property
    def grid(self):
        return self.grids[0]

    @property
    def dV(self):
        return float(np.prod([g.dx for g in self.grids]))

    def with_values(self, values):
        return ComplexField(values, self.grids)

    def __mul__(self, other):
        return self.with_values(self.values * other)

    __rmul__ = __mul__


def derivative_array(values, k, order, axis=-1):
    """n-th derivative of ``values`` along ``axis`` via FFT, multiplication by (ik)^n."""
    if order not in (1, 2, 3, 4):
        raise InvalidArgumentError(f"derivative order must be 1..4, got {order}")
    factor = (1j * k) ** order
    if order % 2 == 1:
        # Nyquist mode has no well-defined odd derivative on a real grid
        factor = factor.copy()
        factor[len(k) // 2] = 0.0
    shape = [1] * np.ndim(values)
    shape[axis] = len(k)
    spec = sfft.fft(values, axis=axis)
    return sfft.ifft(spec * factor.reshape(shape), axis=axis)


def spectral_derivative(f: ComplexField, order: int, axis: int = 0) -> ComplexField:
    """Spectral derivative of a field along one of its axes."""
    if order not in (1, 2, 3, 4):
        raise InvalidArgumentError(f"derivative order must be 1..4, got {order}")
    if not 0 <= axis < f.ndim:
        raise InvalidArgumentError(f"axis {axis} invalid for a {f.ndim}D field")
    return f.with_values(derivative_array(f.values, f.grids[axis].k, order, axis=axis))


def norm_squared(f: ComplexField) -> float:
    """Discrete integral of |f|^2."""
    return float(np.sum(np.abs(f.values) ** 2) * f.dV)


def catmull_rom_weights(t):
    """Weights of nodes (i-1, i, i+1, i+2) for fractional offset ``t`` in [0, 1)."""
    t = np.asarray(t, dtype=float)
    t2 = t * t
    t3 = t2 * t
    return np.stack(
        [
            0.5 * (-t3 + 2 * t2 - t),
            0.5 * (3 * t3 - 5 * t2 + 2),
            0.5 * (-3 * t3 + 4 * t2 + t),
            0.5 * (t3 - t2),
        ],
        axis=-1,
    )


def _cell(grid, x):
    s = (np.asarray(x, dtype=float) - grid.x_min) / grid.dx
    i = np.floor(s).astype(int)
    return i, s - i


def _cubic_1d(values, grid, x):
    i, t = _cell(grid, x)
    n = grid.n_points
    idx = (i[..., None] + np.arange(-1, 3)) % n
    return np.sum(catmull_rom_weights(t) * values[idx], axis=-1)


def _cubic_2d(values, g1, g2, x1, x2):
    i1, t1 = _cell(g1, x1)
    i2, t2 = _cell(g2, x2)
    idx1 = (i1[..., None] + np.arange(-1, 3)) % g1.n_points
    idx2 = (i2[..., None] + np.arange(-1, 3)) % g2.n_points
    w1 = catmull_rom_weights(t1)
    w2 = catmull_rom_weights(t2)
    patch = values[idx1[..., :, None], idx2[..., None, :]]
    return np.einsum("...i,...ij,...j->...", w1, patch, w2)


def _spectral_1d(values, grid, x):
    spec = sfft.fft(values)
    phase = np.exp(1j * np.multiply.outer(np.asarray(x, float) - grid.x_min, grid.k))
    return phase @ spec / grid.n_points


def interpolate_field(f: ComplexField, point, method: str = "cubic"):
    """Evaluate ``f`` off-grid.

    ``point`` is a scalar (1D) or an ``(x1, x2)`` pair (2D); arrays of points
    are accepted for the cubic method. ``method`` is ``"cubic"`` (Catmull-Rom on
    real and imaginary parts, local) or ``"spectral"`` (exact trigonometric
    interpolant of the periodic samples, global).
    """
    pts = (point,) if f.ndim == 1 else tuple(point)
    if len(pts) != f.ndim:
        raise InvalidArgumentError(f"expected {f.ndim} coordinates, got {len(pts)}")
    for g, p in zip(f.grids, pts):
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)) or np.any(p < g.x_min) or np.any(p >= g.x_max):
            raise OutOfDomainError(f"point {p} outside [{g.x_min}, {g.x_max})")

    if method == "cubic":
        if f.ndim == 1:
            out = _cubic_1d(f.values, f.grid, pts[0])
        else:
            out = _cubic_2d(f.values, f.grids[0], f.grids[1], pts[0], pts[1])
    elif method == "spectral":
        if f.ndim == 1:
            out = _spectral_1d(f.values, f.grid, pts[0])
        else:
            ev = SpectralPointEvaluator(f)
            out = np.vectorize(ev.value)(pts[0], pts[1])
    else:
        raise InvalidArgumentError(f"unknown interpolation method {method!r}")

    # Exactly on a node: hand back the stored sample untouched.
    idx, on_node = [], True
    for g, p in zip(f.grids, pts):
        s = (np.asarray(p, dtype=float) - g.x_min) / g.dx
        if np.ndim(s) or s != np.floor(s):
            on_node = False
            break
        idx.append(int(s))
    if on_node:
        return complex(f.values[tuple(idx)])
    return complex(out) if np.ndim(out) == 0 else out


class SpectralPointEvaluator:
    """Trigonometric-interpolant evaluation of a field and its derivatives at points.

    1D fields are transformed once and evaluated in k-space. 2D fields are
    evaluated in real space as w1^T f w2, where the w are the interpolant's
    per-axis sample weights (an FFT of the 1D Fourier basis vector). That is
    the same interpolant without a 2D FFT per field.
    """

    def __init__(self, f: ComplexField):
        self.field = f
        self.peak = float(np.max(np.abs(f.values) ** 2))
        self._odd_k = []
        for g in f.grids:
            k = g.k.copy()
            k[g.n_points // 2] = 0.0
            self._odd_k.append(k)

    @cached_property
    def spec(self):
        return sfft.fftn(self.field.values) / self.field.values.size

    def _basis(self, axis, x, order):
        g = self.field.grids[axis]
        e = np.exp(1j * g.k * (x - g.x_min))
        if order:
            k = self._odd_k[axis] if order % 2 else g.k
            e = e * (1j * k) ** order
        return e

    def _weights(self, axis, x, order):
        return sfft.fft(self._basis(axis, x, order)) / self.field.grids[axis].n_points

    def value(self, *x, orders=None):
        orders = orders or (0,) * self.field.ndim
        if self.field.ndim == 1:
            return complex(self.spec @ self._basis(0, x[0], orders[0]))
        col = self.field.values @ self._weights(1, x[1], orders[1])
        return complex(self._weights(0, x[0], orders[0]) @ col)

    def value_and_gradient(self, *x):
        """(f, df/dx_1, ..., df/dx_d) at one point."""
        if self.field.ndim == 1:
            e0 = self._basis(0, x[0], 0)
            e1 = self._basis(0, x[0], 1)
            return complex(self.spec @ e0), complex(self.spec @ e1)
        w2 = np.stack([self._weights(1, x[1], 0), self._weights(1, x[1], 1)], axis=1)
        cols = self.field.values @ w2
        w1 = self._weights(0, x[0], 0)
        d1 = self._weights(0, x[0], 1)
        return complex(w1 @ cols[:, 0]), complex(d1 @ cols[:, 0]), complex(w1 @ cols[:, 1])

"""Two-particle potentials V(x1, x2, t) with analytic partial derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SpatialGrid, catmull_rom_weights
from .errors import InvalidArgumentError

__all__ = [
    "Polynomial",
    "FunctionTerm",
    "HarmonicCoupled",
    "Separable",
    "Custom",
    "evaluate_full",
    "conditional_slice",
    "d_dx1",
    "d_dx2",
    "partial",
    "sample_grid",
]


def _check_order(order):
    if order not in (1, 2):
        raise InvalidArgumentError(f"derivative order must be 1 or 2, got {order}")


@dataclass(frozen=True)
class Polynomial:
    """Time-independent single-particle term sum_n coeffs[n] * x**n."""

    coeffs: tuple = (0.0,)

    def __call__(self, x, t=0.0):
        return np.polynomial.polynomial.polyval(x, self.coeffs) + 0.0 * np.asarray(x, float)

    def derivative(self, x, t=0.0, order=1):
        d = np.polynomial.polynomial.polyder(self.coeffs, order) if len(self.coeffs) > order else [0.0]
        return np.polynomial.polynomial.polyval(x, d) + 0.0 * np.asarray(x, float)


@dataclass(frozen=True)
class FunctionTerm:
    """Arbitrary ``func(x, t)``; derivatives analytic if ``dfunc(x, t, order)`` given."""

    func: object
    dfunc: object = None
    h: float = 1e-3

    def __call__(self, x, t=0.0):
        return self.func(x, t)

    def derivative(self, x, t=0.0, order=1):
        if self.dfunc is not None:
            return self.dfunc(x, t, order)
        h = self.h
        if order == 1:
            return (self.func(x + h, t) - self.func(x - h, t)) / (2 * h)
        return (self.func(x + h, t) - 2 * self.func(x, t) + self.func(x - h, t)) / h**2


@dataclass(frozen=True)
class HarmonicCoupled:
    """V = F (x1^2 + x2^2) + C x1 x2, with F, C in eV nm^-2."""

    F: float
    C: float

    def evaluate(self, x1, x2, t=0.0):
        return self.F * (x1 * x1 + x2 * x2) + self.C * x1 * x2

    def partial(self, x1, x2, t, order, wrt):
        own, other = (x1, x2) if wrt == 1 else (x2, x1)
        if order == 1:
            return 2.0 * self.F * own + self.C * other
        return 2.0 * self.F + 0.0 * (np.asarray(own, float) + np.asarray(other, float))

    @property
    def time_dependent(self):
        return False


@dataclass(frozen=True)
class Separable:
    """V = V1(x1, t) + V2(x2, t)."""

    v1: object = field(default_factory=Polynomial)
    v2: object = field(default_factory=Polynomial)
    time_dependent: bool = False

    def evaluate(self, x1, x2, t=0.0):
        return self.v1(x1, t) + self.v2(x2, t)

    def partial(self, x1, x2, t, order, wrt):
        zero = 0.0 * (np.asarray(x1, float) + np.asarray(x2, float))
        if wrt == 1:
            return self.v1.derivative(x1, t, order) + zero
        return self.v2.derivative(x2, t, order) + zero


@dataclass(frozen=True, eq=False)
class Custom:
    """Grid-sampled, time-independent V(x1, x2); derivatives by central differences."""

    values: np.ndarray
    grid1: SpatialGrid
    grid2: SpatialGrid
    time_dependent: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid1.n_points, self.grid2.n_points):
            raise InvalidArgumentError("Custom potential values do not match grids")
        object.__setattr__(self, "values", v)

    def _interp(self, arr, x1, x2):
        g1, g2 = self.grid1, self.grid2
        s1 = (np.asarray(x1, float) - g1.x_min) / g1.dx
        s2 = (np.asarray(x2, float) - g2.x_min) / g2.dx
        i1, i2 = np.floor(s1).astype(int), np.floor(s2).astype(int)
        w1, w2 = catmull_rom_weights(s1 - i1), catmull_rom_weights(s2 - i2)
        idx1 = (i1[..., None] + np.arange(-1, 3)) % g1.n_points
        idx2 = (i2[..., None] + np.arange(-1, 3)) % g2.n_points
        patch = arr[idx1[..., :, None], idx2[..., None, :]]
        return np.einsum("...i,...ij,...j->...", w1, patch, w2)

    def evaluate(self, x1, x2, t=0.0):
        return self._interp(self.values, x1, x2)

    def partial(self, x1, x2, t, order, wrt):
        axis = wrt - 1
        h = (self.grid1, self.grid2)[axis].dx
        up, down = np.roll(self.values, -1, axis), np.roll(self.values, 1, axis)
        if order == 1:
            d = (up - down) / (2 * h)
        else:
            d = (up - 2 * self.values + down) / h**2
        return self._interp(d, x1, x2)


def evaluate_full(p, x1, x2, t=0.0):
    """V(x1, x2, t) in eV."""
    return p.evaluate(x1, x2, t)


def partial(p, x1, x2, t=0.0, order=1, wrt=2):
    _check_order(order)
    if wrt not in (1, 2):
        raise InvalidArgumentError(f"wrt must be 1 or 2, got {wrt}")
    return p.partial(x1, x2, t, order, wrt)


def d_dx2(p, x1, x2, t=0.0, order=1):
    """d^n V / d x2^n at (x1, x2, t)."""
    return partial(p, x1, x2, t, order, wrt=2)


def d_dx1(p, x1, x2, t=0.0, order=1):
    return partial(p, x1, x2, t, order, wrt=1)


def conditional_slice(p, which, other_position, t, grid: SpatialGrid):
    """V along particle ``which``'s axis with the other coordinate frozen."""
    if which == 1:
        return np.asarray(p.evaluate(grid.x, other_position, t), dtype=float)
    if which == 2:
        return np.asarray(p.evaluate(other_position, grid.x, t), dtype=float)
    raise InvalidArgumentError(f"which must be 1 or 2, got {which}")


def sample_grid(p, grid1: SpatialGrid, grid2: SpatialGrid, t=0.0):
    """V on the full (x1, x2) mesh, shape (n1, n2)."""
    if isinstance(p, Custom) and p.grid1 == grid1 and p.grid2 == grid2:
        return p.values
    x1, x2 = np.meshgrid(grid1.x, grid2.x, indexing="ij")
    return np.asarray(p.evaluate(x1, x2, t), dtype=float)

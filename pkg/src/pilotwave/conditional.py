"""Conditional wave functions and the tower of ratio fields a, b, c, d.

For particle 1 the conditional field is psi(x) = Psi(x, X2). The tower fields
are ratios of derivatives with respect to the *other* coordinate,
``a = d_{x2}Psi / Psi``, ``b = d_{x2}^2 Psi / Psi`` and so on, all taken at
x2 = X2 and sampled along the particle's own axis. Particle 2 is the mirror
image with the axes swapped.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .bohm import NODE_FLOOR
from .core import ComplexField, SpatialGrid, catmull_rom_weights, derivative_array
from .errors import DegenerateSliceError, InvalidArgumentError
from .potentials import partial
from .units import HBAR

__all__ = [
    "ConditionalSlice",
    "TowerFields",
    "EffectivePotentialTerms",
    "TowerInputs",
    "ConditionalExtractor",
    "extract_conditional",
    "tower_from_oracle",
    "effective_terms",
    "tower_inputs",
    "tower_rhs",
    "step_tower_ab",
    "fill_masked",
    "valid_mask",
]

TOWER_BLOWUP_FACTOR = 1e6


@dataclass(frozen=True, eq=False)
class ConditionalSlice:
    psi: ComplexField
    psi_p: ComplexField
    psi_pp: ComplexField
    which_particle: int
    other_position: float

    @property
    def grid(self):
        return self.psi.grid


@dataclass(frozen=True, eq=False)
class TowerFields:
    """Ratio fields on the particle's own grid; ``valid`` marks points above the node floor."""

    a: np.ndarray
    b: np.ndarray
    grid: SpatialGrid
    which_particle: int
    c: np.ndarray | None = None
    d: np.ndarray | None = None
    valid: np.ndarray | None = None
    scale: float = 1.0
    blowup: bool = False

    def __post_init__(self):
        if self.valid is None:
            object.__setattr__(self, "valid", np.ones(self.grid.n_points, bool))


@dataclass(frozen=True, eq=False)
class EffectivePotentialTerms:
    conditional_v: np.ndarray | None
    A: np.ndarray
    B: np.ndarray

    def total(self):
        base = 0.0 if self.conditional_v is None else self.conditional_v
        return base + self.A + self.B


def valid_mask(psi_values, floor=NODE_FLOOR):
    rho = np.abs(psi_values) ** 2
    return (rho >= floor * rho.max()) & (rho > 0)


def fill_masked(arr, valid, order=2):
    """Replace invalid entries: linear interpolation inside, polynomial extrapolation outside.

    Edge extrapolation goes through the last ``order + 1`` valid points at each
    end (quadratic by default, which is exact for the Gaussian-state towers).
    """
    if valid.all():
        return arr
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        raise DegenerateSliceError("no valid points to extend from")
    arr = np.asarray(arr, dtype=complex)
    pos = np.arange(arr.size)
    out = np.interp(pos, idx, arr[idx].real) + 1j * np.interp(pos, idx, arr[idx].imag)
    m = min(order, idx.size - 1) + 1
    for outside, nodes in ((pos < idx[0], idx[:m]), (pos > idx[-1], idx[-m:])):
        if outside.any():
            out[outside] = _lagrange(nodes, arr[nodes], pos[outside])
    return out


def _lagrange(nodes, values, x):
    total = np.zeros(x.shape, complex)
    for j, (xj, fj) in enumerate(zip(nodes, values)):
        basis = np.ones(x.shape)
        for m, xm in enumerate(nodes):
            if m != j:
                basis *= (x - xm) / (xj - xm)
        total += fj * basis
    return total


class ConditionalExtractor:
    """Evaluates Psi and its other-coordinate derivatives on the line x_other = q.

    The FFT along the other axis is done once; each evaluation is one
    matrix-vector product, so it is exact for the periodic trigonometric
    interpolant and cheap to repeat at different q.
    """

    def __init__(self, psi2d: ComplexField, which: int):
        if which not in (1, 2):
            raise InvalidArgumentError(f"which must be 1 or 2, got {which}")
        self.which = which
        self.other_axis = 1 if which == 1 else 0
        self.own_grid = psi2d.grids[0 if which == 1 else 1]
        self.other_grid = psi2d.grids[self.other_axis]
        self.phi = sfft.fft(psi2d.values, axis=self.other_axis) / self.other_grid.n_points
        k = self.other_grid.k
        self._k_odd = k.copy()
        self._k_odd[len(k) // 2] = 0.0

    def derivatives(self, q, orders=(0, 1, 2)):
        g = self.other_grid
        g.check_inside(q, "conditioning position")
        e = np.exp(1j * g.k * (q - g.x_min))
        basis = []
        for n in orders:
            k = self._k_odd if n % 2 else g.k
            basis.append(e * (1j * k) ** n if n else e)
        basis = np.stack(basis, axis=1)
        if self.which == 1:
            cols = self.phi @ basis
        else:
            cols = (basis.T @ self.phi).T
        return [cols[:, j] for j in range(len(orders))]


def _cubic_along(values, grid, q, axis):
    s = (q - grid.x_min) / grid.dx
    i = int(np.floor(s))
    w = catmull_rom_weights(s - i)
    idx = (i + np.arange(-1, 3)) % grid.n_points
    return np.tensordot(np.take(values, idx, axis=axis), w, axes=([axis], [0]))


def extract_conditional(psi2d: ComplexField, which: int, other_pos: float, *,
                        method="spectral", extractor=None) -> ConditionalSlice:
    """psi, psi', psi'' of the conditional field at the other particle's position.

    ``method="spectral"`` evaluates the trigonometric interpolant in the other
    coordinate (derivatives exact for that interpolant); ``"cubic"`` takes the
    spectral cross-derivative fields and Catmull-Rom interpolates them.
    """
    if method == "spectral":
        ex = extractor or ConditionalExtractor(psi2d, which)
        own = ex.own_grid
        cols = ex.derivatives(other_pos, (0, 1, 2))
    elif method == "cubic":
        axis = 1 if which == 1 else 0
        other = psi2d.grids[axis]
        own = psi2d.grids[1 - axis]
        other.check_inside(other_pos, "conditioning position")
        cols = [psi2d.values] + [derivative_array(psi2d.values, other.k, n, axis=axis)
                                 for n in (1, 2)]
        cols = [_cubic_along(c, other, other_pos, axis) for c in cols]
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    f = [ComplexField(c, (own,)) for c in cols]
    return ConditionalSlice(f[0], f[1], f[2], which, float(other_pos))


def tower_from_oracle(slice_: ConditionalSlice, psi2d: ComplexField, other_pos: float,
                      depth: int = 2, *, extractor=None, fill=True) -> TowerFields:
    """a, b (and c, d for depth 4) as ratios of cross-derivatives to psi.

    Points below the node floor are flagged invalid; with ``fill`` they are
    given linearly extended values so downstream finite differences stay tame.
    """
    if depth not in (2, 4):
        raise InvalidArgumentError(f"depth must be 2 or 4, got {depth}")
    psi = slice_.psi.values
    valid = valid_mask(psi)
    if not valid.any():
        raise DegenerateSliceError("conditional slice is below the node floor everywhere")
    safe = np.where(valid, psi, 1.0)

    def ratio(num):
        r = np.where(valid, num / safe, 0.0)
        return fill_masked(r, valid) if fill else r

    a = ratio(slice_.psi_p.values)
    b = ratio(slice_.psi_pp.values)
    c = d = None
    if depth == 4:
        ex = extractor or ConditionalExtractor(psi2d, slice_.which_particle)
        p3, p4 = ex.derivatives(other_pos, (3, 4))
        c, d = ratio(p3), ratio(p4)
    grid = slice_.grid
    scale = max(float(np.max(np.abs(a[valid]))), 1.0 / grid.dx)
    return TowerFields(a, b, grid, slice_.which_particle, c, d, valid, scale)


def effective_terms(tower: TowerFields, other_velocity: float, other_mass: float, *,
                    conditional_v=None, hbar=HBAR, clamp=None, masked="zero"):
    """A = i hbar (dX_other/dt) a and B = -(hbar^2 / 2 m_other) b.

    On invalid points A and B are set to zero (``masked="zero"``) or kept as the
    extended tower values (``"keep"``). ``clamp`` caps |A| and |B| pointwise.
    """
    A = 1j * hbar * other_velocity * tower.a
    B = -(hbar**2) / (2 * other_mass) * tower.b
    if masked == "zero":
        A = np.where(tower.valid, A, 0.0)
        B = np.where(tower.valid, B, 0.0)
    if clamp is not None:
        for arr in (A, B):
            mag = np.abs(arr)
            over = mag > clamp
            arr[over] *= clamp / mag[over]
    return EffectivePotentialTerms(conditional_v, A, B)


@dataclass(frozen=True, eq=False)
class TowerInputs:
    """Everything the a/b evolution needs at one instant, besides a and b."""

    log_derivative: np.ndarray
    other_velocity: float
    dV: np.ndarray
    d2V: np.ndarray
    c: np.ndarray | float = 0.0
    d: np.ndarray | float = 0.0


def log_derivative(psi_values, grid, eps=NODE_FLOOR * 1e-4):
    """Regularized psi_x / psi = conj(psi) psi_x / (|psi|^2 + eps max|psi|^2)."""
    dpsi = derivative_array(psi_values, grid.k, 1)
    rho = np.abs(psi_values) ** 2
    return np.conj(psi_values) * dpsi / (rho + eps * rho.max())


def tower_inputs(psi_own, grid, potential, which, other_pos, other_velocity, t=0.0,
                 c=0.0, d=0.0):
    """Assemble :class:`TowerInputs` from the current own-axis field and particle state."""
    x = grid.x
    wrt = 2 if which == 1 else 1
    x1, x2 = (x, other_pos) if which == 1 else (other_pos, x)
    dV = np.asarray(partial(potential, x1, x2, t, 1, wrt), dtype=float) + 0.0 * x
    d2V = np.asarray(partial(potential, x1, x2, t, 2, wrt), dtype=float) + 0.0 * x
    values = psi_own.values if isinstance(psi_own, ComplexField) else psi_own
    return TowerInputs(log_derivative(values, grid), float(other_velocity), dV, d2V, c, d)


def _fd(arr, dx):
    d1 = np.gradient(arr, dx, edge_order=2)
    return d1, np.gradient(d1, dx, edge_order=2)


def tower_rhs(a, b, inp: TowerInputs, dx, own_mass, other_mass, hbar=HBAR):
    """Time derivatives (da/dt, db/dt) from the exact cross-derivative hierarchy."""
    a_x, a_xx = _fd(a, dx)
    b_x, b_xx = _fd(b, dx)
    L = inp.log_derivative
    own = 1j * hbar / (2 * own_mass)
    other = 1j * hbar / (2 * other_mass)
    v = inp.other_velocity
    da = (own * (a_xx + 2 * a_x * L) + other * (inp.c - a * b) + v * (b - a * a)
          - 1j / hbar * inp.dV)
    db = (own * (b_xx + 2 * b_x * L) + other * (inp.d - b * b) + v * (inp.c - a * b)
          - 2j / hbar * a * inp.dV - 1j / hbar * inp.d2V)
    return da, db


def step_tower_ab(tower: TowerFields, start: TowerInputs, dt, masses, end: TowerInputs = None,
                  *, hbar=HBAR, valid=None) -> TowerFields:
    """One Heun (RK2) step of the a/b equations.

    ``start`` and ``end`` hold the coefficients at t and t+dt; without ``end``
    they are frozen over the step. ``masses`` is (m1, m2). Points outside
    ``valid`` (default: the tower's mask) are re-extended after each stage.
    """
    own_mass, other_mass = (masses[0], masses[1]) if tower.which_particle == 1 else (masses[1], masses[0])
    end = start if end is None else end
    valid = tower.valid if valid is None else valid
    dx = tower.grid.dx
    with np.errstate(over="ignore", invalid="ignore"):
        ka, kb = tower_rhs(tower.a, tower.b, start, dx, own_mass, other_mass, hbar)
        a1 = fill_masked(tower.a + dt * ka, valid)
        b1 = fill_masked(tower.b + dt * kb, valid)
        la, lb = tower_rhs(a1, b1, end, dx, own_mass, other_mass, hbar)
        a2 = fill_masked(tower.a + 0.5 * dt * (ka + la), valid)
        b2 = fill_masked(tower.b + 0.5 * dt * (kb + lb), valid)
    peak = np.max(np.abs(a2)) if np.all(np.isfinite(a2)) else np.inf
    blowup = tower.blowup or not np.isfinite(peak) or peak > TOWER_BLOWUP_FACTOR * tower.scale
    if not np.all(np.isfinite(a2)) or not np.all(np.isfinite(b2)):
        a2 = np.where(np.isfinite(a2), a2, 0.0)
        b2 = np.where(np.isfinite(b2), b2, 0.0)
    return replace(tower, a=a2, b=b2, valid=valid, blowup=blowup)

"""Guidance velocities, trajectory integration and quantum-equilibrium sampling."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .core import ComplexField, SpectralPointEvaluator, catmull_rom_weights, derivative_array
from .errors import InvalidArgumentError, NumericalBlowupError, OutOfDomainError
from .units import ELECTRON_MASS, HBAR

__all__ = [
    "NODE_FLOOR",
    "TrajectoryState",
    "Ensemble",
    "guidance",
    "velocity_1d",
    "velocity_2d",
    "velocity_field_cubic",
    "advance_trajectory",
    "sample_equilibrium",
    "kinetic_energy",
    "propagate_ensemble",
    "histogram_l1",
]

# |psi|^2 below this fraction of max|psi|^2 counts as a node
NODE_FLOOR = 1e-12


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    X1: float
    X2: float
    V1: float = 0.0
    V2: float = 0.0

    @property
    def positions(self):
        return self.X1, self.X2


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Configurations stored column-wise; ``members`` gives the per-trajectory view."""

    X1: np.ndarray
    X2: np.ndarray
    seed: int
    t: float = 0.0

    def __len__(self):
        return len(self.X1)

    @property
    def members(self):
        return [TrajectoryState(self.t, float(a), float(b)) for a, b in zip(self.X1, self.X2)]


def guidance(value, gradient, mass, hbar=HBAR, at_node=False, v_max=None):
    """(hbar/m) Im(grad/value), magnitude-clamped to ``v_max`` at nodes."""
    v = 0.0 if value == 0 else hbar / mass * (gradient / value).imag
    if at_node and v_max is not None:
        v = np.clip(v, -v_max, v_max)
    if not np.isfinite(v):
        raise NumericalBlowupError("non-finite guidance velocity")
    return float(v)


def _node(value, values, peak=None):
    if peak is None:
        peak = np.max(np.abs(values) ** 2)
    return abs(value) ** 2 < NODE_FLOOR * peak


def velocity_1d(psi: ComplexField, x, mass=ELECTRON_MASS, *, hbar=HBAR, method="spectral",
                v_max=None, evaluator=None, return_flag=False):
    """Guidance velocity of a single-particle field at ``x``.

    ``evaluator`` may be a pre-built :class:`SpectralPointEvaluator` of ``psi``
    to avoid repeating the FFT.
    """
    psi.grid.check_inside(x)
    if method == "spectral":
        ev = evaluator or SpectralPointEvaluator(psi)
        value, grad = ev.value_and_gradient(x)
        peak = ev.peak
    elif method == "cubic":
        d = ComplexField(derivative_array(psi.values, psi.grid.k, 1), psi.grids)
        value, grad = _cubic_points(psi, d, x)
        peak = None
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    node = _node(value, psi.values, peak)
    v = guidance(value, grad, mass, hbar, node, v_max)
    return (v, node) if return_flag else v


def _cubic_points(psi, dpsi, x):
    g = psi.grid
    s = (x - g.x_min) / g.dx
    i = int(np.floor(s))
    w = catmull_rom_weights(s - i)
    idx = (i + np.arange(-1, 3)) % g.n_points
    return complex(w @ psi.values[idx]), complex(w @ dpsi.values[idx])


def velocity_2d(psi: ComplexField, x1, x2, masses=(ELECTRON_MASS, ELECTRON_MASS), *,
                hbar=HBAR, method="spectral", v_max=None, evaluator=None, return_flag=False):
    """Both guidance velocity components of the two-particle field at (x1, x2)."""
    g1, g2 = psi.grids
    g1.check_inside(x1, "x1")
    g2.check_inside(x2, "x2")
    if method == "spectral":
        ev = evaluator or SpectralPointEvaluator(psi)
        value, d1, d2 = ev.value_and_gradient(x1, x2)
        peak = ev.peak
    elif method == "cubic":
        v1, v2, node = velocity_field_cubic(psi, np.array([x1]), np.array([x2]), masses,
                                            hbar=hbar, v_max=v_max)
        out = (float(v1[0]), float(v2[0]))
        return (out, bool(node[0])) if return_flag else out
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    node = _node(value, psi.values, peak)
    vm = (None, None) if v_max is None else np.broadcast_to(v_max, 2)
    out = (
        guidance(value, d1, masses[0], hbar, node, vm[0]),
        guidance(value, d2, masses[1], hbar, node, vm[1]),
    )
    return (out, node) if return_flag else out


def velocity_field_cubic(psi: ComplexField, x1, x2, masses=(ELECTRON_MASS, ELECTRON_MASS), *,
                         hbar=HBAR, v_max=None):
    """Vectorized guidance velocities at many configurations (Catmull-Rom interpolation).

    Returns ``(v1, v2, at_node)`` arrays.
    """
    g1, g2 = psi.grids
    spec = sfft.fft2(psi.values)
    k1 = g1.k.copy()
    k1[g1.n_points // 2] = 0.0
    k2 = g2.k.copy()
    k2[g2.n_points // 2] = 0.0
    d1 = sfft.ifft2(spec * (1j * k1)[:, None])
    d2 = sfft.ifft2(spec * (1j * k2)[None, :])

    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if (np.any(x1 < g1.x_min) or np.any(x1 >= g1.x_max)
            or np.any(x2 < g2.x_min) or np.any(x2 >= g2.x_max)):
        raise OutOfDomainError("ensemble member outside the grid extent")
    s1 = (x1 - g1.x_min) / g1.dx
    s2 = (x2 - g2.x_min) / g2.dx
    i1 = np.floor(s1).astype(int)
    i2 = np.floor(s2).astype(int)
    w1 = catmull_rom_weights(s1 - i1)
    w2 = catmull_rom_weights(s2 - i2)
    idx1 = (i1[:, None] + np.arange(-1, 3)) % g1.n_points
    idx2 = (i2[:, None] + np.arange(-1, 3)) % g2.n_points
    rows, cols = idx1[:, :, None], idx2[:, None, :]

    def interp(field):
        return np.einsum("ni,nij,nj->n", w1, field[rows, cols], w2)

    value, grad1, grad2 = interp(psi.values), interp(d1), interp(d2)
    rho = np.abs(value) ** 2
    node = rho < NODE_FLOOR * np.max(np.abs(psi.values) ** 2)
    safe = np.where(rho > 0, value, 1.0)
    v1 = hbar / masses[0] * (grad1 / safe).imag
    v2 = hbar / masses[1] * (grad2 / safe).imag
    v1 = np.where(rho > 0, v1, 0.0)
    v2 = np.where(rho > 0, v2, 0.0)
    if v_max is not None and node.any():
        vm = np.broadcast_to(v_max, 2)
        v1 = np.where(node, np.clip(v1, -vm[0], vm[0]), v1)
        v2 = np.where(node, np.clip(v2, -vm[1], vm[1]), v2)
    return v1, v2, node


def advance_trajectory(state: TrajectoryState, velocity_source, dt) -> TrajectoryState:
    """One Heun predictor-corrector step.

    ``velocity_source(t, x1, x2) -> (v1, v2)`` must answer at ``state.t`` and at
    ``state.t + dt``. The returned state carries the velocity at its own
    (corrected) position.
    """
    t0 = state.t
    va = velocity_source(t0, state.X1, state.X2)
    p1 = state.X1 + dt * va[0]
    p2 = state.X2 + dt * va[1]
    vb = velocity_source(t0 + dt, p1, p2)
    x1 = state.X1 + 0.5 * dt * (va[0] + vb[0])
    x2 = state.X2 + 0.5 * dt * (va[1] + vb[1])
    vc = velocity_source(t0 + dt, x1, x2)
    return TrajectoryState(t0 + dt, x1, x2, float(vc[0]), float(vc[1]))


def _inverse_cdf(weights, u):
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(weights) - 1)


def sample_equilibrium(psi0: ComplexField, n: int, seed: int) -> Ensemble:
    """Draw ``n`` configurations from |psi0|^2.

    Marginal in x1 first, then x2 conditional on the chosen x1 cell; each
    coordinate is jittered uniformly within its cell (cells centred on nodes).
    """
    g1, g2 = psi0.grids
    rng = np.random.default_rng(seed)
    if n == 0:
        return Ensemble(np.empty(0), np.empty(0), seed)
    rho = np.abs(psi0.values) ** 2
    i1 = _inverse_cdf(rho.sum(axis=1), rng.random(n))
    cond = np.cumsum(rho, axis=1)
    total = cond[:, -1:]
    cond = np.divide(cond, total, out=np.zeros_like(cond), where=total > 0)
    u2 = rng.random(n)
    i2 = np.array([np.searchsorted(cond[i], u, side="right") for i, u in zip(i1, u2)])
    i2 = np.minimum(i2, g2.n_points - 1)
    j1, j2 = rng.random(n) - 0.5, rng.random(n) - 0.5
    x1 = g1.x_min + np.mod(g1.dx * (i1 + j1), g1.length)
    x2 = g2.x_min + np.mod(g2.dx * (i2 + j2), g2.length)
    return Ensemble(x1, x2, seed)


def kinetic_energy(state: TrajectoryState, masses=(ELECTRON_MASS, ELECTRON_MASS)):
    """Per-particle 0.5 m V^2 in eV."""
    return 0.5 * masses[0] * state.V1**2, 0.5 * masses[1] * state.V2**2


def propagate_ensemble(psi0: ComplexField, ensemble: Ensemble, potential, cfg, n_steps):
    """Evolve field and every member (Heun, cubic velocity interpolation) for ``n_steps``."""
    from .solvers import Propagator2D

    prop = Propagator2D(potential, cfg)
    masses, dt, hbar = cfg.masses, cfg.dt, cfg.hbar
    v_max = (cfg.grids[0].dx / dt, cfg.grids[1].dx / dt)
    psi = psi0
    x1, x2 = ensemble.X1.copy(), ensemble.X2.copy()
    g1, g2 = cfg.grids

    def wrap(x, g):
        return g.x_min + np.mod(x - g.x_min, g.length)

    va1, va2, _ = velocity_field_cubic(psi, x1, x2, masses, hbar=hbar, v_max=v_max)
    for step in range(n_steps):
        psi = psi.with_values(prop.step(psi.values, step))
        p1 = wrap(x1 + dt * va1, g1)
        p2 = wrap(x2 + dt * va2, g2)
        vb1, vb2, _ = velocity_field_cubic(psi, p1, p2, masses, hbar=hbar, v_max=v_max)
        x1 = wrap(x1 + 0.5 * dt * (va1 + vb1), g1)
        x2 = wrap(x2 + 0.5 * dt * (va2 + vb2), g2)
        va1, va2, _ = velocity_field_cubic(psi, x1, x2, masses, hbar=hbar, v_max=v_max)
    return psi, replace(ensemble, X1=x1, X2=x2, t=ensemble.t + n_steps * dt)


def histogram_l1(psi: ComplexField, ensemble: Ensemble, bins=32):
    """L1 distance between binned ensemble frequencies and binned |psi|^2.

    Bins are square blocks of grid cells covering the whole grid.
    """
    g1, g2 = psi.grids
    if g1.n_points % bins or g2.n_points % bins:
        raise InvalidArgumentError(f"{bins} bins must divide the grid sizes")
    rho = np.abs(psi.values) ** 2
    b1, b2 = g1.n_points // bins, g2.n_points // bins
    p_exact = rho.reshape(bins, b1, bins, b2).sum(axis=(1, 3))
    p_exact /= p_exact.sum()
    e1 = g1.x_min - 0.5 * g1.dx + b1 * g1.dx * np.arange(bins + 1)
    e2 = g2.x_min - 0.5 * g2.dx + b2 * g2.dx * np.arange(bins + 1)
    # members in the last half cell belong to node 0 under periodic wrap
    x1 = np.where(ensemble.X1 >= e1[-1], ensemble.X1 - g1.length, ensemble.X1)
    x2 = np.where(ensemble.X2 >= e2[-1], ensemble.X2 - g2.length, ensemble.X2)
    counts, _, _ = np.histogram2d(x1, x2, bins=[e1, e2])
    p_emp = counts / max(len(ensemble), 1)
    return float(np.abs(p_emp - p_exact).sum())

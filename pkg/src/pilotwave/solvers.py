"""Split-step Fourier (Strang) propagation of the 1D and 2D Schrödinger equations.

One step is ``exp(-i V_end dt/2hbar) F^-1 exp(-i T dt/hbar) F exp(-i V_start dt/2hbar)``.
With ``V_end == V_start`` this is the usual symmetric splitting; supplying the
potential at both ends of the step keeps second-order accuracy when V moves.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .core import ComplexField, SpatialGrid
from .errors import InvalidArgumentError, NumericalBlowupError
from .potentials import sample_grid
from .units import HBAR

__all__ = [
    "SolverConfig",
    "Propagator2D",
    "step_1d",
    "step_1d_nonunitary",
    "step_2d",
    "energy_expectation",
    "support_mask",
]

NONUNITARY_GROWTH_LIMIT = 1e3


@dataclass(frozen=True)
class SolverConfig:
    """Time step, masses and grids, one entry per particle axis."""

    dt: float
    masses: tuple
    grids: tuple
    hbar: float = HBAR
    potential_phase_limit: float = 0.5

    def __post_init__(self):
        masses = tuple(float(m) for m in np.atleast_1d(self.masses))
        grids = (self.grids,) if isinstance(self.grids, SpatialGrid) else tuple(self.grids)
        if len(masses) != len(grids):
            raise InvalidArgumentError("need one mass per grid")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if any(m <= 0 for m in masses):
            raise InvalidArgumentError("masses must be positive")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "grids", grids)
        for g, m in zip(grids, masses):
            phase = self.hbar * g.k_nyquist**2 * self.dt / (2 * m)
            if phase >= np.pi:
                raise InvalidArgumentError(
                    f"dt={self.dt} fs gives kinetic phase {phase:.3f} rad >= pi at the "
                    f"Nyquist wavenumber (dx={g.dx} nm); reduce dt or refine less"
                )

    @property
    def ndim(self):
        return len(self.grids)

    def for_particle(self, i):
        """1D config for particle ``i`` (1-based)."""
        return SolverConfig(
            self.dt, (self.masses[i - 1],), (self.grids[i - 1],), self.hbar,
            self.potential_phase_limit,
        )

    def kinetic_phase(self):
        """exp(-i hbar sum_j k_j^2 / 2 m_j dt) on the k-grid (FFT order)."""
        ks = np.meshgrid(*[g.k for g in self.grids], indexing="ij")
        energy = sum(self.hbar * k**2 / (2 * m) for k, m in zip(ks, self.masses))
        return np.exp(-1j * energy * self.dt)

    def check_potential(self, v, psi=None, floor=1e-8):
        """Reject dt if the potential phase spread over the state's support is too large.

        Only points where |psi|^2 exceeds ``floor`` times its peak count; a
        constant offset of V is a global phase and is subtracted out.
        """
        v = np.asarray(v, dtype=float)
        mask = support_mask(psi, floor) if psi is not None else np.ones(v.shape, bool)
        spread = float(v[mask].max() - v[mask].min()) if mask.any() else 0.0
        phase = spread * self.dt / self.hbar
        if phase >= self.potential_phase_limit:
            raise InvalidArgumentError(
                f"dt={self.dt} fs gives potential phase spread {phase:.3f} rad over the "
                f"wave-function support (limit {self.potential_phase_limit})"
            )
        return phase


def support_mask(psi, floor=1e-8):
    values = psi.values if isinstance(psi, ComplexField) else np.asarray(psi)
    rho = np.abs(values) ** 2
    return rho >= floor * rho.max()


def _values(psi):
    return psi.values if isinstance(psi, ComplexField) else np.asarray(psi, dtype=complex)


def _wrap(like, values):
    return like.with_values(values) if isinstance(like, ComplexField) else values


def _check_finite(values, step_index):
    if not np.all(np.isfinite(values)):
        raise NumericalBlowupError("non-finite values in propagated field", step_index)


def _strang_1d(values, w_start, w_end, cfg, kin=None):
    dt, hbar = cfg.dt, cfg.hbar
    if kin is None:
        kin = cfg.kinetic_phase()
    out = values * np.exp(-0.5j * w_start * dt / hbar)
    out = sfft.ifft(sfft.fft(out) * kin)
    return out * np.exp(-0.5j * w_end * dt / hbar)


def step_1d(psi, v_slice, cfg: SolverConfig, v_end=None, *, step_index=None, kin=None):
    """One unitary split step with the conditional potential frozen (or given at both ends)."""
    v_slice = np.asarray(v_slice, dtype=float)
    v_end = v_slice if v_end is None else np.asarray(v_end, dtype=float)
    out = _strang_1d(_values(psi), v_slice, v_end, cfg, kin)
    _check_finite(out, step_index)
    return _wrap(psi, out)


def step_1d_nonunitary(
    psi, v_real, v_complex, cfg: SolverConfig, v_real_end=None, v_complex_end=None,
    *, step_index=None, kin=None,
):
    """One split step of i hbar psi_t = -hbar^2/2m psi'' + (v_real + v_complex) psi."""
    values = _values(psi)
    w_start = np.asarray(v_real, dtype=float) + np.asarray(v_complex, dtype=complex)
    if v_real_end is None and v_complex_end is None:
        w_end = w_start
    else:
        vr = v_real if v_real_end is None else v_real_end
        vc = v_complex if v_complex_end is None else v_complex_end
        w_end = np.asarray(vr, dtype=float) + np.asarray(vc, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _strang_1d(values, w_start, w_end, cfg, kin)
    _check_finite(out, step_index)
    before = np.sum(np.abs(values) ** 2)
    after = np.sum(np.abs(out) ** 2)
    if before > 0 and after > NONUNITARY_GROWTH_LIMIT * before:
        raise NumericalBlowupError(
            f"norm grew by {after / before:.3g}x in one non-unitary step", step_index
        )
    return _wrap(psi, out)


class Propagator2D:
    """Cached-phase Strang stepper for a time-independent 2D potential."""

    def __init__(self, potential, cfg: SolverConfig, t0=0.0):
        if cfg.ndim != 2:
            raise InvalidArgumentError("Propagator2D needs a two-grid SolverConfig")
        self.cfg = cfg
        self.potential = potential
        self.v = sample_grid(potential, cfg.grids[0], cfg.grids[1], t0)
        self.half = np.exp(-0.5j * self.v * cfg.dt / cfg.hbar)
        self.kin = cfg.kinetic_phase()

    def step(self, values, step_index=None):
        out = values * self.half
        out = sfft.ifft2(sfft.fft2(out) * self.kin)
        out *= self.half
        _check_finite(out, step_index)
        return out


def step_2d(psi, p, t, cfg: SolverConfig, *, step_index=None):
    """Advance the two-particle field by one step of the full Schrödinger equation."""
    if cfg.ndim != 2:
        raise InvalidArgumentError("step_2d needs a two-grid SolverConfig")
    g1, g2 = cfg.grids
    values = _values(psi)
    v_start = sample_grid(p, g1, g2, t)
    if getattr(p, "time_dependent", False):
        v_end = sample_grid(p, g1, g2, t + cfg.dt)
    else:
        v_end = v_start
    out = values * np.exp(-0.5j * v_start * cfg.dt / cfg.hbar)
    out = sfft.ifft2(sfft.fft2(out) * cfg.kinetic_phase())
    out *= np.exp(-0.5j * v_end * cfg.dt / cfg.hbar)
    _check_finite(out, step_index)
    return _wrap(psi, out)


def energy_expectation(psi, v, cfg: SolverConfig):
    """<H> / <psi|psi> with the kinetic part evaluated spectrally."""
    values = _values(psi)
    spec = sfft.fftn(values)
    ks = np.meshgrid(*[g.k for g in cfg.grids], indexing="ij")
    t_k = sum(cfg.hbar**2 * k**2 / (2 * m) for k, m in zip(ks, cfg.masses))
    rho_k = np.abs(spec) ** 2
    kinetic = np.sum(t_k * rho_k) / np.sum(rho_k)
    rho = np.abs(values) ** 2
    potential = np.sum(np.asarray(v) * rho) / np.sum(rho)
    return float(kinetic + potential)

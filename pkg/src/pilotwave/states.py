"""Analytic single-particle states used as initial conditions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ComplexField, SpatialGrid


@dataclass(frozen=True)
class GaussianPacket:
    """exp(-(x-c)^2 / (2 w^2) + i k0 (x-c)), unit-normalized.

    ``width`` is w, so a width of sqrt(hbar/(m omega)) is the trap ground state.
    """

    center: float
    width: float
    k0: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = x - self.center
        norm = (np.pi * self.width**2) ** -0.25
        return norm * np.exp(-(u**2) / (2 * self.width**2) + 1j * self.k0 * u)

    def on(self, grid: SpatialGrid) -> ComplexField:
        return ComplexField(self(grid.x), (grid,))

    def log_derivatives(self, x):
        """(psi'/psi, psi''/psi) at ``x``."""
        g = -(np.asarray(x, dtype=float) - self.center) / self.width**2 + 1j * self.k0
        return g, g * g - 1.0 / self.width**2


def hermite_functions(n_max, x, width):
    """Orthonormal oscillator eigenfunctions phi_0..phi_{n_max-1} of length scale ``width``.

    Uses the stable three-term recurrence for normalized Hermite functions.
    """
    xi = np.asarray(x, dtype=float) / width
    out = np.zeros((n_max,) + xi.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * xi**2) / np.sqrt(width)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for n in range(2, n_max):
        out[n] = np.sqrt(2.0 / n) * xi * out[n - 1] - np.sqrt((n - 1) / n) * out[n - 2]
    return out


def product_state(alpha: ComplexField, beta: ComplexField) -> ComplexField:
    return ComplexField(np.outer(alpha.values, beta.values), (alpha.grid, beta.grid))

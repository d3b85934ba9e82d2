"""Column-oriented time series produced by every engine."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .units import ELECTRON_MASS

COLUMNS = ("t_fs", "X1_nm", "X2_nm", "V1_nm_per_fs", "V2_nm_per_fs", "KE1_eV", "KE2_eV",
           "norm1", "norm2")


@dataclass
class TrajectorySeries:
    masses: tuple = (ELECTRON_MASS, ELECTRON_MASS)
    rows: list = field(default_factory=list)

    def append(self, state, norm1, norm2):
        ke1 = 0.5 * self.masses[0] * state.V1**2
        ke2 = 0.5 * self.masses[1] * state.V2**2
        self.rows.append((state.t, state.X1, state.X2, state.V1, state.V2, ke1, ke2,
                          float(norm1), float(norm2)))

    def __len__(self):
        return len(self.rows)

    def as_array(self):
        if not self.rows:
            return np.empty((0, len(COLUMNS)))
        return np.array(self.rows, dtype=float)

    def column(self, name):
        return self.as_array()[:, COLUMNS.index(name)]

    @property
    def t(self):
        return self.column("t_fs")

    @property
    def X1(self):
        return self.column("X1_nm")

    @property
    def X2(self):
        return self.column("X2_nm")

    @property
    def V1(self):
        return self.column("V1_nm_per_fs")

    @property
    def V2(self):
        return self.column("V2_nm_per_fs")

    @property
    def KE1(self):
        return self.column("KE1_eV")

    @property
    def KE2(self):
        return self.column("KE2_eV")


@dataclass
class Diagnostics:
    node_floor_hits: int = 0
    renormalizations: int = 0
    tower_blowup_step: int | None = None
    max_norm_drift: float = 0.0
    max_edge_fraction: float | None = None

    def as_dict(self):
        return {
            "node_floor_hits": self.node_floor_hits,
            "renormalizations": self.renormalizations,
            "tower_blowup_step": self.tower_blowup_step,
            "max_relative_norm_drift": self.max_norm_drift,
            "max_edge_density_fraction": self.max_edge_fraction,
        }


@dataclass
class RunResult:
    engine: str
    series: TrajectorySeries
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    failure: str | None = None
    failure_step: int | None = None

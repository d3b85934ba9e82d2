"""Internal unit system: nm, fs, eV."""
from dataclasses import dataclass

HBAR = 0.6582119569  # eV fs
ELECTRON_MASS = 5.68563  # eV fs^2 / nm^2
EV_PER_M2_TO_EV_PER_NM2 = 1e-18


@dataclass(frozen=True)
class UnitSystem:
    hbar: float = HBAR
    electron_mass: float = ELECTRON_MASS
    length_unit: str = "nm"
    time_unit: str = "fs"
    energy_unit: str = "eV"

    def declaration(self):
        return {
            "length": self.length_unit,
            "time": self.time_unit,
            "energy": self.energy_unit,
            "hbar_eV_fs": self.hbar,
            "electron_mass_eV_fs2_per_nm2": self.electron_mass,
        }


UNITS = UnitSystem()


def stiffness_from_si(value_eV_per_m2):
    """Convert a quadratic coefficient from eV m^-2 to eV nm^-2."""
    return float(value_eV_per_m2) * EV_PER_M2_TO_EV_PER_NM2


def harmonic_frequency(F, mass=ELECTRON_MASS):
    """Angular frequency of V = F x^2 (F in eV nm^-2), in 1/fs."""
    return (2.0 * F / mass) ** 0.5


def ground_state_width(F, mass=ELECTRON_MASS, hbar=HBAR):
    """sqrt(hbar / (m omega)) for the trap V = F x^2, in nm."""
    return (hbar / (mass * harmonic_frequency(F, mass))) ** 0.5

"""Impulsive measurement toy: branch construction, collapse, and outcome statistics.

A system particle (x1) in a superposition sum_n c_n alpha_n is coupled to a
pointer particle (x2) by an instantaneous kick that shifts the pointer packet
by lambda * a_n in each branch. The pointer's actual position then selects a
branch, and the system's conditional field collapses onto that eigenstate.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bohm import _inverse_cdf
from .conditional import ConditionalExtractor
from .core import ComplexField, SpatialGrid
from .errors import ConfigError, InvalidArgumentError, InvalidGridError
from .states import GaussianPacket, hermite_functions
from .units import ELECTRON_MASS, HBAR, ground_state_width, stiffness_from_si

__all__ = [
    "RESOLVED_SEPARATION",
    "MeasurementModel",
    "CollapseResult",
    "BornStatistics",
    "oscillator_model",
    "apply_kick",
    "collapse_outcome",
    "born_statistics",
    "load_measurement",
    "model_from_dict",
]

RESOLVED_SEPARATION = 5.0  # branch separation in pointer widths
AMBIGUOUS_SHARE = 0.9
EDGE_LIMIT = 1e-8
CHUNK = 1000


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    eigenstates: tuple
    eigenvalues: np.ndarray
    coefficients: np.ndarray
    pointer_width: float
    kick: float
    pointer_grid: SpatialGrid

    def __post_init__(self):
        a = np.asarray(self.eigenvalues, dtype=float)
        c = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "eigenvalues", a)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "eigenstates", tuple(self.eigenstates))
        n = len(self.eigenstates)
        if n == 0 or a.shape != (n,) or c.shape != (n,):
            raise InvalidArgumentError("need one eigenvalue and coefficient per eigenstate")
        if not self.pointer_width > 0:
            raise InvalidArgumentError("pointer width must be positive")
        if abs(np.sum(np.abs(c) ** 2) - 1) > 1e-8:
            raise InvalidArgumentError(f"sum |c_n|^2 = {np.sum(np.abs(c) ** 2):.10g}, not 1")
        gram = self.gram()
        if np.max(np.abs(gram - np.eye(n))) > 1e-8:
            raise InvalidArgumentError("eigenstates are not orthonormal on the grid")

    @property
    def system_grid(self):
        return self.eigenstates[0].grid

    @property
    def weights(self):
        return np.abs(self.coefficients) ** 2

    @property
    def centers(self):
        """Pointer packet centres lambda * a_n after the kick."""
        return self.kick * self.eigenvalues

    def gram(self):
        m = np.array([e.values for e in self.eigenstates])
        return m.conj() @ m.T * self.system_grid.dx

    @property
    def separation(self):
        """Smallest distance between distinct pointer centres, in pointer widths."""
        c = np.unique(self.centers)
        if c.size < 2:
            return np.inf
        return float(np.min(np.diff(c)) / self.pointer_width)

    @property
    def resolved(self):
        return self.separation >= RESOLVED_SEPARATION

    def pointer(self, center=0.0):
        return GaussianPacket(center, self.pointer_width)


def oscillator_model(coefficients, eigenvalues=None, *, F_eV_per_m2=1e12, mass=ELECTRON_MASS,
                     pointer_width=None, separation=10.0, system_grid=None, pointer_grid=None,
                     hbar=HBAR):
    """Model with the lowest trap eigenfunctions as the measured basis.

    ``separation`` (in pointer widths) fixes the kick when ``eigenvalues`` are
    the default 0, 1, 2, ...; the pointer width defaults to the trap width.
    """
    c = np.asarray(coefficients, dtype=complex)
    n = c.size
    a = np.arange(n, dtype=float) if eigenvalues is None else np.asarray(eigenvalues, float)
    w_trap = ground_state_width(stiffness_from_si(F_eV_per_m2), mass, hbar)
    w = w_trap if pointer_width is None else pointer_width
    gaps = np.diff(np.unique(a))
    kick = separation * w / (gaps.min() if gaps.size else 1.0)
    if system_grid is None:
        half = 16.0 * w_trap
        system_grid = SpatialGrid(-half, half, 256)
    if pointer_grid is None:
        centers = kick * a
        lo, hi = centers.min() - 12 * w, centers.max() + 12 * w
        n_pts = 1 << int(np.ceil(np.log2(max(64, (hi - lo) / (w / 4)))))
        pointer_grid = SpatialGrid(lo, hi, n_pts)
    basis = hermite_functions(n, system_grid.x, w_trap)
    states = [ComplexField(b.astype(complex), (system_grid,)) for b in basis]
    return MeasurementModel(states, a, c, w, kick, pointer_grid)


def apply_kick(model: MeasurementModel) -> ComplexField:
    """Post-kick field sum_n c_n alpha_n(x1) beta(x2 - lambda a_n), built branch by branch."""
    g2 = model.pointer_grid
    out = np.zeros((model.system_grid.n_points, g2.n_points), complex)
    for alpha, a, c in zip(model.eigenstates, model.eigenvalues, model.coefficients):
        center = model.kick * a
        if not g2.contains(center):
            raise ConfigError(f"shifted pointer packet centre {center:.6g} nm leaves the grid",
                              field="grid2")
        beta = model.pointer(center).on(g2).values
        edge = max(abs(beta[0]), abs(beta[-1])) ** 2 / np.max(np.abs(beta)) ** 2
        if edge > EDGE_LIMIT:
            raise ConfigError(f"shifted pointer packet reaches the grid edge ({edge:.2e} of peak)",
                              field="grid2")
        out += c * np.outer(alpha.values, beta)
    return ComplexField(out, (model.system_grid, g2))


@dataclass(frozen=True, eq=False)
class CollapseResult:
    branch: int
    psi1: ComplexField
    ambiguous: bool
    fidelity: float


def _classify(model, x2):
    """Nearest-centre branch and the winner's share of the c-weighted branch density."""
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    d = x2[:, None] - model.centers[None, :]
    logb = -(d**2) / (2 * model.pointer_width**2)
    branch = np.argmax(logb, axis=1)
    lw = logb + np.log(np.maximum(model.weights, 1e-300))[None, :]
    lw -= lw.max(axis=1, keepdims=True)
    p = np.exp(lw)
    share = p[np.arange(x2.size), branch] / p.sum(axis=1)
    # exact ties between distinct centres are never a measurement
    tie = np.sum(np.isclose(logb, logb.max(axis=1, keepdims=True), rtol=0, atol=1e-12), axis=1) > 1
    ambiguous = tie | (share < AMBIGUOUS_SHARE) | (not model.resolved)
    return branch, ambiguous


def _fidelities(model, cols, branch):
    alpha = np.array([e.values for e in model.eigenstates])
    dx = model.system_grid.dx
    overlap = np.abs(np.sum(alpha[branch].conj().T * cols, axis=0)) * dx
    norms = np.sqrt(np.sum(np.abs(cols) ** 2, axis=0) * dx)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norms > 0, overlap / norms, 0.0)


def collapse_outcome(psi_post: ComplexField, model: MeasurementModel, x2_sample: float, *,
                     extractor=None) -> CollapseResult:
    """Select the branch by the pointer position and return the conditional system field."""
    ex = extractor or ConditionalExtractor(psi_post, 1)
    col = ex.derivatives(float(x2_sample), (0,))[0]
    branch, ambiguous = _classify(model, x2_sample)
    fid = _fidelities(model, col[:, None], branch)[0]
    psi1 = ComplexField(col, (model.system_grid,))
    return CollapseResult(int(branch[0]), psi1, bool(ambiguous[0]), float(fid))


@dataclass
class BornStatistics:
    counts: np.ndarray
    weights: np.ndarray
    samples: np.ndarray
    branches: np.ndarray
    fidelities: np.ndarray
    ambiguous: np.ndarray

    @property
    def n_samples(self):
        return int(self.samples.size)

    @property
    def frequencies(self):
        return self.counts / max(self.n_samples, 1)

    def sigma(self):
        """Binomial standard deviation of each frequency."""
        return np.sqrt(self.weights * (1 - self.weights) / max(self.n_samples, 1))


def _pointer_marginal(psi_post):
    rho = np.abs(psi_post.values) ** 2
    return rho.sum(axis=0) * psi_post.grids[0].dx


def born_statistics(model: MeasurementModel, n_samples: int, seed: int, *, threads=1,
                    psi_post=None) -> BornStatistics:
    """Sample X2(0+) from the pointer marginal of |Psi(0+)|^2 and classify each sample.

    Samples are drawn in fixed chunks with child seeds of ``seed``, so the
    result does not depend on ``threads``.
    """
    if n_samples < 0:
        raise InvalidArgumentError("n_samples must be >= 0")
    psi_post = apply_kick(model) if psi_post is None else psi_post
    g2 = model.pointer_grid
    marginal = _pointer_marginal(psi_post)
    ex = ConditionalExtractor(psi_post, 1)
    sizes = [min(CHUNK, n_samples - i) for i in range(0, n_samples, CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def chunk(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        idx = _inverse_cdf(marginal, rng.random(size))
        x2 = g2.x_min + np.mod(g2.dx * (idx + rng.random(size) - 0.5), g2.length)
        branch, amb = _classify(model, x2)
        basis = np.exp(1j * np.outer(g2.k, x2 - g2.x_min))
        cols = ex.phi @ basis
        return x2, branch, amb, _fidelities(model, cols, branch)

    jobs = list(zip(sizes, seeds))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, jobs))
    else:
        parts = [chunk(j) for j in jobs]
    if parts:
        x2, br, amb, fid = (np.concatenate(p) for p in zip(*parts))
    else:
        x2, br, amb, fid = np.empty(0), np.empty(0, int), np.empty(0, bool), np.empty(0)
    counts = np.bincount(br.astype(int), minlength=len(model.eigenstates))
    return BornStatistics(counts, model.weights, x2, br.astype(int), fid, amb.astype(bool))


def _coefficient(v, i):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    try:
        return complex(float(v))
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number or [re, im], got {v!r}",
                          field=f"coefficients[{i}]") from None


def model_from_dict(d: dict) -> MeasurementModel:
    """Measurement model document: trap eigenstates as the measured basis.

    Required: ``coefficients``. Optional: ``eigenvalues``, ``F_eV_per_m2``,
    ``m1_electron_masses``, ``pointer_width_nm``, ``separation_widths`` or
    ``kick_nm_per_unit``, ``grid1`` and ``grid2``.
    """
    if not isinstance(d, dict):
        raise ConfigError("measurement model must be a JSON object")
    if "coefficients" not in d or not isinstance(d["coefficients"], list) or not d["coefficients"]:
        raise ConfigError("missing or empty coefficient list", field="coefficients")
    c = np.array([_coefficient(v, i) for i, v in enumerate(d["coefficients"])])
    total = np.sum(np.abs(c) ** 2)
    if abs(total - 1) > 1e-8:
        raise ConfigError(f"sum |c_n|^2 = {total:.10g}, must be 1", field="coefficients")

    def num(key, default):
        v = d.get(key, default)
        try:
            return None if v is None else float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"expected a number, got {v!r}", field=key) from None

    a = d.get("eigenvalues")
    if a is not None:
        if not isinstance(a, list) or len(a) != c.size:
            raise ConfigError("need one eigenvalue per coefficient", field="eigenvalues")
        a = [float(x) for x in a]
    grids = {}
    for key in ("grid1", "grid2"):
        if key in d:
            sub = d[key]
            try:
                grids[key] = SpatialGrid(float(sub["x_min_nm"]), float(sub["x_max_nm"]),
                                         int(sub["n_points"]))
            except (KeyError, TypeError, ValueError, InvalidGridError) as exc:
                raise ConfigError(f"bad grid: {exc}", field=key) from None
    mass = num("m1_electron_masses", 1.0) * ELECTRON_MASS
    width = num("pointer_width_nm", None)
    sep = num("separation_widths", 10.0)
    try:
        model = oscillator_model(c, a, F_eV_per_m2=num("F_eV_per_m2", 1e12), mass=mass,
                                 pointer_width=width, separation=sep,
                                 system_grid=grids.get("grid1"), pointer_grid=grids.get("grid2"))
        if "kick_nm_per_unit" in d:
            model = MeasurementModel(model.eigenstates, model.eigenvalues, model.coefficients,
                                     model.pointer_width, num("kick_nm_per_unit", None),
                                     grids.get("grid2", model.pointer_grid))
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None
    if not model.resolved:
        raise ConfigError(
            f"branches unresolved: separation {model.separation:.3g} w < "
            f"{RESOLVED_SEPARATION:g} w (w = {model.pointer_width:.6g} nm)",
            field="separation_widths")
    apply_kick(model)  # grid containment check
    return model


def load_measurement(path) -> MeasurementModel:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return model_from_dict(d)

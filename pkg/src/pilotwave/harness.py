"""Scenarios, the exact two-particle reference run, and engine comparisons."""
from __future__ import annotations

import copy
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bohm import TrajectoryState, advance_trajectory, sample_equilibrium, velocity_2d
from .conditional import ConditionalExtractor, extract_conditional, tower_from_oracle, tower_inputs, step_tower_ab
from .core import ComplexField, SpatialGrid, SpectralPointEvaluator, norm_squared
from .errors import (
    AlignmentError,
    ConfigError,
    InvalidArgumentError,
    InvalidGridError,
    PilotwaveError,
)
from .potentials import HarmonicCoupled, sample_grid
from .records import Diagnostics, RunResult, TrajectorySeries
from .sea import Level, initial_sea_state, run_sea
from .solvers import Propagator2D, SolverConfig, energy_expectation
from .states import GaussianPacket, product_state
from .units import ELECTRON_MASS, ground_state_width, harmonic_frequency, stiffness_from_si

__all__ = [
    "ENGINES",
    "ScenarioConfig",
    "ComparisonRecord",
    "Comparison",
    "scenario_from_dict",
    "load_scenario",
    "benchmark_dict",
    "run_exact_reference",
    "ExactStepper",
    "TowerValidation",
    "validate_towers",
    "trap_period",
    "edge_fraction",
    "run_engine",
    "deviation",
    "run_comparison",
]

ENGINES = ("exact2d", "sea0", "sea2", "oraclefed")
REQUIRED = ("F_eV_per_m2", "C_eV_per_m2", "packet1", "packet2", "grid1", "grid2", "dt_fs",
            "n_steps")


@dataclass(frozen=True)
class ScenarioConfig:
    """A parsed scenario in internal units (nm, fs, eV)."""

    potential: HarmonicCoupled
    masses: tuple
    packet1: GaussianPacket
    packet2: GaussianPacket
    X0: tuple
    grid1: SpatialGrid
    grid2: SpatialGrid
    dt: float
    n_steps: int
    record_every: int = 1
    engines: tuple = ("exact2d", "sea0")
    seed: int = 0
    n_corrector: int = 1
    raw: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def solver(self):
        return SolverConfig(self.dt, self.masses, (self.grid1, self.grid2))

    @property
    def C_si(self):
        return self.raw.get("C_eV_per_m2")

    def initial_field(self):
        return product_state(self.packet1.on(self.grid1), self.packet2.on(self.grid2))

    def with_changes(self, **changes):
        """Re-parse with top-level raw keys replaced (e.g. ``C_eV_per_m2``)."""
        raw = copy.deepcopy(self.raw)
        raw.update(changes)
        return scenario_from_dict(raw)


def _get(d, key, kind=float, where=None, default=..., positive=False):
    name = key if where is None else f"{where}.{key}"
    if key not in d:
        if default is ...:
            raise ConfigError("missing required field", field=name)
        return default
    value = d[key]
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            value = int(value)
        else:
            value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", field=name) from None
    if kind is float and not math.isfinite(value):
        raise ConfigError("value must be finite", field=name)
    if positive and not value > 0:
        raise ConfigError("value must be positive", field=name)
    return value


def _section(d, key):
    sub = d.get(key)
    if not isinstance(sub, dict):
        raise ConfigError("expected an object", field=key)
    return sub


def _grid(d, key):
    sub = _section(d, key)
    try:
        return SpatialGrid(_get(sub, "x_min_nm", where=key), _get(sub, "x_max_nm", where=key),
                           _get(sub, "n_points", int, where=key))
    except InvalidGridError as exc:
        raise ConfigError(str(exc), field=key) from None


def _packet(d, key):
    sub = _section(d, key)
    return GaussianPacket(_get(sub, "center_nm", where=key),
                          _get(sub, "width_nm", where=key, positive=True),
                          _get(sub, "k0_per_nm", where=key, default=0.0))


def scenario_from_dict(d: dict) -> ScenarioConfig:
    """Validate a scenario document and convert to internal units.

    Raises :class:`ConfigError` naming the offending field; dt is checked
    against the stepping limits here, before anything runs.
    """
    if not isinstance(d, dict):
        raise ConfigError("scenario must be a JSON object")
    for key in REQUIRED:
        if key not in d:
            raise ConfigError("missing required field", field=key)
    F = stiffness_from_si(_get(d, "F_eV_per_m2"))
    C = stiffness_from_si(_get(d, "C_eV_per_m2"))
    m1 = _get(d, "m1_electron_masses", default=1.0, positive=True) * ELECTRON_MASS
    m2 = _get(d, "m2_electron_masses", default=1.0, positive=True) * ELECTRON_MASS
    p1, p2 = _packet(d, "packet1"), _packet(d, "packet2")
    g1, g2 = _grid(d, "grid1"), _grid(d, "grid2")
    dt = _get(d, "dt_fs", positive=True)
    n_steps = _get(d, "n_steps", int)
    if n_steps < 0:
        raise ConfigError("must be >= 0", field="n_steps")
    record_every = _get(d, "record_every", int, default=1)
    if record_every < 1:
        raise ConfigError("must be >= 1", field="record_every")
    seed = _get(d, "seed", int, default=0)
    n_corr = _get(d, "n_corrector", int, default=1)
    engines = d.get("engines", ["exact2d", "sea0"])
    if isinstance(engines, str):
        engines = [e.strip() for e in engines.split(",") if e.strip()]
    if not isinstance(engines, list) or not engines:
        raise ConfigError("expected a non-empty list of engines", field="engines")
    for e in engines:
        if e not in ENGINES:
            raise ConfigError(f"unknown engine {e!r}; choose from {ENGINES}", field="engines")

    for name, g, p in (("packet1", g1, p1), ("packet2", g2, p2)):
        if not g.contains(p.center):
            raise ConfigError("packet centre outside grid", field=f"{name}.center_nm")

    init = d.get("initial_positions", "centers")
    if init == "centers":
        X0 = (p1.center, p2.center)
    elif init == "equilibrium":
        ens = sample_equilibrium(product_state(p1.on(g1), p2.on(g2)), 1, seed)
        X0 = (float(ens.X1[0]), float(ens.X2[0]))
    elif isinstance(init, dict):
        X0 = (_get(init, "X1_nm", where="initial_positions"),
              _get(init, "X2_nm", where="initial_positions"))
    else:
        raise ConfigError("expected 'centers', 'equilibrium' or {X1_nm, X2_nm}",
                          field="initial_positions")
    if not g1.contains(X0[0]):
        raise ConfigError("initial position outside grid1", field="initial_positions.X1_nm")
    if not g2.contains(X0[1]):
        raise ConfigError("initial position outside grid2", field="initial_positions.X2_nm")

    potential = HarmonicCoupled(F, C)
    try:
        solver = SolverConfig(dt, (m1, m2), (g1, g2))
        psi0 = product_state(p1.on(g1), p2.on(g2))
        solver.check_potential(sample_grid(potential, g1, g2), psi0)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), field="dt_fs") from None

    return ScenarioConfig(potential, (m1, m2), p1, p2, X0, g1, g2, dt, n_steps, record_every,
                          tuple(engines), seed, n_corr, raw=copy.deepcopy(d))


def load_scenario(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return scenario_from_dict(d)


def benchmark_dict(C_eV_per_m2=-1e12, *, n_periods=3.0, steps_per_period=2000, n_points=None,
                   dx_nm=4.0, engines=("exact2d", "sea0"), offset_widths=(-0.023, 0.044)):
    """The shipped harmonic benchmark as a scenario document.

    Packets have the trap ground-state width w; packet 1 is displaced by 2w,
    packet 2 sits at the trap centre; the particles start ``offset_widths``
    (in units of w) away from the packet centres. At C = -2F the centre-of-mass
    mode is unconfined and spreads freely, so the default box is doubled once
    |C| > 1.5F to keep the boundary density below 1e-8 of peak.
    """
    F_si = 1e12
    if n_points is None:
        n_points = 512 if abs(C_eV_per_m2) > 1.5 * F_si else 256
    F = stiffness_from_si(F_si)
    w = ground_state_width(F)
    period = 2 * math.pi / harmonic_frequency(F)
    half = 0.5 * n_points * dx_nm
    grid = {"x_min_nm": -half, "x_max_nm": half, "n_points": n_points}
    c1, c2 = 2.0 * w, 0.0
    return {
        "name": f"harmonic benchmark C={C_eV_per_m2:g} eV/m^2",
        "F_eV_per_m2": F_si,
        "C_eV_per_m2": C_eV_per_m2,
        "m1_electron_masses": 1.0,
        "m2_electron_masses": 1.0,
        "packet1": {"center_nm": c1, "width_nm": w, "k0_per_nm": 0.0},
        "packet2": {"center_nm": c2, "width_nm": w, "k0_per_nm": 0.0},
        "initial_positions": {"X1_nm": c1 + offset_widths[0] * w,
                              "X2_nm": c2 + offset_widths[1] * w},
        "grid1": dict(grid),
        "grid2": dict(grid),
        "dt_fs": period / steps_per_period,
        "n_steps": int(round(n_periods * steps_per_period)),
        "record_every": 10,
        "engines": list(engines),
        "seed": 0,
    }


def trap_period(cfg: ScenarioConfig):
    return 2 * math.pi / harmonic_frequency(cfg.potential.F, cfg.masses[0])


def edge_fraction(psi: ComplexField):
    """Largest density on the box boundary relative to the peak density."""
    rho = np.abs(psi.values) ** 2
    edge = max(float(np.max(np.moveaxis(rho, ax, 0)[[0, -1]])) for ax in range(rho.ndim))
    return edge / float(rho.max())


@dataclass
class ExactRun(RunResult):
    snapshots: list = field(default_factory=list)


class ExactStepper:
    """The two-particle field and the Bohmian configuration stepped together.

    Velocities come from the trigonometric interpolant of the field and its
    gradient; the trajectory is advanced by Heun with the stepped field at t+dt.
    """

    def __init__(self, cfg: ScenarioConfig, psi0: ComplexField = None, X0=None):
        self.cfg = cfg
        self.solver = cfg.solver
        self.prop = Propagator2D(cfg.potential, self.solver)
        self.psi = cfg.initial_field() if psi0 is None else psi0
        self.ev = SpectralPointEvaluator(self.psi)
        self.v_max = (cfg.grid1.dx / cfg.dt, cfg.grid2.dx / cfg.dt)
        self.node_hits = 0
        self.step_count = 0
        X0 = cfg.X0 if X0 is None else X0
        v0 = self._vel(self.ev, self.psi, *X0)
        self.state = TrajectoryState(0.0, float(X0[0]), float(X0[1]), v0[0], v0[1])

    def _vel(self, ev, f, x1, x2):
        v, node = velocity_2d(f, x1, x2, self.cfg.masses, hbar=self.solver.hbar, evaluator=ev,
                              v_max=self.v_max, return_flag=True)
        self.node_hits += int(node)
        return v

    def step(self):
        k = self.step_count + 1
        new = self.psi.with_values(self.prop.step(self.psi.values, k))
        ev_new = SpectralPointEvaluator(new)
        old, ev_old, t0 = self.psi, self.ev, self.state.t

        def source(tq, x1, x2):
            if tq == t0:
                return self._vel(ev_old, old, x1, x2)
            return self._vel(ev_new, new, x1, x2)

        self.state = advance_trajectory(self.state, source, self.cfg.dt)
        self.psi, self.ev, self.step_count = new, ev_new, k
        return self.state


def run_exact_reference(cfg: ScenarioConfig, *, n_steps=None, record_every=None,
                        snapshot_energy=False, keep_field=False) -> ExactRun:
    """Exact-2D engine: records the trajectory (and optionally energy) every few steps."""
    n_steps = cfg.n_steps if n_steps is None else n_steps
    every = cfg.record_every if record_every is None else record_every
    stepper = ExactStepper(cfg)
    diag = Diagnostics()
    result = ExactRun("exact2d", TrajectorySeries(cfg.masses), diag)
    norm0 = norm_squared(stepper.psi)

    def record():
        psi = stepper.psi
        n = norm_squared(psi)
        result.series.append(stepper.state, n, n)
        if snapshot_energy:
            result.snapshots.append({
                "t_fs": stepper.state.t, "norm": n,
                "energy_eV": energy_expectation(psi, stepper.prop.v, stepper.solver)})
        diag.max_norm_drift = max(diag.max_norm_drift, abs(n / norm0 - 1))
        diag.max_edge_fraction = max(diag.max_edge_fraction or 0.0, edge_fraction(psi))

    record()
    for step in range(1, n_steps + 1):
        try:
            stepper.step()
        except PilotwaveError as exc:
            result.failure = f"{type(exc).__name__}: {exc}"
            result.failure_step = step
            exc.partial = result
            diag.node_floor_hits = stepper.node_hits
            raise
        if step % every == 0:
            record()
    diag.node_floor_hits = stepper.node_hits
    if keep_field:
        result.final_field = stepper.psi
    return result


@dataclass
class TowerValidation:
    """Relative L2 errors of evolved a, b against the oracle towers, per step."""

    t: np.ndarray
    err_a: np.ndarray
    err_b: np.ndarray
    final: object = None
    final_oracle: object = None

    @property
    def max_error(self):
        return float(max(self.err_a.max(), self.err_b.max())) if self.t.size else 0.0


def _oracle_tower(psi2d, which, q):
    ex = ConditionalExtractor(psi2d, which)
    sl = extract_conditional(None, which, q, extractor=ex)
    return sl, tower_from_oracle(sl, None, q, depth=4, extractor=ex)


def _rel_l2(x, ref, mask):
    den = np.linalg.norm(ref[mask])
    return float(np.linalg.norm((x - ref)[mask]) / (den if den > 0 else 1.0))


def validate_towers(cfg: ScenarioConfig, n_steps=200, which=1) -> TowerValidation:
    """SEA2 tower evolution in oracle-closure mode.

    a and b are evolved by their own equations; the closure fields c, d, the
    own log-derivative psi'/psi and the other particle's path all come from the
    exact two-particle run. Errors are measured on points above the node floor.
    """
    stepper = ExactStepper(cfg)
    grid = cfg.grid1 if which == 1 else cfg.grid2
    other = (lambda s: (s.X2, s.V2)) if which == 1 else (lambda s: (s.X1, s.V1))

    def inputs(psi2d, state):
        q, v = other(state)
        sl, orc = _oracle_tower(psi2d, which, q)
        return orc, tower_inputs(sl.psi, grid, cfg.potential, which, q, v, state.t, orc.c, orc.d)

    orc, inp = inputs(stepper.psi, stepper.state)
    tower = orc_e = orc
    t, ea, eb = [], [], []
    for _ in range(n_steps):
        stepper.step()
        orc_e, inp_e = inputs(stepper.psi, stepper.state)
        tower = step_tower_ab(tower, inp, cfg.dt, cfg.masses, inp_e, hbar=stepper.solver.hbar,
                              valid=orc_e.valid)
        t.append(stepper.state.t)
        ea.append(_rel_l2(tower.a, orc_e.a, orc_e.valid))
        eb.append(_rel_l2(tower.b, orc_e.b, orc_e.valid))
        inp = inp_e
    return TowerValidation(np.array(t), np.array(ea), np.array(eb), tower, orc_e)


def run_engine(cfg: ScenarioConfig, engine: str, *, n_steps=None, record_every=None) -> RunResult:
    if engine == "exact2d":
        return run_exact_reference(cfg, n_steps=n_steps, record_every=record_every)
    if engine not in ENGINES:
        raise InvalidArgumentError(f"unknown engine {engine!r}")
    level = Level(engine)
    state = initial_sea_state(cfg.packet1, cfg.packet2, cfg.grid1, cfg.grid2, *cfg.X0, level,
                              masses=cfg.masses)
    return run_sea(state, cfg.potential, cfg.solver,
                   cfg.n_steps if n_steps is None else n_steps,
                   cfg.record_every if record_every is None else record_every,
                   n_corrector=cfg.n_corrector, engine_name=engine)


def _times(series):
    return series.t if hasattr(series, "t") else np.asarray(series["t"])


def deviation(exact, approx, *, rtol=1e-9):
    """Configuration-space distance between two trajectory series at matched times (nm)."""
    te, ta = _times(exact), _times(approx)
    if te.shape != ta.shape or not np.allclose(te, ta, rtol=rtol, atol=1e-12):
        raise AlignmentError(f"time stamps differ ({len(te)} vs {len(ta)} records)")
    return np.hypot(exact.X1 - approx.X1, exact.X2 - approx.X2)


@dataclass(frozen=True)
class ComparisonRecord:
    t: float
    X: dict
    V: dict
    KE: dict
    deviation: dict


@dataclass
class Comparison:
    results: dict
    times: np.ndarray
    deviations: dict
    summary: dict

    @property
    def failures(self):
        return {k: r.failure for k, r in self.results.items() if r.failure}

    def records(self):
        """One :class:`ComparisonRecord` per shared time stamp."""
        cols = {e: r.series.as_array() for e, r in self.results.items()}
        out = []
        for i, t in enumerate(self.times):
            live = {e: a[i] for e, a in cols.items() if len(a) > i}
            X = {e: (row[1], row[2]) for e, row in live.items()}
            V = {e: (row[3], row[4]) for e, row in live.items()}
            KE = {e: (row[5], row[6]) for e, row in live.items()}
            dev = {p: float(d[i]) for p, d in self.deviations.items()}
            out.append(ComparisonRecord(float(t), X, V, KE, dev))
        return out


def engine_pairs(engines):
    engines = list(engines)
    if "exact2d" in engines:
        return [("exact2d", e) for e in engines if e != "exact2d"]
    return [(a, b) for i, a in enumerate(engines) for b in engines[i + 1:]]


def _run_safely(cfg, engine):
    try:
        return run_engine(cfg, engine)
    except PilotwaveError as exc:
        partial = getattr(exc, "partial", None)
        if partial is None:
            partial = RunResult(engine, TrajectorySeries(cfg.masses))
            partial.failure = f"{type(exc).__name__}: {exc}"
        return partial


class _Truncated:
    def __init__(self, series, n):
        self.t, self.X1, self.X2 = series.t[:n], series.X1[:n], series.X2[:n]


def run_comparison(cfg: ScenarioConfig, *, threads=1) -> Comparison:
    """Run every enabled engine from the same initial packets and positions.

    An engine that fails keeps its partial records; deviations are then
    computed over the common prefix.
    """
    if len(cfg.engines) < 2:
        raise InvalidArgumentError("a comparison needs at least two engines")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda e: _run_safely(cfg, e), cfg.engines))
    else:
        runs = [_run_safely(cfg, e) for e in cfg.engines]
    results = dict(zip(cfg.engines, runs))
    n = min(len(r.series) for r in runs)
    times = runs[0].series.t[:n] if n else np.empty(0)
    deviations, summary = {}, {}
    for a, b in engine_pairs(cfg.engines):
        d = deviation(_Truncated(results[a].series, n), _Truncated(results[b].series, n))
        key = f"{a}_vs_{b}"
        deviations[key] = d
        summary[key] = {
            "mean_deviation_nm": float(np.mean(d)) if n else float("nan"),
            "max_deviation_nm": float(np.max(d)) if n else float("nan"),
            "n_records": int(n),
        }
    return Comparison(results, times, deviations, summary)

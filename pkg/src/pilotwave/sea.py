"""Coupled single-particle pilot waves in physical space.

Each particle carries its own field psi_i(x, t) on a 1D grid. The fields are
coupled only through the particles' actual positions (and, at the higher
levels, velocities and tower fields):

* ``SEA0``   -- conditional potential only, V(x, X_other).
* ``SEA2``   -- plus A, B built from dynamical a, b fields closed with c = d = 0.
* ``ORACLE`` -- A, B taken from a co-evolved two-particle field; reproduces the
  exact Bohmian trajectories up to discretization error.

A step moves both fields first (potential half-kicks at the start and the
predicted end of the step), then both particles by Heun with their own
fields' guidance velocities. ``n_corrector`` extra passes re-do the field step
with the corrected end-of-step positions.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .bohm import TrajectoryState, advance_trajectory, velocity_1d
from .conditional import (
    ConditionalExtractor,
    TowerFields,
    effective_terms,
    extract_conditional,
    step_tower_ab,
    tower_from_oracle,
    tower_inputs,
    valid_mask,
)
from .core import ComplexField, SpectralPointEvaluator, norm_squared
from .errors import InvalidArgumentError, NumericalBlowupError, PilotwaveError
from .potentials import conditional_slice
from .records import Diagnostics, RunResult, TrajectorySeries
from .solvers import Propagator2D, SolverConfig, step_1d, step_1d_nonunitary
from .states import product_state
from .units import ELECTRON_MASS, HBAR

__all__ = ["Level", "SeaState", "initial_sea_state", "sea_step", "run_sea"]

RENORM_RANGE = (1e-3, 1e3)
# SEA2 evolves a, b only where the field carries at least this fraction of its peak density
TOWER_FLOOR = 1e-8


class Level(str, enum.Enum):
    SEA0 = "sea0"
    SEA2 = "sea2"
    ORACLE = "oraclefed"


@dataclass(frozen=True, eq=False)
class SeaState:
    t: float
    psi1: ComplexField
    psi2: ComplexField
    traj: TrajectoryState
    level: Level = Level.SEA0
    tower1: TowerFields | None = None
    tower2: TowerFields | None = None
    oracle: ComplexField | None = None
    node_hits: int = 0
    renormalizations: int = 0
    tower_blowup: bool = False
    norm_scale: tuple = (1.0, 1.0)

    def __post_init__(self):
        level = Level(self.level)
        object.__setattr__(self, "level", level)
        if level is Level.SEA2 and (self.tower1 is None or self.tower2 is None):
            raise InvalidArgumentError("SEA2 state needs both tower fields")
        if level is Level.ORACLE and self.oracle is None:
            raise InvalidArgumentError("oracle-fed state needs the two-particle field")
        self.psi1.grid.check_inside(self.traj.X1, "X1")
        self.psi2.grid.check_inside(self.traj.X2, "X2")


def _constant_tower(grid, which, logs):
    a, b = logs
    n = grid.n_points
    return TowerFields(np.full(n, a, complex), np.full(n, b, complex), grid, which,
                       scale=max(abs(a), 1.0 / grid.dx))


def initial_sea_state(packet1, packet2, grid1, grid2, X1, X2, level=Level.SEA0,
                      masses=(ELECTRON_MASS, ELECTRON_MASS), hbar=HBAR) -> SeaState:
    """Product-state start: psi_i are the packets; towers from the packets' log-derivatives.

    Velocities in the returned trajectory state are those of the initial fields.
    """
    level = Level(level)
    psi1, psi2 = packet1.on(grid1), packet2.on(grid2)
    tower1 = tower2 = oracle = None
    if level is Level.SEA2:
        tower1 = _constant_tower(grid1, 1, packet2.log_derivatives(X2))
        tower2 = _constant_tower(grid2, 2, packet1.log_derivatives(X1))
    if level is Level.ORACLE:
        oracle = product_state(psi1, psi2)
    v1 = velocity_1d(psi1, X1, masses[0], hbar=hbar)
    v2 = velocity_1d(psi2, X2, masses[1], hbar=hbar)
    traj = TrajectoryState(0.0, float(X1), float(X2), v1, v2)
    return SeaState(0.0, psi1, psi2, traj, level, tower1, tower2, oracle)


class _OracleCache:
    """Per-run cache of the 2D propagator and the latest oracle extractors."""

    def __init__(self):
        self.propagator = None
        self.key = None
        self.field_id = None
        self.extractors = None


def _extractors(psi2d):
    return ConditionalExtractor(psi2d, 1), ConditionalExtractor(psi2d, 2)


def _oracle_terms(ex, which, q, other_velocity, other_mass, hbar, depth=2):
    sl = extract_conditional(None, which, q, extractor=ex)
    tower = tower_from_oracle(sl, None, q, depth, extractor=ex)
    return tower, effective_terms(tower, other_velocity, other_mass, hbar=hbar)


def sea_step(state: SeaState, p, cfg: SolverConfig, *, n_corrector=1, step_index=None,
             _cache=None) -> SeaState:
    """Advance fields, towers and particles by one time step ``cfg.dt``."""
    level = state.level
    dt, hbar = cfg.dt, cfg.hbar
    m1, m2 = cfg.masses
    g1, g2 = cfg.grids
    t, tr = state.t, state.traj
    c1, c2 = cfg.for_particle(1), cfg.for_particle(2)
    kin1, kin2 = c1.kinetic_phase(), c2.kinetic_phase()
    v_max = (g1.dx / dt, g2.dx / dt)

    # start-of-step potentials
    V1s = conditional_slice(p, 1, tr.X2, t, g1)
    V2s = conditional_slice(p, 2, tr.X1, t, g2)
    A1s = A2s = 0.0
    oracle_new = None
    if level is Level.SEA2:
        e1 = effective_terms(state.tower1, tr.V2, m2, hbar=hbar)
        e2 = effective_terms(state.tower2, tr.V1, m1, hbar=hbar)
        A1s, A2s = e1.A + e1.B, e2.A + e2.B
        in1s = tower_inputs(state.psi1, g1, p, 1, tr.X2, tr.V2, t)
        in2s = tower_inputs(state.psi2, g2, p, 2, tr.X1, tr.V1, t)
    elif level is Level.ORACLE:
        cache = _cache or _OracleCache()
        key = (id(p), cfg)
        if cache.propagator is None or cache.key != key:
            cache.propagator, cache.key = Propagator2D(p, cfg, t), key
        if cache.field_id != id(state.oracle):
            cache.extractors = _extractors(state.oracle)
        ex1s, ex2s = cache.extractors
        _, e1 = _oracle_terms(ex1s, 1, tr.X2, tr.V2, m2, hbar)
        _, e2 = _oracle_terms(ex2s, 2, tr.X1, tr.V1, m1, hbar)
        A1s, A2s = e1.A + e1.B, e2.A + e2.B
        oracle_new = state.oracle.with_values(
            cache.propagator.step(state.oracle.values, step_index))
        ex1e, ex2e = _extractors(oracle_new)
        cache.extractors, cache.field_id = (ex1e, ex2e), id(oracle_new)

    ev1s = SpectralPointEvaluator(state.psi1)
    ev2s = SpectralPointEvaluator(state.psi2)

    # end-of-step guesses
    X1e, X2e = tr.X1 + dt * tr.V1, tr.X2 + dt * tr.V2
    V1e, V2e = tr.V1, tr.V2
    tower1e, tower2e = state.tower1, state.tower2
    hits = 0

    for _ in range(1 + n_corrector):
        g1.check_inside(X1e, "X1")
        g2.check_inside(X2e, "X2")
        V1e_pot = conditional_slice(p, 1, X2e, t + dt, g1)
        V2e_pot = conditional_slice(p, 2, X1e, t + dt, g2)
        if level is Level.SEA0:
            psi1n = step_1d(state.psi1, V1s, c1, V1e_pot, step_index=step_index, kin=kin1)
            psi2n = step_1d(state.psi2, V2s, c2, V2e_pot, step_index=step_index, kin=kin2)
        else:
            if level is Level.SEA2:
                f1 = effective_terms(tower1e, V2e, m2, hbar=hbar)
                f2 = effective_terms(tower2e, V1e, m1, hbar=hbar)
            else:
                _, f1 = _oracle_terms(ex1e, 1, X2e, V2e, m2, hbar)
                _, f2 = _oracle_terms(ex2e, 2, X1e, V1e, m1, hbar)
            psi1n = step_1d_nonunitary(state.psi1, V1s, A1s, c1, V1e_pot, f1.A + f1.B,
                                       step_index=step_index, kin=kin1)
            psi2n = step_1d_nonunitary(state.psi2, V2s, A2s, c2, V2e_pot, f2.A + f2.B,
                                       step_index=step_index, kin=kin2)
        ev1n = SpectralPointEvaluator(psi1n)
        ev2n = SpectralPointEvaluator(psi2n)
        hits = 0

        def source(tq, x1, x2):
            nonlocal hits
            a, b = (ev1s, ev2s) if tq == t else (ev1n, ev2n)
            f1_, f2_ = (state.psi1, state.psi2) if tq == t else (psi1n, psi2n)
            v1, n1 = velocity_1d(f1_, x1, m1, hbar=hbar, v_max=v_max[0], evaluator=a,
                                 return_flag=True)
            v2, n2 = velocity_1d(f2_, x2, m2, hbar=hbar, v_max=v_max[1], evaluator=b,
                                 return_flag=True)
            hits += int(n1) + int(n2)
            return v1, v2

        tr_new = advance_trajectory(tr, source, dt)
        if level is Level.SEA2:
            in1e = tower_inputs(psi1n, g1, p, 1, tr_new.X2, tr_new.V2, t + dt)
            in2e = tower_inputs(psi2n, g2, p, 2, tr_new.X1, tr_new.V1, t + dt)
            ok1 = valid_mask(psi1n.values, TOWER_FLOOR)
            ok2 = valid_mask(psi2n.values, TOWER_FLOOR)
            tower1e = step_tower_ab(state.tower1, in1s, dt, cfg.masses, in1e, hbar=hbar,
                                    valid=ok1)
            tower2e = step_tower_ab(state.tower2, in2s, dt, cfg.masses, in2e, hbar=hbar,
                                    valid=ok2)
        X1e, X2e, V1e, V2e = tr_new.X1, tr_new.X2, tr_new.V1, tr_new.V2

    renorms = 0
    fields, scale = [], list(state.norm_scale)
    for i, f in enumerate((psi1n, psi2n)):
        n = norm_squared(f)
        if not (RENORM_RANGE[0] <= n <= RENORM_RANGE[1]):
            if n == 0 or not np.isfinite(n):
                raise NumericalBlowupError("single-particle field norm collapsed", step_index)
            f = f * (1.0 / np.sqrt(n))
            scale[i] *= n
            renorms += 1
        fields.append(f)

    blow = state.tower_blowup
    if level is Level.SEA2:
        blow = blow or tower1e.blowup or tower2e.blowup
    return replace(
        state,
        t=t + dt,
        psi1=fields[0],
        psi2=fields[1],
        traj=tr_new,
        tower1=tower1e if level is Level.SEA2 else state.tower1,
        tower2=tower2e if level is Level.SEA2 else state.tower2,
        oracle=oracle_new,
        node_hits=state.node_hits + hits,
        renormalizations=state.renormalizations + renorms,
        tower_blowup=blow,
        norm_scale=tuple(scale),
    )


def run_sea(initial: SeaState, p, cfg: SolverConfig, n_steps: int, record_every: int = 1,
            *, n_corrector=1, engine_name=None) -> RunResult:
    """Run ``n_steps`` steps, recording every ``record_every`` steps (and step 0).

    A numerical failure raises :class:`NumericalBlowupError` (or
    :class:`OutOfDomainError`) whose ``partial`` attribute holds the records so far.
    """
    if record_every < 1:
        raise InvalidArgumentError("record_every must be >= 1")
    series = TrajectorySeries(cfg.masses)
    diag = Diagnostics()
    state = initial
    norms0 = (norm_squared(state.psi1), norm_squared(state.psi2))
    series.append(state.traj, *norms0)
    cache = _OracleCache()
    name = engine_name or initial.level.value
    result = RunResult(name, series, diag)
    for step in range(1, n_steps + 1):
        try:
            state = sea_step(state, p, cfg, n_corrector=n_corrector, step_index=step,
                             _cache=cache)
        except PilotwaveError as exc:
            result.failure = f"{type(exc).__name__}: {exc}"
            result.failure_step = step
            exc.partial = result
            _finish(diag, state)
            raise
        if state.tower_blowup and diag.tower_blowup_step is None:
            diag.tower_blowup_step = step
        n1, n2 = norm_squared(state.psi1), norm_squared(state.psi2)
        s1, s2 = state.norm_scale
        drift = max(abs(n1 * s1 / norms0[0] - 1), abs(n2 * s2 / norms0[1] - 1))
        diag.max_norm_drift = max(diag.max_norm_drift, drift)
        if step % record_every == 0:
            series.append(state.traj, n1, n2)
    _finish(diag, state)
    result.final_state = state
    return result


def _finish(diag, state):
    diag.node_floor_hits = state.node_hits
    diag.renormalizations = state.renormalizations

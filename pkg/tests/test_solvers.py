import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import F, M, OMEGA, PERIOD, W, free_width
from pilotwave.bohm import velocity_1d
from pilotwave.core import ComplexField, SpatialGrid, norm_squared
from pilotwave.errors import InvalidArgumentError, NumericalBlowupError
from pilotwave.potentials import HarmonicCoupled, Polynomial, Separable, sample_grid
from pilotwave.solvers import (
    Propagator2D,
    SolverConfig,
    energy_expectation,
    step_1d,
    step_1d_nonunitary,
    step_2d,
)
from pilotwave.states import GaussianPacket, product_state
from pilotwave.units import HBAR


def moments(psi):
    x = psi.grid.x
    rho = np.abs(psi.values) ** 2
    rho = rho / rho.sum()
    mean = float(np.sum(x * rho))
    return mean, float(np.sqrt(2 * np.sum((x - mean) ** 2 * rho)))


def run_1d(psi, v, cfg, n):
    for k in range(n):
        psi = step_1d(psi, v, cfg, step_index=k + 1)
    return psi


@pytest.fixture
def grid():
    return SpatialGrid(-256.0, 256.0, 256)


def test_kinetic_nyquist_check(grid):
    with pytest.raises(InvalidArgumentError):
        SolverConfig(1e4, (M,), (grid,))
    with pytest.raises(InvalidArgumentError):
        SolverConfig(-1.0, (M,), (grid,))
    with pytest.raises(InvalidArgumentError):
        SolverConfig(1.0, (M, M), (grid,))


def test_potential_phase_check(grid):
    cfg = SolverConfig(PERIOD / 2000, (M,), (grid,))
    psi = GaussianPacket(0.0, W).on(grid)
    assert cfg.check_potential(F * grid.x**2, psi) < 0.5
    with pytest.raises(InvalidArgumentError):
        cfg.check_potential(1e3 * F * grid.x**2, psi)


def test_ground_state_is_stationary(grid):
    cfg = SolverConfig(PERIOD / 2000, (M,), (grid,))
    psi0 = GaussianPacket(0.0, W).on(grid)
    psi = run_1d(psi0, F * grid.x**2, cfg, 500)
    overlap = abs(np.sum(np.conj(psi0.values) * psi.values) * grid.dx)
    assert overlap > 1 - 1e-8


def test_ground_state_energy(grid):
    cfg = SolverConfig(PERIOD / 2000, (M,), (grid,))
    psi = GaussianPacket(0.0, W).on(grid)
    assert energy_expectation(psi, F * grid.x**2, cfg) == pytest.approx(0.5 * HBAR * OMEGA, rel=1e-10)


def test_coherent_state_quarter_period(grid):
    cfg = SolverConfig(PERIOD / 2000, (M,), (grid,))
    x0 = 2 * W
    psi = run_1d(GaussianPacket(x0, W).on(grid), F * grid.x**2, cfg, 500)
    mean, width = moments(psi)
    assert abs(mean - x0 * np.cos(OMEGA * 500 * cfg.dt)) < 1e-4 * x0
    assert width == pytest.approx(W, rel=1e-4)


def test_free_gaussian_spreads_and_drifts():
    g = SpatialGrid(-512.0, 512.0, 512)
    cfg = SolverConfig(PERIOD / 2000, (M,), (g,))
    k0 = 0.02
    psi = run_1d(GaussianPacket(-50.0, W, k0).on(g), np.zeros(g.n_points), cfg, 400)
    t = 400 * cfg.dt
    mean, width = moments(psi)
    assert mean == pytest.approx(-50.0 + HBAR * k0 * t / M, abs=1e-6)
    assert width == pytest.approx(free_width(W, t), rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.floats(min_value=-2.0, max_value=2.0))
def test_unitary_step_conserves_norm(seed, tilt):
    g = SpatialGrid(-64.0, 64.0, 128)
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=128) + 1j * rng.normal(size=128)
    psi = ComplexField(vals, (g,))
    cfg = SolverConfig(1.0, (M,), (g,))
    v = 1e-3 * tilt * g.x + 1e-5 * rng.normal(size=128)
    out = psi
    for k in range(20):
        out = step_1d(out, v, cfg)
    assert norm_squared(out) == pytest.approx(norm_squared(psi), rel=1e-12)


def test_product_state_factorizes_under_separable_potential():
    g = SpatialGrid(-128.0, 128.0, 64)
    cfg = SolverConfig(5.0, (M, M), (g, g))
    p = Separable(Polynomial((0.0, 0.0, F)), Polynomial((0.0, 1e-5, F)))
    a, b = GaussianPacket(10.0, W).on(g), GaussianPacket(-5.0, W, 0.05).on(g)
    psi2 = step_2d(product_state(a, b), p, 0.0, cfg)
    a1 = step_1d(a, F * g.x**2, cfg.for_particle(1))
    b1 = step_1d(b, 1e-5 * g.x + F * g.x**2, cfg.for_particle(2))
    assert np.max(np.abs(psi2.values - np.outer(a1.values, b1.values))) < 1e-13


def test_propagator_matches_step_2d():
    g = SpatialGrid(-128.0, 128.0, 64)
    cfg = SolverConfig(5.0, (M, M), (g, g))
    p = HarmonicCoupled(F, -F)
    psi = product_state(GaussianPacket(20.0, W).on(g), GaussianPacket(0.0, W).on(g))
    prop = Propagator2D(p, cfg)
    assert np.allclose(prop.step(psi.values), step_2d(psi, p, 0.0, cfg).values, atol=1e-15)
    assert np.allclose(prop.v, sample_grid(p, g, g))


def test_constant_complex_potential_leaves_guidance_unchanged(grid):
    cfg = SolverConfig(PERIOD / 2000, (M,), (grid,))
    psi = GaussianPacket(5.0, W, 0.03).on(grid)
    v = F * grid.x**2
    plain = step_1d(psi, v, cfg)
    shifted = step_1d_nonunitary(psi, v, np.full(grid.n_points, 0.01 + 0.002j), cfg)
    for x in (-3.0, 5.0, 17.5):
        assert velocity_1d(shifted, x) == pytest.approx(velocity_1d(plain, x), rel=1e-9)
    assert norm_squared(shifted) > norm_squared(plain)


def test_nonunitary_growth_guard(grid):
    cfg = SolverConfig(PERIOD / 2000, (M,), (grid,))
    psi = GaussianPacket(0.0, W).on(grid)
    with pytest.raises(NumericalBlowupError) as info:
        step_1d_nonunitary(psi, np.zeros(256), np.full(256, 1j), cfg, step_index=7)
    assert info.value.step == 7


def test_nan_input_reports_step(grid):
    cfg = SolverConfig(1.0, (M,), (grid,))
    vals = np.ones(256, complex)
    vals[3] = np.nan
    with pytest.raises(NumericalBlowupError) as info:
        step_1d(ComplexField(vals, (grid,)), np.zeros(256), cfg, step_index=42)
    assert info.value.step == 42

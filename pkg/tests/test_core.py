import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pilotwave.core import (
    ComplexField,
    SpatialGrid,
    SpectralPointEvaluator,
    catmull_rom_weights,
    interpolate_field,
    norm_squared,
    spectral_derivative,
)
from pilotwave.errors import InvalidArgumentError, InvalidGridError, OutOfDomainError


def test_grid_basic_properties(grid64):
    assert grid64.dx == pytest.approx(1.0)
    assert grid64.x[0] == -32.0 and grid64.x[-1] == 31.0
    assert grid64.k_nyquist == pytest.approx(np.pi)
    assert grid64.contains(-32.0) and not grid64.contains(32.0)


@pytest.mark.parametrize("n", [0, 7, 100, 3])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(InvalidGridError):
        SpatialGrid(0.0, 1.0, n)


def test_grid_rejects_reversed_bounds():
    with pytest.raises(InvalidGridError):
        SpatialGrid(1.0, 0.0, 16)


def test_field_shape_mismatch(grid64):
    with pytest.raises(InvalidArgumentError):
        ComplexField(np.zeros(10), (grid64,))


def test_spectral_derivative_of_sine():
    g = SpatialGrid(0.0, 2 * np.pi, 64)
    f = ComplexField(np.sin(3 * g.x), (g,))
    d1 = spectral_derivative(f, 1).values
    d2 = spectral_derivative(f, 2).values
    assert np.max(np.abs(d1 - 3 * np.cos(3 * g.x))) < 1e-12
    assert np.max(np.abs(d2 + 9 * np.sin(3 * g.x))) < 1e-11


def test_spectral_derivative_of_gaussian():
    g = SpatialGrid(-32.0, 32.0, 128)
    x = g.x
    f = ComplexField(np.exp(-x**2 / 8), (g,))
    analytic = -x / 4 * np.exp(-x**2 / 8)
    assert np.max(np.abs(spectral_derivative(f, 1).values - analytic)) < 1e-10


def test_derivative_along_second_axis():
    g = SpatialGrid(0.0, 2 * np.pi, 32)
    X1, X2 = np.meshgrid(g.x, g.x, indexing="ij")
    f = ComplexField(np.sin(X1) * np.cos(2 * X2), (g, g))
    d = spectral_derivative(f, 1, axis=1).values
    assert np.max(np.abs(d + 2 * np.sin(X1) * np.sin(2 * X2))) < 1e-12


@pytest.mark.parametrize("order", [0, 5])
def test_derivative_order_checked(grid64, order):
    f = ComplexField(np.ones(64), (grid64,))
    with pytest.raises(InvalidArgumentError):
        spectral_derivative(f, order)


def test_norm_of_gaussian_packet():
    g = SpatialGrid(-16.0, 16.0, 128)
    x = g.x
    f = ComplexField(np.pi**-0.25 * np.exp(-x**2 / 2), (g,))
    assert norm_squared(f) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=63))
def test_norm_invariant_under_cyclic_shift(shift):
    g = SpatialGrid(0.0, 1.0, 64)
    rng = np.random.default_rng(shift)
    f = ComplexField(rng.normal(size=64) + 1j * rng.normal(size=64), (g,))
    assert norm_squared(f.with_values(np.roll(f.values, shift))) == pytest.approx(norm_squared(f))


def test_catmull_rom_weights_partition_of_unity():
    t = np.linspace(0, 1, 11)
    w = catmull_rom_weights(t)
    assert w.shape == (11, 4)
    assert np.allclose(w.sum(axis=-1), 1.0)


@given(st.integers(min_value=0, max_value=63), st.sampled_from(["cubic", "spectral"]))
@settings(max_examples=40, deadline=None)
def test_interpolation_exact_on_nodes(j, method):
    g = SpatialGrid(0.0, 64.0, 64)
    rng = np.random.default_rng(j)
    f = ComplexField(rng.normal(size=64) + 1j * rng.normal(size=64), (g,))
    assert interpolate_field(f, g.x[j], method) == pytest.approx(f.values[j], abs=1e-12)


def test_spectral_interpolation_plane_wave():
    g = SpatialGrid(0.0, 128.0, 128)
    k = 2 * np.pi * 10 / g.length  # 12.8 points per wavelength
    f = ComplexField(np.exp(1j * k * g.x), (g,))
    for x in (3.3, 50.01, 127.4):
        assert abs(interpolate_field(f, x, "spectral") - np.exp(1j * k * x)) < 1e-6


def test_cubic_interpolation_within_its_error_bound():
    # Catmull-Rom is third order; for e^{ikx} the error is at most ~ (k h)^3 / 16
    g = SpatialGrid(0.0, 128.0, 128)
    k = 2 * np.pi * 10 / g.length
    f = ComplexField(np.exp(1j * k * g.x), (g,))
    xs = np.linspace(0.1, 127.3, 57)
    err = max(abs(interpolate_field(f, x, "cubic") - np.exp(1j * k * x)) for x in xs)
    assert err < (k * g.dx) ** 3 / 16
    assert err > 1e-6  # cubic cannot reach the spectral tolerance here


def test_cubic_interpolation_converges_third_order():
    errs = []
    for n in (64, 128, 256):
        g = SpatialGrid(0.0, 2 * np.pi, n)
        f = ComplexField(np.exp(1j * 3 * g.x), (g,))
        xs = np.linspace(0.05, 6.2, 31)
        errs.append(max(abs(interpolate_field(f, x) - np.exp(3j * x)) for x in xs))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 2.7)


def test_interpolation_2d_spectral():
    g = SpatialGrid(0.0, 2 * np.pi, 32)
    X1, X2 = np.meshgrid(g.x, g.x, indexing="ij")
    f = ComplexField(np.exp(1j * (2 * X1 - 3 * X2)), (g, g))
    p = (1.234, 4.321)
    assert abs(interpolate_field(f, p, "spectral") - np.exp(1j * (2 * p[0] - 3 * p[1]))) < 1e-12


def test_interpolation_out_of_domain(grid64):
    f = ComplexField(np.ones(64), (grid64,))
    with pytest.raises(OutOfDomainError):
        interpolate_field(f, 40.0)
    with pytest.raises(OutOfDomainError):
        interpolate_field(f, float("nan"))


def test_point_evaluator_gradient():
    g = SpatialGrid(-20.0, 20.0, 64)
    X1, X2 = np.meshgrid(g.x, g.x, indexing="ij")
    vals = np.exp(-(X1 - 1) ** 2 / 8 - (X2 + 2) ** 2 / 4 + 0.5j * X1)
    ev = SpectralPointEvaluator(ComplexField(vals, (g, g)))
    x1, x2 = 0.37, -1.1
    f, d1, d2 = ev.value_and_gradient(x1, x2)
    exact = np.exp(-(x1 - 1) ** 2 / 8 - (x2 + 2) ** 2 / 4 + 0.5j * x1)
    assert abs(f - exact) < 1e-10
    assert abs(d1 - exact * (-(x1 - 1) / 4 + 0.5j)) < 1e-10
    assert abs(d2 - exact * (-(x2 + 2) / 2)) < 1e-10

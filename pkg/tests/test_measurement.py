import json

import numpy as np
import pytest

from pilotwave import data_path
from pilotwave.core import SpatialGrid
from pilotwave.errors import ConfigError, InvalidArgumentError
from pilotwave.measurement import (
    MeasurementModel,
    apply_kick,
    born_statistics,
    collapse_outcome,
    load_measurement,
    model_from_dict,
    oscillator_model,
)

HALF = np.sqrt(0.5)


def test_single_eigenstate_gives_product():
    m = oscillator_model([0, 1, 0])
    psi = apply_kick(m)
    s = np.linalg.svd(psi.values, compute_uv=False)
    assert s[1] < 1e-12 * s[0]


def test_zero_kick_gives_no_entanglement():
    m0 = oscillator_model([HALF, HALF])
    m = MeasurementModel(m0.eigenstates, m0.eigenvalues, m0.coefficients, m0.pointer_width,
                         0.0, m0.pointer_grid)
    psi = apply_kick(m)
    s = np.linalg.svd(psi.values, compute_uv=False)
    assert s[1] < 1e-12 * s[0]


def test_branch_overlap_at_ten_widths():
    m = oscillator_model([HALF, HALF], separation=10.0)
    g1, g2 = m.system_grid, m.pointer_grid
    branches = [c * np.outer(a.values, m.pointer(m.kick * ev).on(g2).values)
                for a, ev, c in zip(m.eigenstates, m.eigenvalues, m.coefficients)]
    full = abs(np.vdot(branches[0], branches[1])) * g1.dx * g2.dx
    assert full < 1e-20
    b0, b1 = (m.pointer(m.kick * ev).on(g2).values for ev in m.eigenvalues)
    pointer = abs(np.vdot(b0, b1)) * g2.dx
    assert pointer == pytest.approx(np.exp(-25.0), rel=1e-6)


def test_kick_preserves_norm():
    m = oscillator_model(np.sqrt([0.7, 0.2, 0.1]))
    psi = apply_kick(m)
    g1, g2 = psi.grids
    assert np.sum(np.abs(psi.values) ** 2) * g1.dx * g2.dx == pytest.approx(1.0, abs=1e-10)


def test_collapse_at_branch_centre():
    m = oscillator_model(np.sqrt([0.7, 0.2, 0.1]), separation=10.0)
    psi = apply_kick(m)
    for n in range(3):
        r = collapse_outcome(psi, m, m.kick * m.eigenvalues[n])
        assert r.branch == n
        assert not r.ambiguous
        assert r.fidelity > 0.999


def test_one_branch_model_always_collapses_there():
    m = oscillator_model([0, 0, 1])
    stats = born_statistics(m, 500, seed=3)
    assert np.all(stats.branches == 2)
    assert stats.frequencies[2] == 1.0


def test_midpoint_is_ambiguous():
    m = oscillator_model([HALF, HALF], separation=10.0)
    r = collapse_outcome(apply_kick(m), m, 0.5 * m.kick)
    assert r.ambiguous


def test_equal_weights_within_three_sigma():
    m = oscillator_model([HALF, HALF])
    stats = born_statistics(m, 10_000, seed=11)
    assert np.all(np.abs(stats.frequencies - 0.5) < 0.015)


def test_three_branch_weights_within_three_sigma():
    m = oscillator_model(np.sqrt([0.7, 0.2, 0.1]))
    stats = born_statistics(m, 10_000, seed=5)
    assert stats.n_samples == 10_000
    assert np.all(np.abs(stats.frequencies - [0.7, 0.2, 0.1]) < 3 * stats.sigma())
    assert stats.fidelities.min() > 0.999


def test_frequency_error_shrinks_like_inverse_sqrt_n():
    m = oscillator_model([HALF, HALF])
    err = {}
    for n in (400, 40_000):
        e = [abs(born_statistics(m, n, seed=s).frequencies[0] - 0.5) for s in range(8)]
        err[n] = np.sqrt(np.mean(np.square(e)))
    ratio = err[400] / err[40_000]
    assert 4.0 < ratio < 25.0


def test_fidelity_rises_with_separation():
    fids = []
    for sep in (2.0, 5.0, 10.0):
        m = oscillator_model([HALF, HALF], separation=sep)
        fids.append(collapse_outcome(apply_kick(m), m, 0.0).fidelity)
    assert fids[0] < fids[1] < fids[2]
    assert fids[2] > 0.999


def test_sampling_is_reproducible_and_thread_independent():
    m = oscillator_model(np.sqrt([0.7, 0.2, 0.1]))
    a = born_statistics(m, 2500, seed=42)
    b = born_statistics(m, 2500, seed=42, threads=3)
    c = born_statistics(m, 2500, seed=43)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_model_validation():
    m = oscillator_model([HALF, HALF])
    with pytest.raises(InvalidArgumentError):
        MeasurementModel(m.eigenstates, m.eigenvalues, [1.0, 1.0], m.pointer_width, m.kick,
                         m.pointer_grid)
    with pytest.raises(InvalidArgumentError):
        MeasurementModel((m.eigenstates[0], m.eigenstates[0]), m.eigenvalues, m.coefficients,
                         m.pointer_width, m.kick, m.pointer_grid)


def test_kick_off_grid_is_config_error():
    m = oscillator_model([HALF, HALF], pointer_grid=SpatialGrid(-100.0, 100.0, 128))
    with pytest.raises(ConfigError) as info:
        apply_kick(m)
    assert info.value.field == "grid2"


@pytest.mark.parametrize("doc, field", [
    ({}, "coefficients"),
    ({"coefficients": [1.0, 1.0]}, "coefficients"),
    ({"coefficients": ["x"]}, "coefficients[0]"),
    ({"coefficients": [0.6, 0.8], "eigenvalues": [0]}, "eigenvalues"),
    ({"coefficients": [0.6, 0.8], "separation_widths": 2.0}, "separation_widths"),
    ({"coefficients": [0.6, 0.8], "grid2": {"x_min_nm": 0}}, "grid2"),
])
def test_model_document_errors(doc, field):
    with pytest.raises(ConfigError) as info:
        model_from_dict(doc)
    assert info.value.field == field


def test_complex_coefficients_accepted():
    m = model_from_dict({"coefficients": [[0.6, 0.0], [0.0, 0.8]]})
    assert m.coefficients[1] == 0.8j
    assert np.allclose(m.weights, [0.36, 0.64])


def test_shipped_model_loads():
    m = load_measurement(data_path("measurement.json"))
    assert np.allclose(m.weights, [0.7, 0.2, 0.1])
    assert m.separation == pytest.approx(10.0)
    doc = json.loads(data_path("measurement.json").read_text())
    assert doc["n_samples"] == 10_000

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density
from oracles import hermite_density
from qvdp import lindblad, observables
from qvdp.hilbert import FockSpace
from qvdp.lindblad import DensityMatrix

GRID = np.linspace(-7, 7, 141)


def test_vacuum_wigner_is_gaussian():
    w = observables.wigner(lindblad.vacuum(FockSpace(5)), GRID, GRID)
    x, p = np.meshgrid(GRID, GRID, indexing="ij")
    np.testing.assert_allclose(w.values, np.exp(-x**2 - p**2) / math.pi, atol=1e-14)
    assert w.integral() == pytest.approx(1.0, abs=1e-10)


def test_single_photon_wigner_closed_form():
    w = observables.wigner(lindblad.fock_state(FockSpace(3), 1), GRID, GRID)
    x, p = np.meshgrid(GRID, GRID, indexing="ij")
    r2 = x**2 + p**2
    np.testing.assert_allclose(w.values, (2 * r2 - 1) * np.exp(-r2) / math.pi, atol=1e-14)
    assert w.values.min() == pytest.approx(-1 / math.pi)


@pytest.mark.parametrize("n", [0, 2, 5, 9])
def test_fock_marginal_matches_hermite_functions(n):
    w = observables.wigner(lindblad.fock_state(FockSpace(12), n), GRID, GRID)
    np.testing.assert_allclose(w.x_marginal(), hermite_density(n, GRID), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**31))
def test_random_state_normalized_and_bounded(n_max, seed):
    rho = random_density(n_max + 1, np.random.default_rng(seed))
    w = observables.wigner(DensityMatrix(FockSpace(n_max), rho), GRID, GRID)
    assert w.integral() == pytest.approx(1.0, abs=1e-8)
    assert np.abs(w.values).max() <= 1 / math.pi + 1e-12


def test_displaced_wigner_matches_lab():
    alpha = 2.0 - 1.5j
    lab = lindblad.coherent_state(FockSpace(50), alpha)
    disp = lindblad.coherent_state(FockSpace(10, alpha), alpha)
    g = np.linspace(-4, 8, 61)
    np.testing.assert_allclose(observables.wigner(disp, g, g).values,
                               observables.wigner(lab, g, g).values, atol=1e-12)


def test_coherent_wigner_peak_location():
    alpha = 1.0 + 2.0j
    w = observables.wigner(lindblad.coherent_state(FockSpace(40), alpha), GRID, GRID)
    i, j = np.unravel_index(np.argmax(w.values), w.values.shape)
    assert GRID[i] == pytest.approx(math.sqrt(2) * alpha.real, abs=0.1)
    assert GRID[j] == pytest.approx(math.sqrt(2) * alpha.imag, abs=0.1)


def test_cat_state_has_negativity_and_coherent_has_none():
    space = FockSpace(30)
    g = np.linspace(-6, 6, 121)
    cat = observables.wigner(lindblad.cat_state(space, 0, 2.0), g, g)
    coh = observables.wigner(lindblad.coherent_state(space, 2.0), g, g)
    assert observables.negativity_volume(cat) > 0.3
    assert observables.negativity_volume(coh) < 1e-10


def test_wigner_warns_on_poor_coverage(caplog):
    g = np.linspace(-1, 1, 11)
    with caplog.at_level("WARNING", logger="qvdp.observables"):
        observables.wigner(lindblad.vacuum(FockSpace(3)), g, g)
    assert "captures" in caplog.text


@pytest.mark.parametrize("grid", [[0.0], [0.0, 1.0, 3.0], [1.0, 0.0], [0.0, float("nan")]])
def test_wigner_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        observables.wigner(lindblad.vacuum(FockSpace(3)), grid, GRID)


def test_phase_distribution_uniform_for_fock_state():
    pd = observables.phase_distribution(lindblad.fock_state(FockSpace(6), 3))
    np.testing.assert_allclose(pd.values, 1 / (2 * math.pi), atol=1e-15)
    assert pd.integral() == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 3.0), st.floats(-math.pi, math.pi))
def test_phase_distribution_peaks_at_coherent_phase(r, phase):
    dm = lindblad.coherent_state(FockSpace(40), r * complex(math.cos(phase), math.sin(phase)))
    pd = observables.phase_distribution(dm, 512)
    pos, _ = pd.peak()
    assert math.remainder(pos - phase, 2 * math.pi) == pytest.approx(0.0, abs=2 * math.pi / 512)
    assert pd.integral() == pytest.approx(1.0, abs=1e-12)
    assert pd.width() < 1.0


def test_phase_distribution_of_displaced_state():
    alpha = -1.5 + 1.0j
    lab = observables.phase_distribution(lindblad.coherent_state(FockSpace(40), alpha))
    disp = observables.phase_distribution(lindblad.coherent_state(FockSpace(12, alpha), alpha))
    np.testing.assert_allclose(disp.values, lab.values, atol=1e-10)


def test_rotation_shifts_phase_distribution():
    space = FockSpace(30)
    dm = lindblad.coherent_state(space, 2.0)
    rot = observables.rotate(dm, 0.5)
    assert rot.mean_amplitude() == pytest.approx(2.0 * np.exp(-0.5j), abs=1e-10)
    with pytest.raises(ValueError):
        observables.rotate(lindblad.vacuum(FockSpace(3, 1.0)), 0.1)


def test_covariance_of_coherent_state_is_shot_noise():
    dm = lindblad.coherent_state(FockSpace(12, 3 - 1j), 3.2 - 0.5j)
    np.testing.assert_allclose(observables.covariance_from_state(dm), 0.5 * np.eye(2), atol=1e-10)


def test_expectation_checks_shape():
    with pytest.raises(ValueError):
        observables.expectation(lindblad.vacuum(FockSpace(3)), np.eye(3))


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-math.pi, math.pi))
def test_phase_deviation_of_rotated_coherent_state(d, phi):
    R = 2.5
    space = FockSpace(40)
    frame = observables.QuadratureFrame.build(space, phi)
    dm = lindblad.coherent_state(space, R * complex(math.cos(phi + d), math.sin(phi + d)))
    dev = observables.phase_deviation_series([dm], frame, R)
    assert dev.delta_phi[0] == pytest.approx(math.sin(d), abs=1e-10)
    assert dev.var_r_perp[0] == pytest.approx(0.25, abs=1e-10)

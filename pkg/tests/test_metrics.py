import numpy as np
import pytest

from lambda_memory import (
    Envelope,
    InvalidParameterError,
    bin_analysis,
    efficiency,
    hom_and_fidelity,
    make_gaussian,
    make_time_bin,
    overlap,
)
from lambda_memory.core import TimeGrid


@pytest.fixture
def grid():
    return TimeGrid(0.0, 50.0, 2500)


def test_efficiency_identity_and_zero(grid):
    e_in = make_gaussian(25.0, 6.0, grid)
    assert efficiency(e_in, e_in.translated(100.0)) == pytest.approx(1.0, abs=1e-12)
    zero = Envelope(grid, np.zeros(grid.n_points))
    assert efficiency(e_in, zero) == 0.0
    with pytest.raises(InvalidParameterError):
        efficiency(zero, e_in)


def test_overlap_identical_and_disjoint(grid):
    a = make_gaussian(15.0, 2.0, grid)
    b = make_gaussian(40.0, 2.0, grid)
    assert overlap(a, a) == pytest.approx(1.0, abs=1e-12)
    assert overlap(a, b) < 1e-12


def test_overlap_symmetric_and_scale_invariant(grid):
    a = make_gaussian(20.0, 4.0, grid)
    b = make_gaussian(28.0, 5.0, grid)
    assert overlap(a, b) == pytest.approx(overlap(b, a), rel=1e-12)
    scaled = Envelope(grid, (0.3 - 1.7j) * a.samples)
    assert overlap(a, scaled) == pytest.approx(1.0, abs=1e-12)


def test_overlap_zero_energy_rejected(grid):
    a = make_gaussian(20.0, 4.0, grid)
    zero = Envelope(grid, np.zeros(grid.n_points))
    with pytest.raises(InvalidParameterError):
        overlap(a, zero)


def test_overlap_across_grids(grid):
    # same physical pulse sampled on different grids still overlaps fully
    other = TimeGrid(0.0, 50.0, 1700)
    a = make_gaussian(25.0, 6.0, grid)
    b = make_gaussian(25.0, 6.0, other)
    assert overlap(a, b) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize(
    "eta,J2,F,hom",
    [
        (0.5, 1.0, 0.5, 0.0),
        (0.7, 0.0, 0.0, 0.5),
        (0.45, 0.94, 0.45 * 0.94, 0.03),
    ],
)
def test_hom_and_fidelity(eta, J2, F, hom):
    f, h = hom_and_fidelity(eta, J2)
    assert f == pytest.approx(F, abs=1e-12)
    assert h == pytest.approx(hom, abs=1e-12)


def test_hom_and_fidelity_range_checked():
    with pytest.raises(InvalidParameterError):
        hom_and_fidelity(1.5, 0.5)
    with pytest.raises(InvalidParameterError):
        hom_and_fidelity(0.5, -0.1)


def test_bin_analysis_symmetric_bins():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(np.pi / 4, 0.0, 3.0, 30.0, grid)
    bm = bin_analysis(env, ((0.0, 40.0), (40.0, 80.0)))
    assert bm.energy_ratio == pytest.approx(1.0, abs=1e-6)
    assert bm.bin_overlap > 0.9999


def test_bin_analysis_relative_phase_invisible_to_magnitude():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(np.pi / 4, np.pi / 3, 3.0, 30.0, grid)
    bm = bin_analysis(env, ((0.0, 40.0), (40.0, 80.0)))
    assert bm.bin_overlap > 0.9999


def test_bin_analysis_empty_second_window():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(0.0, 0.0, 3.0, 30.0, grid)
    bm = bin_analysis(env, ((0.0, 40.0), (40.0, 80.0)))
    assert bm.energy_second == pytest.approx(0.0, abs=1e-12)
    assert bm.bin_overlap == 0.0


def test_bin_analysis_window_validation():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(np.pi / 4, 0.0, 3.0, 30.0, grid)
    with pytest.raises(InvalidParameterError):
        bin_analysis(env, ((0.0, 50.0), (40.0, 80.0)))
    with pytest.raises(InvalidParameterError):
        bin_analysis(env, ((0.0, 40.0), (40.0, 90.0)))


def test_bin_analysis_uneven_split():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(np.pi / 3, 0.0, 3.0, 30.0, grid)
    bm = bin_analysis(env, ((0.0, 40.0), (40.0, 80.0)))
    assert bm.energy_ratio == pytest.approx(3.0, abs=1e-5)

import math

import numpy as np
import pytest

from lambda_memory import (
    Envelope,
    InvalidParameterError,
    MediumParams,
    SpinWave,
    make_gaussian,
    make_ramp,
    make_time_bin,
    overlap,
)
from lambda_memory.core import PulseSpec, SpaceGrid, TimeGrid


@pytest.fixture
def write_grid():
    return TimeGrid(-50.0, 0.0, 2500)


# ---------------------------------------------------------------------------
# grids and medium
# ---------------------------------------------------------------------------

def test_time_grid_basics():
    g = TimeGrid(-50.0, 0.0, 2500)
    assert g.dt == pytest.approx(0.02)
    assert g.n_points == 2501
    t = g.times()
    assert t[0] == -50.0 and t[-1] == pytest.approx(0.0)


@pytest.mark.parametrize("bad", [dict(t_start=0.0, t_end=0.0, n_steps=10),
                                 dict(t_start=0.0, t_end=-1.0, n_steps=10),
                                 dict(t_start=0.0, t_end=1.0, n_steps=0)])
def test_time_grid_invalid(bad):
    with pytest.raises(InvalidParameterError):
        TimeGrid(**bad)


def test_space_grid_endpoints():
    g = SpaceGrid(200)
    z = g.points()
    assert z[0] == 0.0 and z[-1] == 1.0
    assert g.dz == pytest.approx(1.0 / 199)
    with pytest.raises(InvalidParameterError):
        SpaceGrid(1)


def test_medium_params():
    med = MediumParams(alphaL=24.0, gamma=2.0, gamma_s=0.1)
    assert med.d == 12.0
    assert med.gamma_s_tilde == pytest.approx(0.05)
    with pytest.raises(InvalidParameterError):
        MediumParams(alphaL=-1.0)
    with pytest.raises(InvalidParameterError):
        MediumParams(alphaL=1.0, gamma=0.0)
    with pytest.raises(InvalidParameterError):
        MediumParams(alphaL=1.0, gamma_s=-1e-3)


def test_medium_d_is_read_only():
    med = MediumParams(alphaL=24.0)
    with pytest.raises(AttributeError):
        med.d = 5.0


# ---------------------------------------------------------------------------
# gaussian pulses
# ---------------------------------------------------------------------------

def test_gaussian_unit_energy_and_peak(write_grid):
    env = make_gaussian(-25.0, 6.0, write_grid)
    assert env.energy() == pytest.approx(1.0, abs=1e-9)
    t = write_grid.times()
    assert t[np.argmax(np.abs(env.samples))] == pytest.approx(-25.0)


def test_gaussian_self_overlap(write_grid):
    env = make_gaussian(-25.0, 6.0, write_grid)
    assert overlap(env, env) == pytest.approx(1.0, abs=1e-12)


def test_gaussian_shifted_overlap():
    # amplitude ~ exp(-(t-c)^2 / (2 sigma^2)) gives J^2 = exp(-dt^2 / (2 sigma^2));
    # quadrature of the constructed envelopes must match the closed form
    # (window wide enough that neither tail is clipped)
    grid = TimeGrid(-80.0, 30.0, 5500)
    a = make_gaussian(-25.0, 6.0, grid)
    b = make_gaussian(-10.0, 6.0, grid)
    expected = math.exp(-(15.0**2) / (2.0 * 36.0))
    assert expected == pytest.approx(0.04393693362340742)
    assert overlap(a, b) == pytest.approx(expected, rel=1e-9)


def test_gaussian_invalid(write_grid):
    with pytest.raises(InvalidParameterError):
        make_gaussian(-25.0, 0.0, write_grid)
    with pytest.raises(InvalidParameterError):
        make_gaussian(10.0, 6.0, write_grid)


def test_energy_invariant_under_translation(write_grid):
    env = make_gaussian(-30.0, 4.0, write_grid)
    moved = env.translated(17.5)
    assert moved.energy() == pytest.approx(env.energy(), abs=1e-9)


# ---------------------------------------------------------------------------
# ramps
# ---------------------------------------------------------------------------

def test_positive_ramp_is_linear_on_support(write_grid):
    env = make_ramp("positive", 40.0, write_grid, rise=0.0)
    t = write_grid.times()
    amp = env.samples.real
    support = amp > 0
    # linear in t: second differences vanish on the interior of the support
    idx = np.where(support)[0]
    core = amp[idx[1:-1]]
    second = np.diff(core, n=2)
    assert np.max(np.abs(second)) < 1e-12
    assert env.energy() == pytest.approx(1.0, abs=1e-9)
    # rising: larger t -> larger amplitude on the support
    assert amp[idx[-1]] > amp[idx[0]]


def test_ramp_self_overlap(write_grid):
    env = make_ramp("positive", 40.0, write_grid)
    assert overlap(env, env) == pytest.approx(1.0, abs=1e-12)


def test_ramp_vs_time_reverse_quarter():
    # ideal unsmoothed ramps: (int x(1-x))^2 / (int x^2)^2 = 1/4
    grid = TimeGrid(-50.0, 0.0, 4000)
    pos = make_ramp("positive", 40.0, grid, rise=0.0)
    neg = make_ramp("negative", 40.0, grid, rise=0.0)
    assert overlap(pos, neg) == pytest.approx(0.25, abs=2e-3)


def test_ramp_errors(write_grid):
    with pytest.raises(InvalidParameterError):
        make_ramp("positive", 80.0, write_grid)
    with pytest.raises(InvalidParameterError):
        make_ramp("sideways", 40.0, write_grid)
    with pytest.raises(InvalidParameterError):
        make_ramp("positive", -1.0, write_grid)


# ---------------------------------------------------------------------------
# time-bin pulses
# ---------------------------------------------------------------------------

def bin_energies(env: Envelope) -> tuple[float, float]:
    g = env.grid
    mid = 0.5 * (g.t_start + g.t_end)
    t = g.times()
    w = np.abs(env.samples) ** 2
    first = np.trapezoid(np.where(t < mid, w, 0.0), dx=g.dt)
    second = np.trapezoid(np.where(t >= mid, w, 0.0), dx=g.dt)
    return float(first), float(second)


def test_time_bin_theta_zero_single_bin():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(0.0, 0.0, 3.0, 30.0, grid)
    first, second = bin_energies(env)
    assert second == pytest.approx(0.0, abs=1e-12)
    assert env.energy() == pytest.approx(1.0, abs=1e-9)


def test_time_bin_equal_split():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(np.pi / 4, 0.0, 3.0, 30.0, grid)
    first, second = bin_energies(env)
    assert first == pytest.approx(second, abs=1e-9)


def test_time_bin_tan_squared_ratio():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(np.pi / 3, 0.0, 3.0, 30.0, grid)
    first, second = bin_energies(env)
    assert second / first == pytest.approx(3.0, abs=1e-6)


def test_time_bin_phase_is_imprinted():
    grid = TimeGrid(0.0, 80.0, 4000)
    env = make_time_bin(np.pi / 4, np.pi / 2, 3.0, 30.0, grid)
    t = grid.times()
    late = np.abs(env.samples) > 1e-3
    late &= t > 40.0
    phases = np.angle(env.samples[late])
    assert np.allclose(phases, np.pi / 2, atol=1e-9)


def test_time_bin_overlapping_bins_rejected():
    grid = TimeGrid(0.0, 80.0, 4000)
    with pytest.raises(InvalidParameterError):
        make_time_bin(np.pi / 4, 0.0, 3.0, 10.0, grid)


# ---------------------------------------------------------------------------
# envelope and spin-wave plumbing
# ---------------------------------------------------------------------------

def test_envelope_validation(write_grid):
    with pytest.raises(InvalidParameterError):
        Envelope(write_grid, np.zeros(7))
    bad = np.ones(write_grid.n_points)
    bad[3] = np.nan
    with pytest.raises(InvalidParameterError):
        Envelope(write_grid, bad)
    with pytest.raises(InvalidParameterError):
        Envelope(write_grid, np.ones(write_grid.n_points), kind="thing")


def test_control_cap_enforced(write_grid):
    samples = 3.0 * np.ones(write_grid.n_points)
    Envelope(write_grid, samples, kind="control", cap=3.0)
    with pytest.raises(InvalidParameterError):
        Envelope(write_grid, samples, kind="control", cap=2.0)


def test_zero_envelope_cannot_normalize(write_grid):
    env = Envelope(write_grid, np.zeros(write_grid.n_points))
    with pytest.raises(InvalidParameterError):
        env.normalized()


def test_spin_wave_norm_and_flip():
    grid = SpaceGrid(101)
    z = grid.points()
    s = SpinWave(grid, (z**2).astype(complex))
    flipped = s.flipped()
    assert flipped.samples[0] == s.samples[-1]
    assert s.norm_squared() == pytest.approx(0.2, abs=1e-3)
    assert s.normalized().norm_squared() == pytest.approx(1.0, abs=1e-12)


def test_spin_wave_norm_refinement_second_order():
    # exp(z) has unequal endpoint slopes, so the trapezoid error is a clean
    # O(dz^2) that must quarter when the grid is refined twofold
    z1 = SpaceGrid(51)
    z2 = SpaceGrid(101)
    def build(grid):
        z = grid.points()
        return SpinWave(grid, np.exp(z).astype(complex))
    exact = 0.5 * (np.exp(2.0) - 1.0)
    e1 = abs(build(z1).norm_squared() - exact)
    e2 = abs(build(z2).norm_squared() - exact)
    assert e1 < 1e-3 * exact
    assert e2 < 0.3 * e1


def test_pulse_spec_builders(write_grid):
    spec = PulseSpec(shape="gaussian", sigma=6.0)
    env = spec.build(write_grid)
    assert env.energy() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidParameterError):
        PulseSpec(shape="sawtooth")
    custom = PulseSpec(
        shape="custom",
        times=(-40.0, -30.0, -20.0),
        values_re=(0.0, 1.0, 0.0),
    )
    env = custom.build(write_grid)
    assert env.energy() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidParameterError):
        PulseSpec(shape="custom")

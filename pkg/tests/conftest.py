import numpy as np
import pytest

from lambda_memory import (
    MediumParams,
    PulseSpec,
    ScenarioSpec,
    SpinWave,
    kernel_oracle,
    make_gaussian,
    make_ramp,
    optimal_mode,
    universal_retrieval_mode,
)
from lambda_memory.core import TimeGrid, trapezoid
from lambda_memory.modes import reference_control_amplitude

ALPHA_L = 24.0


def mode_overlap(a: SpinWave, b: SpinWave) -> float:
    """Normalized squared inner product of two spin waves (as in J^2)."""
    if a.grid.n_z != b.grid.n_z:
        b = b.resampled(a.grid)
    inner = trapezoid(np.conj(a.samples) * b.samples, a.grid.dz)
    return float(abs(inner) ** 2 / (a.norm_squared() * b.norm_squared()))


@pytest.fixture(scope="session")
def medium():
    return MediumParams(alphaL=ALPHA_L)


@pytest.fixture(scope="session")
def decaying_medium():
    # dark interval of 2000 at this rate costs the energy factor exp(-0.2)
    return MediumParams(alphaL=ALPHA_L, gamma_s=5.0e-5)


@pytest.fixture(scope="session")
def opt12(medium):
    """Converged optimal mode at d = 12 (cached across the whole session)."""
    return optimal_mode(medium)


@pytest.fixture(scope="session")
def opt12_ramp_seed(medium):
    omega_ref = reference_control_amplitude(medium.d, 50.0)
    dt = min(0.02, 0.1 / (1.0 + omega_ref**2))
    grid = TimeGrid.from_span(-50.0, 0.0, dt)
    seed = make_ramp("positive", 40.0, grid)
    return optimal_mode(medium, seed=seed, use_cache=False)


@pytest.fixture(scope="session")
def oracle12(medium):
    return kernel_oracle(medium, n_z=80)


@pytest.fixture(scope="session")
def profile12(medium, opt12):
    return universal_retrieval_mode(medium, opt12.mode)


@pytest.fixture(scope="session")
def stage_grids():
    wgrid = TimeGrid.from_span(-50.0, 0.0, 0.02)
    rgrid = TimeGrid.from_span(0.0, 50.0, 0.02)
    return wgrid, rgrid


def fig_scenario(input_pulse: PulseSpec, target_pulse: PulseSpec, scenario_id: str,
                 **overrides) -> ScenarioSpec:
    """Demonstration-style scenario: depth 24, dark decay factor exp(-0.2)."""
    kwargs = dict(
        medium=MediumParams(alphaL=ALPHA_L, gamma_s=5.0e-5),
        input_pulse=input_pulse,
        target_pulse=target_pulse,
        storage_time=2000.0,
        write_window=50.0,
        read_window=50.0,
        omega_max=10.0,
        scenario_id=scenario_id,
    )
    kwargs.update(overrides)
    return ScenarioSpec(**kwargs)

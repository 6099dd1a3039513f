"""Slow-light quantum-memory toolkit for a three-level lambda medium.

Simulates writing, dark storage, and retrieval of weak pulses, finds the
optimal spin wave for a given optical depth, and synthesizes control-field
envelopes that store arbitrary input shapes and retrieve them into arbitrary
target shapes at the medium's maximum efficiency.
"""

from .core import (
    Envelope,
    MediumParams,
    PulseSpec,
    SpaceGrid,
    SpinWave,
    TimeGrid,
    make_envelope,
    make_gaussian,
    make_ramp,
    make_time_bin,
)
from .errors import (
    ClockRangeError,
    ConvergenceError,
    InfeasibleTargetError,
    InvalidParameterError,
    NumericalInstabilityError,
)
from .metrics import BinMetrics, MetricsReport, bin_analysis, efficiency, hom_and_fidelity, overlap
from .modes import OptimalModeResult, kernel_oracle, optimal_mode
from .scenario import (
    RunSummary,
    ScenarioSpec,
    load_scenario,
    partial_retrieve_scenario,
    run_scenario,
    run_sweep,
    scenario_from_dict,
)
from .shaping import (
    ClockSolution,
    UniversalMode,
    retrieval_control,
    retrieval_eigenmode,
    solve_clock,
    time_reverse,
    universal_retrieval_mode,
    writing_control,
)
from .solver import (
    StageRecord,
    dark_storage,
    energy_balance,
    propagate_stage,
    retrieve,
    store,
)

__version__ = "0.1.0"

__all__ = [
    "Envelope",
    "MediumParams",
    "PulseSpec",
    "SpaceGrid",
    "SpinWave",
    "TimeGrid",
    "make_envelope",
    "make_gaussian",
    "make_ramp",
    "make_time_bin",
    "ClockRangeError",
    "ConvergenceError",
    "InfeasibleTargetError",
    "InvalidParameterError",
    "NumericalInstabilityError",
    "BinMetrics",
    "MetricsReport",
    "bin_analysis",
    "efficiency",
    "hom_and_fidelity",
    "overlap",
    "OptimalModeResult",
    "kernel_oracle",
    "optimal_mode",
    "RunSummary",
    "ScenarioSpec",
    "load_scenario",
    "partial_retrieve_scenario",
    "run_scenario",
    "run_sweep",
    "scenario_from_dict",
    "ClockSolution",
    "UniversalMode",
    "retrieval_control",
    "retrieval_eigenmode",
    "solve_clock",
    "time_reverse",
    "universal_retrieval_mode",
    "writing_control",
    "StageRecord",
    "dark_storage",
    "energy_balance",
    "propagate_stage",
    "retrieve",
    "store",
    "__version__",
]

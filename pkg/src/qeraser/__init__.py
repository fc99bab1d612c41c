"""State-vector model of the two-photon delayed-choice quantum eraser."""

from .analysis import analytic_table, compare, tally, visibility
from .hilbert import BasisSet, Ket, LinearMap, Register, equal_up_to_global_phase, express_in, tensor
from .measurement import (
    ProjectiveMeasurement,
    collapse,
    joint_probability,
    order_independence_report,
    outcome_probability,
    sequential_joint,
)
from .montecarlo import ChoicePolicy, Ordering, RunConfig, run_trials
from .optics import (
    Choice,
    build_initial_state,
    elliptical_basis,
    env_analyzer,
    full_eraser_state,
    interferometer_transfer,
    system_detectors,
    wheeler_mz,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "Choice",
    "ChoicePolicy",
    "Ket",
    "LinearMap",
    "Ordering",
    "ProjectiveMeasurement",
    "Register",
    "RunConfig",
    "analytic_table",
    "build_initial_state",
    "collapse",
    "compare",
    "elliptical_basis",
    "env_analyzer",
    "equal_up_to_global_phase",
    "express_in",
    "full_eraser_state",
    "interferometer_transfer",
    "joint_probability",
    "order_independence_report",
    "outcome_probability",
    "run_trials",
    "sequential_joint",
    "system_detectors",
    "tally",
    "tensor",
    "visibility",
    "wheeler_mz",
]

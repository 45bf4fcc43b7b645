"""Adaptive backstepping control of a planar bicopter via dynamic extension."""

from .adaptation import adaptation_derivatives
from .controller import (
    EPS_SING,
    BackstepErrors,
    CompensatorState,
    ControlOutput,
    EstimateState,
    Gains,
    SingularInputMap,
    compute_errors,
    control_law,
    controller_derivatives,
)
from .extended import (
    ExtState3,
    ExtState4,
    ThetaTrue,
    f2_const,
    g2_jacobian,
    g2_jacobian_dot,
    g2_map,
    pre_extension_input_map,
)
from .model import (
    PhysicalParams,
    PlantState,
    Wrench,
    mix_forces,
    plant_derivative,
    unmix_forces,
)
from .simloop import (
    LogRecord,
    NumericalDivergence,
    SimConfig,
    lyapunov_eval,
    rk4_step,
    run_closed_loop,
)
from .trajectory import (
    EllipseParams,
    HilbertPlan,
    TrajectorySample,
    ellipse_sample,
    hilbert_build,
    hilbert_cells,
    hilbert_sample,
    hover_sample,
)

__all__ = [
    "EPS_SING",
    "BackstepErrors",
    "CompensatorState",
    "ControlOutput",
    "EllipseParams",
    "EstimateState",
    "ExtState3",
    "ExtState4",
    "Gains",
    "HilbertPlan",
    "LogRecord",
    "NumericalDivergence",
    "PhysicalParams",
    "PlantState",
    "SimConfig",
    "SingularInputMap",
    "ThetaTrue",
    "TrajectorySample",
    "Wrench",
    "adaptation_derivatives",
    "compute_errors",
    "control_law",
    "controller_derivatives",
    "ellipse_sample",
    "f2_const",
    "g2_jacobian",
    "g2_jacobian_dot",
    "g2_map",
    "hilbert_build",
    "hilbert_cells",
    "hilbert_sample",
    "hover_sample",
    "lyapunov_eval",
    "mix_forces",
    "plant_derivative",
    "pre_extension_input_map",
    "rk4_step",
    "run_closed_loop",
    "unmix_forces",
]

"""Calculus on time scales and averaging for dynamic systems ``x^Delta = eps X(t, x)``."""
from .averaging import (
    AveragedField,
    VectorField,
    base_average,
    base_integral,
    build_averaged_field_periodic,
    build_averaged_field_quasiperiodic,
    error_bound_constant,
    estimate_constants,
    interval_length_bound,
)
from .kernels import BACKEND
from .shifts import (
    PeriodicityCertificate,
    ShiftOperator,
    backward_shift,
    forward_shift,
    iterate_shift,
    periodic_integral_invariance_check,
    shift_delta_derivative,
    substitution_rule_check,
    verify_delta_periodic,
    verify_quasiperiodic,
)
from .solver import (
    Box,
    DynamicSystem,
    Trajectory,
    compare_trajectories,
    horizon_for,
    product_solution_linear,
    solve,
)
from .timescale import (
    ContinuousInterval,
    ExplicitPoints,
    GeometricCondensation,
    GridFunction,
    Interval,
    TimeScale,
    UniformGrid,
    delta_derivative_numeric,
    delta_integral,
    exp_function,
    scale_from_spec,
)

__version__ = "0.1.0"

__all__ = [
    "AveragedField",
    "BACKEND",
    "Box",
    "ContinuousInterval",
    "DynamicSystem",
    "ExplicitPoints",
    "GeometricCondensation",
    "GridFunction",
    "Interval",
    "PeriodicityCertificate",
    "ShiftOperator",
    "TimeScale",
    "Trajectory",
    "UniformGrid",
    "VectorField",
    "backward_shift",
    "base_average",
    "base_integral",
    "build_averaged_field_periodic",
    "build_averaged_field_quasiperiodic",
    "compare_trajectories",
    "delta_derivative_numeric",
    "delta_integral",
    "error_bound_constant",
    "estimate_constants",
    "exp_function",
    "forward_shift",
    "horizon_for",
    "interval_length_bound",
    "iterate_shift",
    "periodic_integral_invariance_check",
    "product_solution_linear",
    "scale_from_spec",
    "shift_delta_derivative",
    "solve",
    "substitution_rule_check",
    "verify_delta_periodic",
    "verify_quasiperiodic",
]

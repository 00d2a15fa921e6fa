"""Multifractal spectra of multiple ergodic averages on linear cookie-cutter sets."""
from .system import SpecError, SystemSpec, bowen_dimension, code_point, derive_lambdas, validate_spec
from .transfer import MarkovKernel, TransferError, TransferSolution, residual, solve_transfer, transition_kernel
from .pressure import PressurePoint, pressure, pressure_gradient, pressure_hessian, pressure_point
from .spectrum import (
    SpectrumPoint,
    SupportEstimate,
    alpha_star,
    estimate_support,
    minimize_constraint_curve,
    solve_critical,
    spectrum_curve,
)
from .telescopic import (
    ChainLayout,
    SampledWord,
    chain_layout,
    cylinder_measure,
    expected_lyapunov,
    expected_phi,
    local_dimension_estimate,
    multiple_average,
    sample_word,
    sample_words,
)
from .oracle import CountTable, exhaustive_check, level_set_count

__all__ = [
    "SpecError",
    "SystemSpec",
    "bowen_dimension",
    "code_point",
    "derive_lambdas",
    "validate_spec",
    "MarkovKernel",
    "TransferError",
    "TransferSolution",
    "residual",
    "solve_transfer",
    "transition_kernel",
    "PressurePoint",
    "pressure",
    "pressure_gradient",
    "pressure_hessian",
    "pressure_point",
    "SpectrumPoint",
    "SupportEstimate",
    "alpha_star",
    "estimate_support",
    "minimize_constraint_curve",
    "solve_critical",
    "spectrum_curve",
    "ChainLayout",
    "SampledWord",
    "chain_layout",
    "cylinder_measure",
    "expected_lyapunov",
    "expected_phi",
    "local_dimension_estimate",
    "multiple_average",
    "sample_word",
    "sample_words",
    "CountTable",
    "exhaustive_check",
    "level_set_count",
]

__version__ = "0.1.0"

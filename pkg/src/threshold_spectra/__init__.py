"""Coupling-constant thresholds, threshold states and weighted momentum-space convergence
for H = T - lambda V with Schrodinger, pseudorelativistic and Dirac kinetic energies."""

__version__ = "0.1.0"

from .birman_schwinger import (  # noqa: E402
    BSOperator,
    EigenResult,
    PotentialSpec,
    ThresholdResult,
    apply_bs,
    energy_ladder,
    extrapolate_threshold,
    hamiltonian_ground_state,
    lambda_curve,
    leading_eigenpair,
    norm_convergence_check,
    threshold_operator,
)
from .diagnostics import CheckReport, SuiteConfig, run_suite  # noqa: E402
from .errors import (  # noqa: E402
    ContractViolation,
    DegenerateOperator,
    DomainError,
    InadmissibleWeight,
    InconsistencyError,
    InvalidTestFunction,
    IterationLimitError,
)
from .fields import Field, Grid3, fourier, inner, lq_norm  # noqa: E402
from .kinetic import (  # noqa: E402
    DIRAC,
    LOWER,
    PSEUDORELATIVISTIC,
    SCHRODINGER,
    UPPER,
    EnergyWindow,
    KineticModel,
    ResolventMultiplier,
    fw_matrix,
    kinetic_symbol,
    resolvent_multiplier,
    zero_energy_multiplier,
)
from .threshold_state import (  # noqa: E402
    ThresholdState,
    build_threshold_state,
    resonance_criterion,
    weak_residual,
)
from .weights import (  # noqa: E402
    AdmissibilityVerdict,
    ConvergenceReport,
    Weight,
    certify_convergence,
    check_admissible,
)

__all__ = [
    "__version__",
    "Field",
    "Grid3",
    "fourier",
    "inner",
    "lq_norm",
    "BSOperator",
    "EigenResult",
    "PotentialSpec",
    "ThresholdResult",
    "apply_bs",
    "energy_ladder",
    "extrapolate_threshold",
    "hamiltonian_ground_state",
    "lambda_curve",
    "leading_eigenpair",
    "norm_convergence_check",
    "threshold_operator",
    "ContractViolation",
    "DegenerateOperator",
    "DomainError",
    "InadmissibleWeight",
    "InconsistencyError",
    "InvalidTestFunction",
    "IterationLimitError",
    "DIRAC",
    "LOWER",
    "PSEUDORELATIVISTIC",
    "SCHRODINGER",
    "UPPER",
    "EnergyWindow",
    "KineticModel",
    "ResolventMultiplier",
    "fw_matrix",
    "kinetic_symbol",
    "resolvent_multiplier",
    "zero_energy_multiplier",
    "ThresholdState",
    "build_threshold_state",
    "resonance_criterion",
    "weak_residual",
    "AdmissibilityVerdict",
    "ConvergenceReport",
    "Weight",
    "certify_convergence",
    "check_admissible",
    "CheckReport",
    "SuiteConfig",
    "run_suite",
]

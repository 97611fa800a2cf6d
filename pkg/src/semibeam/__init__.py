"""Spectral Galerkin laboratory for thermoelastic double-wall nanotube beams.

Two coupled Timoshenko systems with fractional damping ``A^tau`` and a heat
equation are truncated to the first ``N`` Dirichlet sine modes.  The package
assembles the truncated generator and its energy Gram matrix, propagates
trajectories, and studies the resolvent along the imaginary axis.
"""

__version__ = "0.1.0"

from .assembly import (  # noqa: E402
    FIELDS,
    EnergyGram,
    GeneratorMatrix,
    StateVector,
    assemble_generator,
    assemble_gram,
    dissipation_rate,
    smooth_probes,
    stationary_solve,
    whitened_generator,
)
from .config import ExperimentConfig, parse_config  # noqa: E402
from .dynamics import (  # noqa: E402
    DecayFit,
    TrajectoryRecord,
    default_initial_state,
    energy,
    fit_decay_rate,
    propagate_exact,
    step_implicit_midpoint,
)
from .errors import (  # noqa: E402
    ConfigError,
    DimensionError,
    FitError,
    ParameterError,
    SemibeamError,
    SingularSystemError,
    SpectralError,
)
from .output import RunManifest, emit_csv  # noqa: E402
from .params import ModelParameters, Variant  # noqa: E402
from .resolvent import (  # noqa: E402
    AuditReport,
    ExponentFit,
    ResolventSample,
    fit_exponent,
    gevrey_target,
    lambda_grid,
    lemma_audit,
    resolvent_norm,
    resolvent_solve,
    sweep,
    validity_window,
)
from .spectral import (  # noqa: E402
    SpectralField,
    derivative_matrix,
    eigenvalue,
    eigenvalues,
    fractional_power_diag,
    interpolation_ratio,
    synthesize,
)

__all__ = [
    "__version__",
    "FIELDS", "EnergyGram", "GeneratorMatrix", "StateVector", "assemble_generator",
    "assemble_gram", "dissipation_rate", "smooth_probes", "stationary_solve", "whitened_generator",
    "ExperimentConfig", "parse_config",
    "DecayFit", "TrajectoryRecord", "default_initial_state", "energy", "fit_decay_rate",
    "propagate_exact", "step_implicit_midpoint",
    "ConfigError", "DimensionError", "FitError", "ParameterError", "SemibeamError",
    "SingularSystemError", "SpectralError",
    "RunManifest", "emit_csv",
    "ModelParameters", "Variant",
    "AuditReport", "ExponentFit", "ResolventSample", "fit_exponent", "gevrey_target",
    "lambda_grid", "lemma_audit", "resolvent_norm", "resolvent_solve", "sweep", "validity_window",
    "SpectralField", "derivative_matrix", "eigenvalue", "eigenvalues", "fractional_power_diag",
    "interpolation_ratio", "synthesize",
]

"""Certified lower bounds and steered upper bounds for polynomial minimization.

The pipeline: parse a polynomial (`polyparse`), assemble its moment or
gradient-variety relaxation (`moment`), solve the conic programs
(`sdpcore`), steer the optimal moment matrix toward rank flatness
(`flatsteer`), and extract candidate minimizers from flat matrices
(`extract`).  `cli` wraps everything behind the `flatmin` command.
"""

from .extract import (
    AtomicMeasure,
    ExtractConfig,
    ValidationReport,
    extract_atoms,
    validate_atoms,
)
from .flatsteer import (
    AlgorithmResult,
    FlatnessReport,
    LowerBoundRecord,
    SteerConfig,
    SteerState,
    assess_flatness,
    flatness_report,
    modified_moment_matrix,
    project_columns,
    run_algorithm,
    run_relaxation,
    steer_once,
)
from .moment import (
    MomentVector,
    MonomialIndexer,
    atomic_moment_vector,
    build_indexer,
    gaussian_moment_vector,
    hankel_residual,
    localizing_rows,
    moment_matrix,
    moments_from_matrix,
    monomial_values,
    poly_coeff_vector,
)
from .polyparse import (
    Polynomial,
    PolyParseError,
    format_polynomial,
    parse_polynomial,
    poly_space,
)
from .sdpcore import (
    MomentRelaxation,
    SdpProblem,
    SdpSolution,
    SolverConfig,
    assemble_moment_relaxation,
    assemble_nds_relaxation,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmResult",
    "AtomicMeasure",
    "ExtractConfig",
    "FlatnessReport",
    "LowerBoundRecord",
    "MomentRelaxation",
    "MomentVector",
    "MonomialIndexer",
    "PolyParseError",
    "Polynomial",
    "SdpProblem",
    "SdpSolution",
    "SolverConfig",
    "SteerConfig",
    "SteerState",
    "ValidationReport",
    "assemble_moment_relaxation",
    "assemble_nds_relaxation",
    "assess_flatness",
    "atomic_moment_vector",
    "build_indexer",
    "extract_atoms",
    "flatness_report",
    "format_polynomial",
    "gaussian_moment_vector",
    "hankel_residual",
    "localizing_rows",
    "moment_matrix",
    "moments_from_matrix",
    "modified_moment_matrix",
    "monomial_values",
    "parse_polynomial",
    "poly_coeff_vector",
    "poly_space",
    "project_columns",
    "run_algorithm",
    "run_relaxation",
    "solve",
    "steer_once",
    "validate_atoms",
]

"""Fast stability scanning of hourly power-system operating points."""

from ._core import (
    DegenerateError,
    Error,
    OperatingPointSet,
    OracleFailure,
    ParseError,
    StabilityOracle,
    ValidationError,
    compare_full_vs_fast,
    fast_scan,
    full_scan,
    generate_synthetic_year,
    kmeans,
    load_csv,
    normalize,
    select_features,
    self_adaptive_pso_kmeans,
    total_demand,
    two_bus_margin,
    weighted_distance,
    worst_case_analysis,
)

__all__ = [
    "DegenerateError",
    "Error",
    "OperatingPointSet",
    "OracleFailure",
    "ParseError",
    "StabilityOracle",
    "ValidationError",
    "compare_full_vs_fast",
    "fast_scan",
    "full_scan",
    "generate_synthetic_year",
    "kmeans",
    "load_csv",
    "normalize",
    "select_features",
    "self_adaptive_pso_kmeans",
    "total_demand",
    "two_bus_margin",
    "weighted_distance",
    "worst_case_analysis",
]

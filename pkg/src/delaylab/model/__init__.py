from .catalog import CATALOG, catalog_names, catalog_problem, describe
from .fields import (
    CoefficientField,
    DelaySdeProblem,
    InitialSegment,
    TestFunction,
    check_partials,
    sample_points,
)
from .mesh import (
    BrownianPath,
    TimeMesh,
    build_mesh,
    coarsen_path,
    path_generator,
    sample_brownian,
    standard_increments,
)

__all__ = [
    "CATALOG", "catalog_names", "catalog_problem", "describe",
    "CoefficientField", "DelaySdeProblem", "InitialSegment", "TestFunction",
    "check_partials", "sample_points",
    "BrownianPath", "TimeMesh", "build_mesh", "coarsen_path", "path_generator",
    "sample_brownian", "standard_increments",
]

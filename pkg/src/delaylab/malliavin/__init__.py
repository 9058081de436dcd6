from .bound import (
    SobolevDistance,
    WeakBoundReport,
    assemble_report,
    sobolev_distance,
    sobolev_distance_from_samples,
    weak_bound_report,
)
from .first import (
    DerivativeField,
    along_path,
    derivative_field,
    inverse_moment,
    malliavin_norm_sq,
    norm_moment,
    solve_first_variation,
    theta_grid,
    variation_batch,
)
from .second import (
    SecondVariationGrid,
    adjoint_weights,
    double_integral_sq,
    second_variation_forward,
    second_variation_grid,
    second_variation_on_grid,
    solve_second_variation,
)

__all__ = [
    "SobolevDistance", "WeakBoundReport", "assemble_report", "sobolev_distance", "norm_moment",
    "sobolev_distance_from_samples", "weak_bound_report",
    "DerivativeField", "along_path", "derivative_field", "inverse_moment",
    "malliavin_norm_sq", "solve_first_variation", "theta_grid", "variation_batch",
    "SecondVariationGrid", "adjoint_weights", "double_integral_sq",
    "second_variation_forward", "second_variation_grid", "second_variation_on_grid",
    "solve_second_variation",
]

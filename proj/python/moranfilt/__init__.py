"""Fast eigenvector spatial filtering (ESF) and random-effects ESF."""

from ._moranfilt import (
    Error,
    InvalidArgument,
    NumericalError,
    analytic_grid_eigenvalues,
    contribution_lower_bound,
    estimate_range_mst,
    exact_eigen,
    fit_esf,
    fit_ols,
    fit_reesf,
    kernel_value,
    lambda_alpha,
    moran_coefficient,
    nystrom_eigen,
    residual_mc_z,
    select_knots,
    simulate,
)

__all__ = [
    "Error",
    "InvalidArgument",
    "NumericalError",
    "analytic_grid_eigenvalues",
    "contribution_lower_bound",
    "estimate_range_mst",
    "exact_eigen",
    "fit_esf",
    "fit_ols",
    "fit_reesf",
    "kernel_value",
    "lambda_alpha",
    "moran_coefficient",
    "nystrom_eigen",
    "residual_mc_z",
    "select_knots",
    "simulate",
]

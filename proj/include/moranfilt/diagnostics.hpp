#pragma once

#include "moranfilt/spatial_graph.hpp"
#include "moranfilt/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace moranfilt {

/// Moran coefficient of a residual vector with its normality-null moments.
struct McReport {
  double mc = 0.0;
  double expected = 0.0;
  double variance = 0.0;
  double z = 0.0;
  Index n_used = 0;
  bool subsampled = false;
};

struct McOptions {
  Index max_exact_n = 10000;
  std::uint64_t seed = 0;
};

/// z-value of the residual Moran coefficient with C rebuilt from the sites
/// (zero diagonal). Mean -1/(n-1) and the classical normality-assumption
/// variance
///
///   Var = (n^2 S1 - n S2 + 3 S0^2) / (S0^2 (n^2 - 1)) - E^2,
///
/// with S0 = sum c_ij, S1 = 2 sum c_ij^2, S2 = sum_i (2 sum_j c_ij)^2. Above
/// max_exact_n sites a seeded uniform subsample is used. Pairwise weights are
/// computed on the fly, so memory stays O(n).
McReport residual_mc_z(const VectorXd& residuals, const Coordinates& coords,
                       const KernelSpec& spec, const McOptions& options = {});

/// Same for several residual vectors (columns) sharing one pass over the pairs.
std::vector<McReport> residual_mc_z(const MatrixXd& residuals, const Coordinates& coords,
                                    const KernelSpec& spec, const McOptions& options = {});

/// Mean of (estimate - truth).
double bias(std::span<const double> estimates, double truth);
/// Root mean squared deviation from truth.
double rmse(std::span<const double> estimates, double truth);
/// Root mean squared relative error of standard errors against their truths.
double rmspe_se(std::span<const double> se_estimates, std::span<const double> se_truths);

/// Aggregated Monte Carlo metrics for one estimator in one configuration.
struct MetricRow {
  std::string estimator;
  double bias = 0.0;
  double rmse = 0.0;
  double rmspe_se = 0.0;
  double mean_z_mc = 0.0;
  double mean_runtime_seconds = 0.0;
  Index replications = 0;
};

/// Eigenvalues of C on an N x N regular grid from the exponential spectral
/// density tau = (1/r^2 + 4 pi^2 |l|^2)^-1.5 over the N^2 signed integer
/// frequency pairs l in {-floor(N/2), ..., ceil(N/2) - 1}^2, scaled so the
/// eigenvalues of C + I sum to N^2, then shifted by -1. Sorted descending.
VectorXd analytic_grid_eigenvalues(Index grid_side, double range);

/// Lower bound on the share of positive spatial-dependence variance carried
/// by the first L Moran eigenvectors on the regular grid. The constant
/// (zero-frequency) mode is annihilated by the centring, so its term
/// vanishes; the remaining sinusoidal modes sum to zero and contribute their
/// eigenvalue. The result is normalized by the positive spectrum of M C M,
/// i.e. the positive non-constant eigenvalues.
double contribution_lower_bound(Index grid_side, double range, Index count);

/// Default grid range 1 / (2 pi).
double default_grid_range();

}  // namespace moranfilt

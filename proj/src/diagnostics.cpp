#include "moranfilt/diagnostics.hpp"

#include "moranfilt/errors.hpp"
#include "moranfilt/random.hpp"
#include "kernel_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace moranfilt {

namespace {

struct PairSums {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  VectorXd cross;  // e' C e per column
};

// One pass over i < j. Row sums are kept so S2 can be formed at the end.
PairSums accumulate_pairs(const MatrixXd& centered, const Eigen::MatrixX2d& pts,
                          const KernelSpec& spec) {
  const Index n = pts.rows();
  const Index m = centered.cols();
  PairSums out;
  out.cross = VectorXd::Zero(m);
  VectorXd row_sum = VectorXd::Zero(n);
  VectorXd w(n);
  VectorXd t(m);
  const double inv_r = 1.0 / spec.range;
  for (Index i = 0; i + 1 < n; ++i) {
    const Index tail = n - i - 1;
    double sum_c = 0.0;
    double sum_c2 = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      const double c =
          detail::kernel_at(spec.family, std::sqrt(detail::squared_distance(pts, i, pts, j)) * inv_r);
      w[j - i - 1] = c;
      sum_c += c;
      sum_c2 += c * c;
      row_sum[j] += c;
    }
    row_sum[i] += sum_c;
    out.s0 += 2.0 * sum_c;
    out.s1 += 4.0 * sum_c2;
    t.noalias() = centered.bottomRows(tail).transpose() * w.head(tail);
    out.cross += 2.0 * centered.row(i).transpose().cwiseProduct(t);
  }
  out.s2 = 4.0 * row_sum.squaredNorm();
  return out;
}

std::vector<McReport> mc_reports(const MatrixXd& residuals, const Coordinates& coords,
                                 const KernelSpec& spec, const McOptions& options) {
  validate_kernel(spec);
  const Index n_all = coords.size();
  if (residuals.rows() != n_all) {
    throw InvalidArgument("residuals and coordinates have different row counts");
  }
  if (n_all < 3) throw InvalidArgument("residual Moran test needs at least three sites");
  if (options.max_exact_n < 3) throw InvalidArgument("max_exact_n must be at least 3");
  if (!residuals.allFinite()) throw InvalidArgument("residuals must be finite");

  const bool subsampled = n_all > options.max_exact_n;
  MatrixXd r;
  Eigen::MatrixX2d pts;
  if (subsampled) {
    const auto rows = uniform_subsample(n_all, options.max_exact_n, options.seed);
    r.resize(static_cast<Index>(rows.size()), residuals.cols());
    for (std::size_t a = 0; a < rows.size(); ++a) r.row(static_cast<Index>(a)) = residuals.row(rows[a]);
    pts = coords.subset(rows).points();
  } else {
    r = residuals;
    pts = coords.points();
  }
  const Index n = r.rows();
  const double nd = static_cast<double>(n);

  r.rowwise() -= r.colwise().mean();
  const VectorXd ss = r.colwise().squaredNorm();
  for (Index k = 0; k < r.cols(); ++k) {
    if (!(ss[k] > 1e-24 * std::max(1.0, residuals.col(k).squaredNorm()))) {
      throw InvalidArgument("Moran coefficient is undefined for constant residuals");
    }
  }

  const PairSums sums = accumulate_pairs(r, pts, spec);
  if (!(sums.s0 > 0.0)) {
    throw NumericalError("residual Moran test", "connectivity has no positive weight");
  }
  const double expected = -1.0 / (nd - 1.0);
  const double variance = (nd * nd * sums.s1 - nd * sums.s2 + 3.0 * sums.s0 * sums.s0) /
                              (sums.s0 * sums.s0 * (nd * nd - 1.0)) -
                          expected * expected;
  if (!(variance > 0.0)) {
    throw NumericalError("residual Moran test", "null variance is not positive");
  }
  const double sd = std::sqrt(variance);

  std::vector<McReport> out(static_cast<std::size_t>(r.cols()));
  for (Index k = 0; k < r.cols(); ++k) {
    McReport& rep = out[static_cast<std::size_t>(k)];
    rep.mc = (nd / sums.s0) * sums.cross[k] / ss[k];
    rep.expected = expected;
    rep.variance = variance;
    rep.z = (rep.mc - expected) / sd;
    rep.n_used = n;
    rep.subsampled = subsampled;
  }
  return out;
}

// Signed integer frequencies covering one period of an N-point grid.
Index frequency(Index k, Index side) { return k - side / 2; }

}  // namespace

McReport residual_mc_z(const VectorXd& residuals, const Coordinates& coords,
                       const KernelSpec& spec, const McOptions& options) {
  return mc_reports(residuals, coords, spec, options).front();
}

std::vector<McReport> residual_mc_z(const MatrixXd& residuals, const Coordinates& coords,
                                    const KernelSpec& spec, const McOptions& options) {
  if (residuals.cols() == 0) return {};
  return mc_reports(residuals, coords, spec, options);
}

double bias(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw InvalidArgument("bias needs at least one estimate");
  double s = 0.0;
  for (double e : estimates) s += e - truth;
  return s / static_cast<double>(estimates.size());
}

double rmse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw InvalidArgument("rmse needs at least one estimate");
  double s = 0.0;
  for (double e : estimates) s += (e - truth) * (e - truth);
  return std::sqrt(s / static_cast<double>(estimates.size()));
}

double rmspe_se(std::span<const double> se_estimates, std::span<const double> se_truths) {
  if (se_estimates.size() != se_truths.size()) {
    throw InvalidArgument("standard error lists have different lengths");
  }
  if (se_estimates.empty()) throw InvalidArgument("rmspe needs at least one pair");
  double s = 0.0;
  for (std::size_t i = 0; i < se_estimates.size(); ++i) {
    if (!(se_truths[i] > 0.0)) throw InvalidArgument("true standard errors must be positive");
    const double rel = (se_estimates[i] - se_truths[i]) / se_truths[i];
    s += rel * rel;
  }
  return std::sqrt(s / static_cast<double>(se_estimates.size()));
}

double default_grid_range() { return 1.0 / (2.0 * std::numbers::pi); }

VectorXd analytic_grid_eigenvalues(Index grid_side, double range) {
  if (grid_side < 2) throw InvalidArgument("grid side must be at least 2");
  if (!(range > 0.0) || !std::isfinite(range)) throw InvalidArgument("range must be positive");
  const Index n = grid_side * grid_side;
  const double a = 1.0 / (range * range);
  const double b = 4.0 * std::numbers::pi * std::numbers::pi;
  VectorXd tau(n);
  for (Index p = 0; p < grid_side; ++p) {
    const double f1 = static_cast<double>(frequency(p, grid_side));
    for (Index q = 0; q < grid_side; ++q) {
      const double f2 = static_cast<double>(frequency(q, grid_side));
      tau[p * grid_side + q] = std::pow(a + b * (f1 * f1 + f2 * f2), -1.5);
    }
  }
  VectorXd lambda = (static_cast<double>(n) / tau.sum()) * tau;
  lambda.array() -= 1.0;
  std::sort(lambda.data(), lambda.data() + n, [](double x, double y) { return x > y; });
  return lambda;
}

double contribution_lower_bound(Index grid_side, double range, Index count) {
  const VectorXd lambda = analytic_grid_eigenvalues(grid_side, range);
  Index positive = 0;
  while (positive < lambda.size() && lambda[positive] > 0.0) ++positive;
  if (count < 1 || count > positive) {
    throw InvalidArgument("L must lie in [1, " + std::to_string(positive) +
                          "], the number of positive eigenvalues");
  }
  // The zero frequency has the largest tau, so it is the first entry. Its
  // term vanishes; every other mode is a full-period sinusoid with e'1 = 0.
  const double denom = lambda.segment(1, positive - 1).sum();
  if (!(denom > 0.0)) throw NumericalError("contribution bound", "no positive non-constant modes");
  return lambda.segment(1, count - 1).sum() / denom;
}

}  // namespace moranfilt

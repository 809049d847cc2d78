#include "moranfilt/esf.hpp"

#include "moranfilt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace moranfilt {

namespace {

void check_shapes(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis) {
  if (x.rows() != y.size()) throw InvalidArgument("X and y have different row counts");
  if (!basis.empty() && basis.rows() != y.size()) {
    throw InvalidArgument("basis and y have different row counts");
  }
  if (x.cols() < 1) throw InvalidArgument("X needs at least one column");
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("X and y must be finite");
}

double centered_tss(const VectorXd& y) { return (y.array() - y.mean()).square().sum(); }

double adjusted_r2(double rss, double tss, Index n, Index p) {
  if (tss <= 0.0 || n - p <= 0) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - (rss / static_cast<double>(n - p)) / (tss / static_cast<double>(n - 1));
}

// Solves the normal equations G b = h through a pivoted QR of D^-1/2 G D^-1/2.
// Returns b and the diagonal of G^-1.
void solve_gram(const MatrixXd& gram, const VectorXd& rhs, VectorXd& coef, VectorXd& inv_diag) {
  const Index p = gram.rows();
  const VectorXd d = gram.diagonal();
  for (Index j = 0; j < p; ++j) {
    if (!(d[j] > 0.0)) {
      throw CollinearityError("regressor column " + std::to_string(j) + " is identically zero",
                              {static_cast<long>(j)});
    }
  }
  const VectorXd s = d.cwiseSqrt().cwiseInverse();
  const MatrixXd scaled = s.asDiagonal() * gram * s.asDiagonal();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(scaled);
  qr.setThreshold(1e-12);
  if (qr.rank() < p) {
    std::vector<long> bad;
    for (Index k = qr.rank(); k < p; ++k) bad.push_back(static_cast<long>(qr.colsPermutation().indices()[k]));
    std::string list;
    for (long b : bad) list += (list.empty() ? "" : ", ") + std::to_string(b);
    throw CollinearityError("design [X, E] is rank deficient; dependent columns: " + list, bad);
  }
  coef = s.asDiagonal() * qr.solve(s.asDiagonal() * rhs);
  const MatrixXd inv = qr.inverse();
  inv_diag = (inv.diagonal().array() * s.array().square()).matrix();
}

EsfFit fit_columns(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis,
                   std::vector<Index> selected) {
  const Index n = y.size();
  const Index k = x.cols();
  const Index l = static_cast<Index>(selected.size());
  const Index p = k + l;
  if (n <= p) {
    throw InvalidArgument("insufficient data: n = " + std::to_string(n) + " but K + L' = " +
                          std::to_string(p));
  }
  MatrixXd e(n, l);
  for (Index j = 0; j < l; ++j) e.col(j) = basis.vectors.col(selected[static_cast<std::size_t>(j)]);

  MatrixXd gram(p, p);
  gram.topLeftCorner(k, k).noalias() = x.transpose() * x;
  gram.bottomLeftCorner(l, k).noalias() = e.transpose() * x;
  gram.topRightCorner(k, l) = gram.bottomLeftCorner(l, k).transpose();
  gram.bottomRightCorner(l, l).noalias() = e.transpose() * e;
  VectorXd rhs(p);
  rhs.head(k).noalias() = x.transpose() * y;
  rhs.tail(l).noalias() = e.transpose() * y;

  VectorXd coef;
  VectorXd inv_diag;
  solve_gram(gram, rhs, coef, inv_diag);

  EsfFit fit;
  fit.beta = coef.head(k);
  fit.gamma = coef.tail(l);
  fit.residuals = y - x * fit.beta - e * fit.gamma;
  fit.rss = fit.residuals.squaredNorm();
  fit.sigma2 = fit.rss / static_cast<double>(n - p);
  const VectorXd se = (fit.sigma2 * inv_diag).cwiseMax(0.0).cwiseSqrt();
  fit.beta_se = se.head(k);
  fit.gamma_se = se.tail(l);
  fit.selected = std::move(selected);
  fit.adj_r2 = adjusted_r2(fit.rss, centered_tss(y), n, p);
  return fit;
}

}  // namespace

std::vector<Index> screen_eigenvectors(const VectorXd& y, const EigenBasis& basis,
                                       double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw InvalidArgument("screening threshold must lie in [0, 1)");
  }
  if (!basis.empty() && basis.rows() != y.size()) {
    throw InvalidArgument("basis and y have different row counts");
  }
  const VectorXd yc = y.array() - y.mean();
  const double y_norm = yc.norm();
  if (!(y_norm > 1e-12 * std::max(1e-300, y.norm()))) {
    throw InvalidArgument("cannot screen eigenvectors against a constant response");
  }
  std::vector<Index> out;
  for (Index l = 0; l < basis.size(); ++l) {
    const VectorXd ec = basis.vectors.col(l).array() - basis.vectors.col(l).mean();
    const double e_norm = ec.norm();
    if (!(e_norm > 0.0)) continue;
    const double cor = yc.dot(ec) / (y_norm * e_norm);
    if (std::abs(cor) > threshold) out.push_back(l);
  }
  return out;
}

EsfFit fit_esf(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis,
               std::optional<double> screening) {
  check_shapes(x, y, basis);
  std::vector<Index> selected;
  if (screening) {
    selected = screen_eigenvectors(y, basis, *screening);
  } else {
    selected.resize(static_cast<std::size_t>(basis.size()));
    for (Index l = 0; l < basis.size(); ++l) selected[static_cast<std::size_t>(l)] = l;
  }
  return fit_columns(x, y, basis, std::move(selected));
}

EsfFit fit_ols(const MatrixXd& x, const VectorXd& y) {
  return fit_esf(x, y, EigenBasis::none(y.size()));
}

EsfFit fit_esf_stepwise(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis,
                        const StepwiseOptions& options) {
  check_shapes(x, y, basis);
  const Index n = y.size();
  if (n > options.max_n) {
    throw InvalidArgument("stepwise selection is limited to n <= " + std::to_string(options.max_n));
  }
  if (basis.size() > options.max_candidates) {
    throw InvalidArgument("stepwise selection is limited to " +
                          std::to_string(options.max_candidates) + " candidate eigenvectors");
  }
  const Index k = x.cols();
  const Index l = basis.size();
  const MatrixXd& e = basis.vectors;

  // Full cross-moment tables; every candidate model is a principal submatrix.
  const Index p_all = k + l;
  MatrixXd gram(p_all, p_all);
  gram.topLeftCorner(k, k).noalias() = x.transpose() * x;
  gram.bottomLeftCorner(l, k).noalias() = e.transpose() * x;
  gram.topRightCorner(k, l) = gram.bottomLeftCorner(l, k).transpose();
  gram.bottomRightCorner(l, l).noalias() = e.transpose() * e;
  VectorXd rhs(p_all);
  rhs.head(k).noalias() = x.transpose() * y;
  rhs.tail(l).noalias() = e.transpose() * y;
  const double yy = y.squaredNorm();
  const double tss = centered_tss(y);

  std::vector<Index> active(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) active[static_cast<std::size_t>(j)] = j;
  std::vector<char> used(static_cast<std::size_t>(l), 0);
  std::vector<Index> chosen;

  auto gather = [&](const std::vector<Index>& idx, MatrixXd& g, VectorXd& h) {
    const Index p = static_cast<Index>(idx.size());
    g.resize(p, p);
    h.resize(p);
    for (Index a = 0; a < p; ++a) {
      h[a] = rhs[idx[static_cast<std::size_t>(a)]];
      for (Index b = 0; b < p; ++b) g(a, b) = gram(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
  };

  MatrixXd g;
  VectorXd h;
  gather(active, g, h);
  Eigen::LLT<MatrixXd> chol(g);
  if (chol.info() != Eigen::Success) {
    throw CollinearityError("X is not of full column rank", {});
  }
  VectorXd q = chol.matrixL().solve(h);
  double rss = yy - q.squaredNorm();
  double best_adj = adjusted_r2(rss, tss, n, k);

  while (static_cast<Index>(active.size()) + 1 < n) {
    const Index p = static_cast<Index>(active.size());
    Index best = -1;
    double best_rss = rss;
    double best_score = best_adj;
    VectorXd cross(p);
    for (Index c = 0; c < l; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      const Index col = k + c;
      for (Index a = 0; a < p; ++a) cross[a] = gram(active[static_cast<std::size_t>(a)], col);
      const VectorXd w = chol.matrixL().solve(cross);
      const double resid_norm = gram(col, col) - w.squaredNorm();
      if (!(resid_norm > 1e-10 * gram(col, col))) continue;
      const double gain = rhs[col] - w.dot(q);
      const double cand_rss = rss - gain * gain / resid_norm;
      const double score = adjusted_r2(cand_rss, tss, n, p + 1);
      if (score > best_score) {
        best_score = score;
        best = c;
        best_rss = cand_rss;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = 1;
    chosen.push_back(best);
    active.push_back(k + best);
    gather(active, g, h);
    chol.compute(g);
    if (chol.info() != Eigen::Success) break;
    q = chol.matrixL().solve(h);
    rss = best_rss;
    best_adj = best_score;
  }

  std::sort(chosen.begin(), chosen.end());
  return fit_columns(x, y, basis, std::move(chosen));
}

}  // namespace moranfilt

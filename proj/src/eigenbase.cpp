#include "moranfilt/eigenbase.hpp"

#include "moranfilt/errors.hpp"
#include "moranfilt/io.hpp"
#include "kernel_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace moranfilt {

namespace {

constexpr Index kRowBlock = 2048;

// Symmetric eigen-decomposition with eigenpairs reordered to non-increasing.
void descending_eigen(const MatrixXd& a, VectorXd& values, MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigen-decomposition", "symmetric eigensolver did not converge");
  }
  values = solver.eigenvalues().reverse();
  vectors = solver.eigenvectors().rowwise().reverse();
}

// M A M for symmetric A, using A's column means.
MatrixXd double_center(const MatrixXd& a) {
  const VectorXd means = a.colwise().mean().transpose();
  const double grand = means.mean();
  MatrixXd out = a;
  out.colwise() -= means;
  out.rowwise() -= means.transpose();
  out.array() += grand;
  return out;
}

void require_moran_matrix(const ConnectivityMatrix& c) {
  const MatrixXd& v = c.values;
  if (v.rows() != v.cols() || v.rows() < 2) {
    throw InvalidArgument("connectivity matrix must be square with n >= 2");
  }
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  if (((v - v.transpose()).cwiseAbs().maxCoeff()) > 1e-12 * scale) {
    throw InvalidArgument("connectivity matrix is not symmetric");
  }
  if (v.diagonal().cwiseAbs().maxCoeff() != 0.0) {
    throw InvalidArgument("connectivity matrix must have a zero diagonal");
  }
}

}  // namespace

EigenBasis EigenBasis::none(Index n) {
  EigenBasis basis;
  basis.vectors.resize(n, 0);
  basis.values.resize(0);
  return basis;
}

EigenBasis EigenBasis::select(const std::vector<Index>& indices) const {
  EigenBasis out;
  out.mode = mode;
  out.knots = knots;
  out.kernel = kernel;
  out.vectors.resize(rows(), static_cast<Index>(indices.size()));
  out.values.resize(static_cast<Index>(indices.size()));
  for (Index k = 0; k < out.values.size(); ++k) {
    const Index src = indices[static_cast<std::size_t>(k)];
    if (src < 0 || src >= size()) throw InvalidArgument("eigenvector index out of range");
    out.vectors.col(k) = vectors.col(src);
    out.values[k] = values[src];
  }
  return out;
}

EigenBasis EigenBasis::leading(Index count) const {
  const Index keep = std::clamp<Index>(count, 0, size());
  EigenBasis out = *this;
  out.vectors.conservativeResize(Eigen::NoChange, keep);
  out.values.conservativeResize(keep);
  return out;
}

void normalize_signs(MatrixXd& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    auto col = vectors.col(j);
    const double cutoff = 1e-8 * col.cwiseAbs().maxCoeff();
    for (Index i = 0; i < col.size(); ++i) {
      if (std::abs(col[i]) > cutoff) {
        if (col[i] < 0.0) col = -col;
        break;
      }
    }
  }
}

EigenBasis exact_moran_eigen(const ConnectivityMatrix& c, bool keep_all) {
  require_moran_matrix(c);
  VectorXd values;
  MatrixXd vectors;
  descending_eigen(double_center(c.values), values, vectors);
  normalize_signs(vectors);

  EigenBasis basis;
  basis.mode = EigenMode::Exact;
  if (keep_all) {
    basis.values = std::move(values);
    basis.vectors = std::move(vectors);
    return basis;
  }
  // The constant vector is always an eigenvector with eigenvalue 0; values
  // within roundoff of zero are not treated as positive.
  const double zero_tol = static_cast<double>(values.size()) *
                          std::numeric_limits<double>::epsilon() *
                          std::max(1.0, values.cwiseAbs().maxCoeff());
  Index keep = 0;
  while (keep < values.size() && values[keep] > zero_tol) ++keep;
  basis.values = values.head(keep);
  basis.vectors = vectors.leftCols(keep);
  return basis;
}

CenteredKnotEigen centered_knot_eigen(const KnotSet& knots, const KernelSpec& spec) {
  const ConnectivityMatrix c_plus = build_connectivity(knots.knots, spec, false, knots.size());
  CenteredKnotEigen out;
  descending_eigen(double_center(c_plus.values), out.knot_values_plus_one, out.knot_vectors);
  return out;
}

EigenBasis nystrom_moran_eigen(const Coordinates& coords, const KnotSet& knots,
                               const KernelSpec& spec, const NystromOptions& options) {
  validate_kernel(spec);
  const Index n = coords.size();
  const Index l = knots.size();
  if (l < 2) throw InvalidArgument("Nystrom extension needs at least two knots");
  if (l > options.max_knots) {
    throw InvalidArgument("knot count " + std::to_string(l) + " exceeds the limit of " +
                          std::to_string(options.max_knots));
  }
  if (n < 2) throw InvalidArgument("Nystrom extension needs at least two sample sites");

  const ConnectivityMatrix c_plus = build_connectivity(knots.knots, spec, false, l);
  const Eigen::RowVectorXd knot_means = c_plus.values.colwise().mean();
  VectorXd mu;
  MatrixXd e_l;
  descending_eigen(double_center(c_plus.values), mu, e_l);

  const double rank_tol = mu[0] * 1e-12 * static_cast<double>(l);
  const double growth = static_cast<double>(l + n) / static_cast<double>(l);
  std::vector<Index> keep;
  bool any_rank = false;
  for (Index k = 0; k < l; ++k) {
    if (!(mu[k] > rank_tol)) continue;
    any_rank = true;
    if (growth * mu[k] - 1.0 > 0.0) keep.push_back(k);
  }
  if (!any_rank) {
    throw NumericalError("Nystrom extension",
                         "all knot eigenvalues are numerically zero; use more dispersed knots");
  }

  const Index kept = static_cast<Index>(keep.size());
  MatrixXd weights(l, kept);
  VectorXd values(kept);
  for (Index k = 0; k < kept; ++k) {
    const Index src = keep[static_cast<std::size_t>(k)];
    weights.col(k) = e_l.col(src) / mu[src];
    values[k] = growth * mu[src] - 1.0;
  }
  const Eigen::RowVectorXd offset = knot_means * weights;

  EigenBasis basis;
  basis.mode = EigenMode::Nystrom;
  basis.knots = knots;
  basis.kernel = spec;
  basis.values = std::move(values);
  basis.vectors.resize(n, kept);

  const Eigen::MatrixX2d& pts = coords.points();
  const Eigen::MatrixX2d& kp = knots.knots.points();
  MatrixXd block;
  for (Index start = 0; start < n; start += kRowBlock) {
    const Index rows = std::min(kRowBlock, n - start);
    block.resize(rows, l);
    for (Index j = 0; j < l; ++j) {
      for (Index i = 0; i < rows; ++i) {
        block(i, j) = detail::kernel_at(
            spec.family, std::sqrt(detail::squared_distance(pts, start + i, kp, j)) / spec.range);
      }
    }
    basis.vectors.middleRows(start, rows).noalias() = block * weights;
    basis.vectors.middleRows(start, rows).rowwise() -= offset;
  }
  normalize_signs(basis.vectors);
  return basis;
}

double moran_coefficient(const VectorXd& y, const ConnectivityMatrix& c) {
  require_moran_matrix(c);
  const Index n = c.rows();
  if (y.size() != n) throw InvalidArgument("vector length does not match connectivity size");
  const double s0 = c.values.sum();
  if (s0 == 0.0) throw InvalidArgument("degenerate connectivity: 1'C1 = 0");
  const VectorXd z = y.array() - y.mean();
  const double denom = z.squaredNorm();
  if (!(denom > 1e-24 * std::max(1e-300, y.squaredNorm()))) {
    throw InvalidArgument("Moran coefficient undefined for a constant vector");
  }
  const double numer = z.dot(c.values * z);
  return static_cast<double>(n) / s0 * numer / denom;
}

void write_basis_csv(const EigenBasis& basis, std::ostream& vectors_out,
                     std::ostream& values_out) {
  const Index l = basis.size();
  vectors_out << "id";
  for (Index j = 0; j < l; ++j) vectors_out << ",ev_" << (j + 1);
  vectors_out << '\n';
  for (Index i = 0; i < basis.rows(); ++i) {
    vectors_out << (i + 1);
    for (Index j = 0; j < l; ++j) vectors_out << ',' << io::format_double(basis.vectors(i, j));
    vectors_out << '\n';
  }
  for (Index j = 0; j < l; ++j) values_out << (j ? "," : "") << "ev_" << (j + 1);
  values_out << '\n';
  for (Index j = 0; j < l; ++j) values_out << (j ? "," : "") << io::format_double(basis.values[j]);
  values_out << '\n';
}

}  // namespace moranfilt

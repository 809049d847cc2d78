#pragma once

#include "moranfilt/spatial_graph.hpp"
#include "moranfilt/types.hpp"

#include <iosfwd>
#include <optional>

namespace moranfilt {

enum class EigenMode { Exact, Nystrom };

/// Moran eigenvectors (columns of `vectors`) with their eigenvalues in
/// non-increasing order. Only pairs with positive eigenvalue are kept unless
/// an exact decomposition was requested with all pairs.
struct EigenBasis {
  MatrixXd vectors;
  VectorXd values;
  EigenMode mode = EigenMode::Nystrom;
  std::optional<KnotSet> knots;
  KernelSpec kernel;

  Index rows() const noexcept { return vectors.rows(); }
  Index size() const noexcept { return vectors.cols(); }
  bool empty() const noexcept { return vectors.cols() == 0; }

  /// Basis with no columns over n sites, for plain linear models.
  static EigenBasis none(Index n);
  /// Columns `indices` of this basis, in the given order.
  EigenBasis select(const std::vector<Index>& indices) const;
  /// First `count` columns (or all if fewer).
  EigenBasis leading(Index count) const;
};

/// Eigen-decomposition of the doubly centred knot matrix M_L C_L+ M_L.
struct CenteredKnotEigen {
  MatrixXd knot_vectors;        ///< L x L, columns in non-increasing eigenvalue order
  VectorXd knot_values_plus_one;  ///< eigenvalues of M_L C_L+ M_L
};

CenteredKnotEigen centered_knot_eigen(const KnotSet& knots, const KernelSpec& spec);

/// Eigen-decomposition of M C M for a dense zero-diagonal symmetric C.
/// Eigenvectors are unit norm with the first non-negligible entry positive.
EigenBasis exact_moran_eigen(const ConnectivityMatrix& c, bool keep_all = false);

struct NystromOptions {
  Index max_knots = 1000;
};

/// Nystrom approximation of the leading Moran eigenpairs from L knots:
///
///   E_hat      = [C_nL - 1 (1' C_L+ / L)] E_L (Lambda_L + I)^-1
///   Lambda_hat = ((L + n) / L) (Lambda_L + I) - I
///
/// where M_L C_L+ M_L = E_L (Lambda_L + I) E_L'. Columns whose knot eigenvalue
/// Lambda_L + 1 falls below (Lambda_L,1 + 1) * 1e-12 * L, or whose Lambda_hat
/// is not positive, are dropped. Rows of C_nL are generated in blocks, so the
/// n x L cross matrix is never stored whole.
EigenBasis nystrom_moran_eigen(const Coordinates& coords, const KnotSet& knots,
                               const KernelSpec& spec, const NystromOptions& options = {});

/// Moran coefficient (n / 1'C1) (y'MCMy / y'My).
double moran_coefficient(const VectorXd& y, const ConnectivityMatrix& c);

/// Flips each column so its first entry with magnitude above 1e-8 of the
/// column maximum is positive.
void normalize_signs(MatrixXd& vectors);

/// Writes `id,ev_1,...,ev_L` rows (ids are 1-based) to `vectors_out` and a
/// single-row `ev_1,...,ev_L` table of eigenvalues to `values_out`.
void write_basis_csv(const EigenBasis& basis, std::ostream& vectors_out, std::ostream& values_out);

}  // namespace moranfilt

#pragma once

#include "moranfilt/types.hpp"

#include <cstdint>
#include <optional>

namespace moranfilt {

/// Row limit for routines that materialize dense n x n objects. Defaults to
/// 20,000 and can be overridden through the MORANFILT_DENSE_CAP environment
/// variable.
Index dense_cap();

/// Kernel weight at distance d. Exponential exp(-d/r), Gaussian exp(-(d/r)^2),
/// spherical 1 - 1.5 h + 0.5 h^3 for h = d/r <= 1 and 0 beyond.
double kernel_value(const KernelSpec& spec, double d);

/// Validates spec.range > 0 and finite.
void validate_kernel(const KernelSpec& spec);

struct RangeOptions {
  /// Above this many points the tree is built on a uniform subsample of this
  /// size. Unset means dense_cap().
  std::optional<Index> max_points;
  std::uint64_t seed = 0;
};

/// Longest edge of the Euclidean minimum spanning tree (Prim, O(n^2) time,
/// O(n) memory, distances computed on the fly).
double estimate_range_mst(const Coordinates& coords, const RangeOptions& options = {});

struct KnotSet {
  Coordinates knots;
  std::uint64_t source_seed = 0;

  Index size() const noexcept { return knots.size(); }
};

struct KmeansOptions {
  int max_iterations = 100;
};

/// L k-means centres of the sample sites. Seeding is k-means++ (squared
/// distance sampling); Lloyd iterations run until no assignment changes or
/// max_iterations is reached. Empty clusters are reseeded with the point
/// farthest from its centre. L == n copies the coordinates.
KnotSet select_knots(const Coordinates& coords, Index count, std::uint64_t seed,
                     const KmeansOptions& options = {});

/// Dense kernel weights; C when diagonal_zeroed, C+ = C + I or a cross
/// block C_nL otherwise.
struct ConnectivityMatrix {
  MatrixXd values;
  bool diagonal_zeroed = false;

  Index rows() const noexcept { return values.rows(); }
  Index cols() const noexcept { return values.cols(); }
};

/// n x n kernel matrix over the sample sites. Each pair is evaluated once and
/// mirrored, so the result is exactly symmetric. Refuses n above `cap`
/// (default dense_cap()).
ConnectivityMatrix build_connectivity(const Coordinates& coords, const KernelSpec& spec,
                                      bool zero_diagonal,
                                      std::optional<Index> cap = std::nullopt);

/// n x L kernel matrix between sample sites and knots.
ConnectivityMatrix build_cross_connectivity(const Coordinates& coords, const KnotSet& knots,
                                            const KernelSpec& spec);

}  // namespace moranfilt

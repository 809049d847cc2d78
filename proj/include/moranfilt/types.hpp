#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace moranfilt {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// n planar sample positions, one per row.
class Coordinates {
public:
  Coordinates() = default;
  /// Throws InvalidArgument on non-finite entries.
  explicit Coordinates(Eigen::MatrixX2d points);

  Index size() const noexcept { return points_.rows(); }
  const Eigen::MatrixX2d& points() const noexcept { return points_; }
  Eigen::RowVector2d operator[](Index i) const { return points_.row(i); }

  /// Rows selected by `rows`, in the given order.
  Coordinates subset(const std::vector<Index>& rows) const;

private:
  Eigen::MatrixX2d points_;
};

enum class KernelFamily { Exponential, Spherical, Gaussian };

struct KernelSpec {
  KernelFamily family = KernelFamily::Exponential;
  double range = 1.0;
};

/// Short tag used on the command line and in reports: "exp", "sph", "gau".
std::string_view kernel_tag(KernelFamily family);
/// Inverse of kernel_tag; throws InvalidArgument on unknown tags.
KernelFamily parse_kernel_tag(std::string_view tag);

}  // namespace moranfilt

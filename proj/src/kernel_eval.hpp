#pragma once

#include "moranfilt/types.hpp"

#include <cmath>

namespace moranfilt::detail {

// Unchecked kernel at scaled distance h = d / r.
inline double kernel_at(KernelFamily family, double h) {
  switch (family) {
    case KernelFamily::Exponential:
      return std::exp(-h);
    case KernelFamily::Gaussian:
      return std::exp(-h * h);
    case KernelFamily::Spherical:
      return h <= 1.0 ? 1.0 - 1.5 * h + 0.5 * h * h * h : 0.0;
  }
  return 0.0;
}

inline double squared_distance(const Eigen::MatrixX2d& p, Index i, const Eigen::MatrixX2d& q,
                               Index j) {
  const double dx = p(i, 0) - q(j, 0);
  const double dy = p(i, 1) - q(j, 1);
  return dx * dx + dy * dy;
}

}  // namespace moranfilt::detail

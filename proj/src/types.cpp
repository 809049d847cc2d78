#include "moranfilt/types.hpp"

#include "moranfilt/errors.hpp"

namespace moranfilt {

Coordinates::Coordinates(Eigen::MatrixX2d points) : points_(std::move(points)) {
  if (!points_.allFinite()) {
    throw InvalidArgument("coordinates contain NaN or infinite values");
  }
}

Coordinates Coordinates::subset(const std::vector<Index>& rows) const {
  Eigen::MatrixX2d out(static_cast<Index>(rows.size()), 2);
  for (Index k = 0; k < out.rows(); ++k) {
    out.row(k) = points_.row(rows[static_cast<std::size_t>(k)]);
  }
  return Coordinates(std::move(out));
}

std::string_view kernel_tag(KernelFamily family) {
  switch (family) {
    case KernelFamily::Exponential: return "exp";
    case KernelFamily::Spherical: return "sph";
    case KernelFamily::Gaussian: return "gau";
  }
  return "exp";
}

KernelFamily parse_kernel_tag(std::string_view tag) {
  if (tag == "exp" || tag == "exponential") return KernelFamily::Exponential;
  if (tag == "sph" || tag == "spherical") return KernelFamily::Spherical;
  if (tag == "gau" || tag == "gaussian") return KernelFamily::Gaussian;
  throw InvalidArgument("unknown kernel '" + std::string(tag) + "' (expected exp, sph or gau)");
}

}  // namespace moranfilt

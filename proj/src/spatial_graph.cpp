#include "moranfilt/spatial_graph.hpp"

#include "moranfilt/errors.hpp"
#include "moranfilt/random.hpp"
#include "kernel_eval.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <vector>

namespace moranfilt {

namespace {

constexpr Index kDefaultDenseCap = 20000;

using detail::squared_distance;

}  // namespace

Index dense_cap() {
  if (const char* env = std::getenv("MORANFILT_DENSE_CAP")) {
    char* end = nullptr;
    const long long value = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<Index>(value);
    throw InvalidArgument("MORANFILT_DENSE_CAP must be a positive integer, got '" +
                          std::string(env) + "'");
  }
  return kDefaultDenseCap;
}

void validate_kernel(const KernelSpec& spec) {
  if (!(spec.range > 0.0) || !std::isfinite(spec.range)) {
    throw InvalidArgument("kernel range must be positive and finite");
  }
}

double kernel_value(const KernelSpec& spec, double d) {
  validate_kernel(spec);
  if (!(d >= 0.0)) throw InvalidArgument("kernel distance must be nonnegative");
  return detail::kernel_at(spec.family, d / spec.range);
}

double estimate_range_mst(const Coordinates& coords, const RangeOptions& options) {
  const Index n_all = coords.size();
  if (n_all < 2) throw InvalidArgument("range estimation needs at least two points");

  const Index cap = options.max_points.value_or(dense_cap());
  Eigen::MatrixX2d pts;
  if (n_all > cap) {
    pts = coords.subset(uniform_subsample(n_all, cap, options.seed)).points();
  } else {
    pts = coords.points();
  }
  const Index n = pts.rows();

  // Prim on the complete graph; squared lengths preserve the ordering.
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  Index current = 0;
  in_tree[0] = 1;
  double longest = 0.0;
  for (Index step = 1; step < n; ++step) {
    Index next = -1;
    double next_dist = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (in_tree[static_cast<std::size_t>(j)]) continue;
      const double d = squared_distance(pts, current, pts, j);
      double& b = best[static_cast<std::size_t>(j)];
      if (d < b) b = d;
      if (b < next_dist) {
        next_dist = b;
        next = j;
      }
    }
    in_tree[static_cast<std::size_t>(next)] = 1;
    if (next_dist > longest) longest = next_dist;
    current = next;
  }
  const double range = std::sqrt(longest);
  if (!(range > 0.0)) {
    throw NumericalError("range estimation", "all points coincide; the MST range would be 0");
  }
  return range;
}

KnotSet select_knots(const Coordinates& coords, Index count, std::uint64_t seed,
                     const KmeansOptions& options) {
  const Index n = coords.size();
  if (count < 1 || count > n) {
    throw InvalidArgument("knot count must lie in [1, n]; got " + std::to_string(count) +
                          " for n = " + std::to_string(n));
  }
  if (count == n) return KnotSet{coords, seed};

  const Eigen::MatrixX2d& pts = coords.points();
  Rng rng = make_stream(seed, 0x6b6d);

  // k-means++ seeding.
  Eigen::MatrixX2d centres(count, 2);
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  {
    std::uniform_int_distribution<Index> first(0, n - 1);
    centres.row(0) = pts.row(first(rng));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Index c = 1; c < count; ++c) {
      double total = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double d = squared_distance(pts, i, centres, c - 1);
        double& m = nearest[static_cast<std::size_t>(i)];
        if (d < m) m = d;
        total += m;
      }
      Index chosen = n - 1;
      if (total > 0.0) {
        const double target = unit(rng) * total;
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) {
          acc += nearest[static_cast<std::size_t>(i)];
          if (acc > target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = 0;
      }
      centres.row(c) = pts.row(chosen);
    }
  }

  // Lloyd iterations.
  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  std::vector<double> assign_dist(static_cast<std::size_t>(n), 0.0);
  Eigen::MatrixX2d sums(count, 2);
  std::vector<Index> members(static_cast<std::size_t>(count));
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best_c = 0;
      double best_d = squared_distance(pts, i, centres, 0);
      for (Index c = 1; c < count; ++c) {
        const double d = squared_distance(pts, i, centres, c);
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best_c) changed = true;
      assign[static_cast<std::size_t>(i)] = best_c;
      assign_dist[static_cast<std::size_t>(i)] = best_d;
    }
    if (!changed) break;

    sums.setZero();
    std::fill(members.begin(), members.end(), Index{0});
    for (Index i = 0; i < n; ++i) {
      const Index c = assign[static_cast<std::size_t>(i)];
      sums.row(c) += pts.row(i);
      ++members[static_cast<std::size_t>(c)];
    }
    for (Index c = 0; c < count; ++c) {
      const Index m = members[static_cast<std::size_t>(c)];
      if (m > 0) {
        centres.row(c) = sums.row(c) / static_cast<double>(m);
        continue;
      }
      // Empty cluster: take the point farthest from its current centre.
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (assign_dist[static_cast<std::size_t>(i)] > far_d) {
          far_d = assign_dist[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      centres.row(c) = pts.row(far);
      assign_dist[static_cast<std::size_t>(far)] = 0.0;
    }
  }
  return KnotSet{Coordinates(std::move(centres)), seed};
}

ConnectivityMatrix build_connectivity(const Coordinates& coords, const KernelSpec& spec,
                                      bool zero_diagonal, std::optional<Index> cap) {
  validate_kernel(spec);
  const Index n = coords.size();
  if (n < 2) throw InvalidArgument("connectivity needs at least two points");
  const Index limit = cap.value_or(dense_cap());
  if (n > limit) {
    throw InvalidArgument("dense connectivity refused for n = " + std::to_string(n) +
                          " (cap " + std::to_string(limit) +
                          "; raise MORANFILT_DENSE_CAP to override)");
  }
  const Eigen::MatrixX2d& pts = coords.points();
  ConnectivityMatrix out{MatrixXd(n, n), zero_diagonal};
  for (Index j = 0; j < n; ++j) {
    out.values(j, j) = zero_diagonal ? 0.0 : 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double c =
          detail::kernel_at(spec.family, std::sqrt(squared_distance(pts, i, pts, j)) / spec.range);
      out.values(i, j) = c;
      out.values(j, i) = c;
    }
  }
  return out;
}

ConnectivityMatrix build_cross_connectivity(const Coordinates& coords, const KnotSet& knots,
                                            const KernelSpec& spec) {
  validate_kernel(spec);
  const Index n = coords.size();
  const Index l = knots.size();
  if (n < 1 || l < 1) throw InvalidArgument("cross connectivity needs points and knots");
  const Eigen::MatrixX2d& pts = coords.points();
  const Eigen::MatrixX2d& kp = knots.knots.points();
  ConnectivityMatrix out{MatrixXd(n, l), false};
  for (Index j = 0; j < l; ++j) {
    for (Index i = 0; i < n; ++i) {
      out.values(i, j) =
          detail::kernel_at(spec.family, std::sqrt(squared_distance(pts, i, kp, j)) / spec.range);
    }
  }
  return out;
}

}  // namespace moranfilt

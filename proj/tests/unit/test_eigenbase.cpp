#include "moranfilt/eigenbase.hpp"
#include "moranfilt/errors.hpp"
#include "moranfilt/spatial_graph.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <random>
#include <sstream>

using namespace moranfilt;

namespace {

ConnectivityMatrix constant_offdiag(Index n, double c) {
  ConnectivityMatrix m{MatrixXd::Constant(n, n, c), true};
  m.values.diagonal().setZero();
  return m;
}

double max_sign_aligned_gap(const VectorXd& a, const VectorXd& b) {
  return std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("two sites: no positive eigenvalue, full set is {0, -c}") {
  const auto c = constant_offdiag(2, 0.4);
  CHECK(exact_moran_eigen(c).empty());
  const EigenBasis all = exact_moran_eigen(c, true);
  REQUIRE(all.size() == 2);
  CHECK(all.values[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(all.values[1] == doctest::Approx(-0.4));
}

TEST_CASE("equilateral triangle: eigenvalues {0, -c, -c}") {
  const auto c = constant_offdiag(3, 0.25);
  CHECK(exact_moran_eigen(c).empty());
  const EigenBasis all = exact_moran_eigen(c, true);
  REQUIRE(all.size() == 3);
  CHECK(std::abs(all.values[0]) < 1e-14);
  CHECK(all.values[1] == doctest::Approx(-0.25));
  CHECK(all.values[2] == doctest::Approx(-0.25));
}

TEST_CASE("exact eigenpairs satisfy MCM e = lambda e and are orthonormal") {
  const Coordinates coords(oracle::random_points(50, 17));
  const auto c = build_connectivity(coords, {KernelFamily::Exponential, 0.3}, true);
  const EigenBasis b = exact_moran_eigen(c);
  REQUIRE(b.size() > 0);
  CHECK(b.mode == EigenMode::Exact);
  const MatrixXd mcm = oracle::double_centered(c.values);
  for (Index l = 0; l < b.size(); ++l) {
    CHECK((mcm * b.vectors.col(l) - b.values[l] * b.vectors.col(l)).norm() < 1e-8);
    CHECK(b.values[l] > 0.0);
    if (l > 0) CHECK(b.values[l] <= b.values[l - 1]);
  }
  const MatrixXd gram = b.vectors.transpose() * b.vectors;
  CHECK((gram - MatrixXd::Identity(b.size(), b.size())).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((b.vectors.colwise().sum()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("trace identity and the C+ shift") {
  const Coordinates coords(oracle::random_points(60, 2));
  const auto c = build_connectivity(coords, {KernelFamily::Exponential, 0.25}, true);
  const EigenBasis all = exact_moran_eigen(c, true);
  const MatrixXd mcm = oracle::double_centered(c.values);
  CHECK(std::abs(all.values.sum() - mcm.trace()) < 1e-8);

  const MatrixXd plus = oracle::double_centered(c.values + MatrixXd::Identity(60, 60));
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(plus);
  VectorXd shifted = all.values.array() + 1.0;
  // The constant vector keeps eigenvalue 0 under both centrings.
  Index constant_idx = 0;
  (all.vectors.transpose() * VectorXd::Ones(60)).cwiseAbs().maxCoeff(&constant_idx);
  shifted[constant_idx] = 0.0;
  std::sort(shifted.data(), shifted.data() + shifted.size());
  CHECK((solver.eigenvalues() - shifted).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("exact decomposition validation") {
  ConnectivityMatrix c{MatrixXd::Zero(3, 3), true};
  c.values(0, 1) = 0.5;
  CHECK_THROWS_AS(exact_moran_eigen(c), InvalidArgument);
  ConnectivityMatrix d = constant_offdiag(3, 0.2);
  d.values(1, 1) = 1.0;
  CHECK_THROWS_AS(exact_moran_eigen(d), InvalidArgument);
  ConnectivityMatrix e{MatrixXd::Zero(2, 3), true};
  CHECK_THROWS_AS(exact_moran_eigen(e), InvalidArgument);
}

TEST_CASE("sign convention: first non-negligible entry positive") {
  const Coordinates coords(oracle::random_points(40, 4));
  const KernelSpec spec{KernelFamily::Exponential, 0.3};
  const EigenBasis b = exact_moran_eigen(build_connectivity(coords, spec, true));
  const EigenBasis ny = nystrom_moran_eigen(coords, select_knots(coords, 10, 1), spec);
  for (const EigenBasis* basis : {&b, &ny}) {
    for (Index l = 0; l < basis->size(); ++l) {
      const auto col = basis->vectors.col(l);
      const double cutoff = 1e-8 * col.cwiseAbs().maxCoeff();
      for (Index i = 0; i < col.size(); ++i) {
        if (std::abs(col[i]) > cutoff) {
          CHECK(col[i] > 0.0);
          break;
        }
      }
    }
  }
}

TEST_CASE("Moran coefficient of exact eigenvectors equals (n / 1'C1) lambda") {
  const Coordinates coords(oracle::random_points(80, 9));
  const auto c = build_connectivity(coords, {KernelFamily::Exponential, 0.2}, true);
  const EigenBasis b = exact_moran_eigen(c);
  const double scale = 80.0 / c.values.sum();
  for (Index l = 0; l < std::min<Index>(b.size(), 10); ++l) {
    CHECK(std::abs(moran_coefficient(b.vectors.col(l), c) - scale * b.values[l]) < 1e-10);
  }
}

TEST_CASE("Moran coefficient hand example and oracle") {
  const auto c = constant_offdiag(2, 0.6);
  VectorXd y(2);
  y << 1.0, -1.0;
  CHECK(moran_coefficient(y, c) == doctest::Approx(-1.0).epsilon(1e-14));

  const Coordinates coords(oracle::random_points(30, 3));
  const auto cc = build_connectivity(coords, {KernelFamily::Gaussian, 0.4}, true);
  const VectorXd z = VectorXd::LinSpaced(30, -1.0, 2.0).array().square();
  CHECK(moran_coefficient(z, cc) == doctest::Approx(oracle::moran_dense(z, cc.values)).epsilon(1e-12));
}

TEST_CASE("Moran coefficient errors") {
  const auto c = constant_offdiag(4, 0.3);
  CHECK_THROWS_AS(moran_coefficient(VectorXd::Constant(4, 2.0), c), InvalidArgument);
  const auto zero = constant_offdiag(4, 0.0);
  CHECK_THROWS_AS(moran_coefficient(VectorXd::LinSpaced(4, 0, 1), zero), InvalidArgument);
}

TEST_CASE("Moran coefficient of shuffled values on a lattice is near its null mean") {
  const Index side = 30;
  Eigen::MatrixX2d grid(side * side, 2);
  for (Index i = 0; i < side; ++i) {
    for (Index j = 0; j < side; ++j) grid.row(i * side + j) << double(i), double(j);
  }
  const auto c = build_connectivity(Coordinates(grid), {KernelFamily::Exponential, 1.0}, true);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  VectorXd y(side * side);
  for (Index i = 0; i < y.size(); ++i) y[i] = nd(rng);
  const double n = static_cast<double>(y.size());
  CHECK(std::abs(moran_coefficient(y, c) + 1.0 / (n - 1.0)) < 0.02);
}

TEST_CASE("centred knot eigenpairs are orthonormal, orthogonal to 1 and non-negative") {
  const Coordinates coords(oracle::random_points(300, 6));
  const KnotSet knots = select_knots(coords, 40, 2);
  const auto ck = centered_knot_eigen(knots, {KernelFamily::Exponential, 0.2});
  const Index l = 40;
  CHECK((ck.knot_vectors.transpose() * ck.knot_vectors - MatrixXd::Identity(l, l))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  CHECK(ck.knot_values_plus_one.minCoeff() > -1e-10);
  // All but the constant direction are orthogonal to 1.
  const VectorXd proj = ck.knot_vectors.transpose() * VectorXd::Ones(l);
  Index constant_idx = 0;
  proj.cwiseAbs().maxCoeff(&constant_idx);
  for (Index k = 0; k < l; ++k) {
    if (k != constant_idx) CHECK(std::abs(proj[k]) < 1e-8);
  }
}

TEST_CASE("Nystrom with knots at the sites recovers the exact eigenvectors") {
  for (Index n : {50, 150}) {
    const Coordinates coords(oracle::random_points(n, 40 + n));
    const KernelSpec spec{KernelFamily::Exponential, estimate_range_mst(coords)};
    const EigenBasis all = exact_moran_eigen(build_connectivity(coords, spec, true), true);
    // The constant vector is an exact eigenvector with eigenvalue 0 that the
    // centred knot construction annihilates.
    std::vector<Index> keep;
    for (Index l = 0; l < all.size(); ++l) {
      if (std::abs(all.vectors.col(l).sum()) < 0.5) keep.push_back(l);
    }
    REQUIRE(static_cast<Index>(keep.size()) == n - 1);
    const EigenBasis exact = all.select(keep);
    const EigenBasis ny = nystrom_moran_eigen(coords, select_knots(coords, n, 0), spec);
    REQUIRE(ny.size() > 0);
    CHECK(ny.size() <= n);
    for (Index l = 0; l < ny.size(); ++l) {
      CHECK(max_sign_aligned_gap(ny.vectors.col(l), exact.vectors.col(l)) < 1e-6);
      // Eigenvalue mapping for L = n: 2 (lambda + 1) - 1.
      CHECK(ny.values[l] == doctest::Approx(2.0 * exact.values[l] + 1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("Nystrom eigenvectors carry positive Moran coefficients") {
  const Coordinates coords(oracle::random_points(2000, 12));
  const KernelSpec spec{KernelFamily::Exponential, estimate_range_mst(coords)};
  const EigenBasis ny = nystrom_moran_eigen(coords, select_knots(coords, 200, 3), spec);
  REQUIRE(ny.size() > 0);
  CHECK(ny.size() <= 200);
  const auto c = build_connectivity(coords, spec, true);
  for (Index l = 0; l < ny.size(); ++l) {
    CHECK(moran_coefficient(ny.vectors.col(l), c) > 0.0);
    CHECK(ny.values[l] > 0.0);
    if (l > 0) CHECK(ny.values[l] <= ny.values[l - 1]);
  }
}

TEST_CASE("Nystrom is deterministic and invariant to a joint rescaling of sites and range") {
  const auto p = oracle::random_points(400, 13);
  const Coordinates coords(p);
  const KnotSet knots = select_knots(coords, 30, 8);
  const KernelSpec spec{KernelFamily::Spherical, 0.5};
  const EigenBasis a = nystrom_moran_eigen(coords, knots, spec);
  const EigenBasis b = nystrom_moran_eigen(coords, knots, spec);
  CHECK(a.vectors == b.vectors);
  CHECK(a.values == b.values);

  const double s = 3.7;
  const Coordinates scaled(Eigen::MatrixX2d(p * s));
  const KnotSet scaled_knots{Coordinates(Eigen::MatrixX2d(knots.knots.points() * s)), 0};
  const EigenBasis c = nystrom_moran_eigen(scaled, scaled_knots, {KernelFamily::Spherical, 0.5 * s});
  REQUIRE(c.size() == a.size());
  CHECK((c.vectors - a.vectors).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Nystrom rank collapse and argument checks") {
  const Coordinates coords(oracle::random_points(20, 1));
  Eigen::MatrixX2d same(3, 2);
  same.setConstant(0.5);
  CHECK_THROWS_AS(nystrom_moran_eigen(coords, KnotSet{Coordinates(same), 0}, {}),
                  NumericalError);
  Eigen::MatrixX2d one(1, 2);
  one << 0.1, 0.2;
  CHECK_THROWS_AS(nystrom_moran_eigen(coords, KnotSet{Coordinates(one), 0}, {}), InvalidArgument);
  NystromOptions opts;
  opts.max_knots = 5;
  CHECK_THROWS_AS(nystrom_moran_eigen(coords, select_knots(coords, 6, 1), {}, opts),
                  InvalidArgument);
}

TEST_CASE("basis CSV export") {
  EigenBasis b;
  b.vectors.resize(2, 2);
  b.vectors << 0.5, -0.25, 1.0, 0.125;
  b.values.resize(2);
  b.values << 3.0, 0.1;
  std::ostringstream vec;
  std::ostringstream val;
  write_basis_csv(b, vec, val);
  CHECK(vec.str() == "id,ev_1,ev_2\n1,0.5,-0.25\n2,1,0.125\n");
  CHECK(val.str() == "ev_1,ev_2\n3,0.10000000000000001\n");
}

TEST_CASE("basis selection helpers") {
  EigenBasis b;
  b.vectors = MatrixXd::Random(5, 3);
  b.values = VectorXd::LinSpaced(3, 3.0, 1.0);
  const EigenBasis s = b.select({2, 0});
  CHECK(s.values[0] == 1.0);
  CHECK(s.vectors.col(1) == b.vectors.col(0));
  CHECK(b.leading(2).size() == 2);
  CHECK(b.leading(10).size() == 3);
  CHECK_THROWS_AS(b.select({3}), InvalidArgument);
  CHECK(EigenBasis::none(7).rows() == 7);
  CHECK(EigenBasis::none(7).empty());
}

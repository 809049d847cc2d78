#pragma once

// Brute-force reference computations used only by the tests. They form dense
// n x n objects or enumerate combinatorially, so they are limited to small n.

#include "moranfilt/eigenbase.hpp"
#include "moranfilt/types.hpp"

#include <cstdint>
#include <functional>

namespace oracle {

using moranfilt::Index;
using moranfilt::MatrixXd;
using moranfilt::VectorXd;

/// Longest edge of the minimum spanning tree found by trying every subset of
/// n - 1 edges (n <= 6).
double mst_max_edge_enumerated(const Eigen::MatrixX2d& pts);

/// Longest edge of the MST by Kruskal with a union-find.
double mst_max_edge_kruskal(const Eigen::MatrixX2d& pts);

/// Dense M C M for a zero-diagonal C.
MatrixXd double_centered(const MatrixXd& c);

/// Moran coefficient straight from its definition with explicit M.
double moran_dense(const VectorXd& y, const MatrixXd& c);

/// Restricted log-likelihood with the residual variance profiled out, from
/// the dense covariance sigma2 * (I + s E Lambda(alpha) E'):
///
///   -1/2 log|H| - 1/2 log|X' H^-1 X| - (n-K)/2 log(y' P y / (n-K)).
double dense_reml(const MatrixXd& x, const VectorXd& y, const MatrixXd& e,
                  const VectorXd& values, double alpha, double sigma_gamma2);

/// GLS standard errors under sigma_gamma2 E Lambda(alpha) E' + sigma2 I via a
/// dense inverse.
VectorXd dense_gls_se(const MatrixXd& x, const MatrixXd& e, const VectorXd& values, double alpha,
                      double sigma_gamma2, double sigma2);

/// Trace-preserving eigenvalue power computed term by term.
VectorXd lambda_power(const VectorXd& values, double alpha);

/// Maximizes f over (log s, log a) by a shrinking compass search.
struct Argmax {
  double log_s;
  double log_a;
  double value;
};
Argmax compass_maximize(const std::function<double(double, double)>& f, double log_s0,
                        double log_a0, double tol = 1e-7);

/// Random points in the unit square.
Eigen::MatrixX2d random_points(Index n, std::uint64_t seed);

}  // namespace oracle

#pragma once

#include "moranfilt/eigenbase.hpp"
#include "moranfilt/errors.hpp"
#include "moranfilt/types.hpp"

namespace moranfilt {

/// Cross-moments of [X, E, y]. Everything the random-effects likelihood
/// needs; no n-sized object is kept.
struct MomentSet {
  MatrixXd xx;  ///< X'X, K x K
  MatrixXd ex;  ///< E'X, L x K
  MatrixXd ee;  ///< E'E, L x L
  VectorXd xy;  ///< X'y
  VectorXd ey;  ///< E'y
  double yy = 0.0;
  Index n = 0;

  Index k() const noexcept { return xx.rows(); }
  Index l() const noexcept { return ee.rows(); }
};

/// Variance parameters of the random eigenvector coefficients.
///
/// `sigma_gamma2` scales Lambda(alpha). Inside the restricted likelihood it is
/// relative to the residual variance, i.e. Var(gamma) = sigma2 * sigma_gamma2
/// * Lambda(alpha); with unit residual variance the two readings coincide.
struct Theta {
  double alpha = 1.0;
  double sigma_gamma2 = 0.0;
};

/// Trace-preserving power of the eigenvalues: (sum lambda / sum lambda^alpha)
/// lambda^alpha. Requires positive eigenvalues and finite alpha >= 0.
VectorXd lambda_alpha(const VectorXd& values, double alpha);

/// Accumulates all six moments in one pass over row blocks.
MomentSet compute_moments(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis);

struct ProfileEvaluation {
  double loglik = 0.0;
  VectorXd beta;
  VectorXd u;
  double rss = 0.0;  ///< residual sum of squares e'e recovered from moments
  double log_det = 0.0;
};

/// Profile restricted log-likelihood at theta, evaluated from moments alone.
///
/// With V = sigma_gamma * Lambda(alpha)^1/2 and
///
///   B = [ X'X      X'E V        ]
///       [ V E'X    V E'E V + I  ],
///
/// [beta; u] solves B [beta; u] = [X'y; V E'y], the residual sum of squares is
/// y'y - 2 b'r + b'(B - diag(0, I)) b, and
///
///   loglik = -1/2 log|B| - (n-K)/2 [1 + log(2 pi (e'e + u'u) / (n-K))].
///
/// Cost is O((K+L)^3), independent of n. Throws NumericalError when B is not
/// numerically positive definite.
ProfileEvaluation profile_restricted_loglik(const MomentSet& moments, const VectorXd& values,
                                            const Theta& theta);

struct ReesfFit {
  VectorXd beta;
  VectorXd beta_se;
  VectorXd u;
  VectorXd gamma;  ///< V(theta) u
  VectorXd gamma_se;
  Theta theta;
  double sigma2 = 0.0;  ///< e'e / (n - K)
  MatrixXd cov;         ///< sigma2 * B^-1 for (beta, u)
  double loglik = 0.0;
  VectorXd residuals;
  int evaluations = 0;
  double optimize_seconds = 0.0;
  double moments_seconds = 0.0;
};

struct ReesfOptions {
  int max_evaluations = 500;
  double simplex_tolerance = 1e-6;
  /// Box on (log sigma_gamma2, log alpha); the objective is extended outside
  /// it with a quadratic penalty.
  double log_sigma_bounds[2] = {-25.0, 25.0};
  double log_alpha_bounds[2] = {-6.0, 4.0};
};

/// Raised when the optimizer runs out of evaluations; carries the best point.
class ConvergenceError : public NumericalError {
public:
  ConvergenceError(Theta best, double best_loglik)
      : NumericalError("optimize", "Nelder-Mead did not converge within the evaluation budget"),
        best_(best), best_loglik_(best_loglik) {}
  const Theta& best() const noexcept { return best_; }
  double best_loglik() const noexcept { return best_loglik_; }

private:
  Theta best_;
  double best_loglik_;
};

/// Maximizes the profile restricted likelihood over theta with Nelder-Mead on
/// (log sigma_gamma2, log alpha), starting from alpha = 1 and sigma_gamma2 =
/// var(OLS residuals) / 2; then recovers beta, u, gamma, sigma2 and the
/// coefficient covariance sigma2 * B^-1.
ReesfFit fit_reesf(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis,
                   const ReesfOptions& options = {});

/// Same, from precomputed moments. Residuals are left empty.
ReesfFit fit_reesf(const MomentSet& moments, const VectorXd& values,
                   const ReesfOptions& options = {});

/// Coefficient covariance sigma2 * B(theta)^-1 for (beta, u). With an empty
/// basis this is the OLS covariance sigma2 (X'X)^-1.
MatrixXd reesf_covariance(const MomentSet& moments, const VectorXd& values, const Theta& theta,
                          double sigma2);

/// Standard errors of the GLS estimator of beta under the true covariance
/// sigma_gamma2 E Lambda(alpha) E' + sigma2 I, computed through the low-rank
/// inverse so no n x n matrix is formed.
VectorXd true_se_oracle(const MatrixXd& x, const EigenBasis& basis, const Theta& theta_true,
                        double sigma2_true);

}  // namespace moranfilt

#include "moranfilt/reesf.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

namespace moranfilt {

namespace {

constexpr Index kRowBlock = 4096;
constexpr double kFailedObjective = 1e100;

// GSL aborts on errors by default; every status is checked here instead.
[[maybe_unused]] const gsl_error_handler_t* const kPreviousGslHandler = gsl_set_error_handler_off();

void check_values(const MomentSet& m, const VectorXd& values) {
  if (values.size() != m.l()) {
    throw InvalidArgument("eigenvalue count does not match the moment set");
  }
}

VectorXd random_effect_scale(const VectorXd& values, const Theta& theta) {
  if (!(theta.sigma_gamma2 >= 0.0) || !std::isfinite(theta.sigma_gamma2)) {
    throw InvalidArgument("sigma_gamma2 must be finite and nonnegative");
  }
  if (values.size() == 0) return VectorXd();
  return (theta.sigma_gamma2 * lambda_alpha(values, theta.alpha).array()).sqrt().matrix();
}

MatrixXd assemble_b(const MomentSet& m, const VectorXd& v) {
  const Index k = m.k();
  const Index l = m.l();
  MatrixXd b(k + l, k + l);
  b.topLeftCorner(k, k) = m.xx;
  b.bottomLeftCorner(l, k) = v.asDiagonal() * m.ex;
  b.topRightCorner(k, l) = b.bottomLeftCorner(l, k).transpose();
  b.bottomRightCorner(l, l) = v.asDiagonal() * m.ee * v.asDiagonal();
  b.bottomRightCorner(l, l).diagonal().array() += 1.0;
  return b;
}

struct Factored {
  Eigen::LLT<MatrixXd> llt;
  VectorXd rhs;
};

Factored factor(const MomentSet& m, const VectorXd& v) {
  Factored f;
  f.llt.compute(assemble_b(m, v));
  if (f.llt.info() != Eigen::Success) {
    throw NumericalError("likelihood", "B(theta) is not numerically positive definite");
  }
  f.rhs.resize(m.k() + m.l());
  f.rhs.head(m.k()) = m.xy;
  f.rhs.tail(m.l()) = v.cwiseProduct(m.ey);
  return f;
}

double log_sum_exp_weights(const VectorXd& logs, VectorXd& weights) {
  const double top = logs.maxCoeff();
  weights = (logs.array() - top).exp().matrix();
  return top;
}

struct Objective {
  const MomentSet* moments;
  const VectorXd* values;
  const ReesfOptions* options;
  int evaluations = 0;
  double best_value = std::numeric_limits<double>::infinity();
  Theta best_theta;
};

Theta theta_from(const double log_sigma, const double log_alpha) {
  return Theta{std::exp(log_alpha), std::exp(log_sigma)};
}

double objective(const gsl_vector* x, void* params) {
  auto* obj = static_cast<Objective*>(params);
  ++obj->evaluations;
  const double raw_s = gsl_vector_get(x, 0);
  const double raw_a = gsl_vector_get(x, 1);
  const auto& bs = obj->options->log_sigma_bounds;
  const auto& ba = obj->options->log_alpha_bounds;
  const double s = std::clamp(raw_s, bs[0], bs[1]);
  const double a = std::clamp(raw_a, ba[0], ba[1]);
  const double penalty = (raw_s - s) * (raw_s - s) + (raw_a - a) * (raw_a - a);
  double value = kFailedObjective;
  const Theta theta = theta_from(s, a);
  try {
    const double ll = profile_restricted_loglik(*obj->moments, *obj->values, theta).loglik;
    if (std::isfinite(ll)) value = -ll;
  } catch (const NumericalError&) {
    // Treated as log-likelihood -inf.
  }
  if (value < obj->best_value) {
    obj->best_value = value;
    obj->best_theta = theta;
  }
  return value + penalty;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

VectorXd lambda_alpha(const VectorXd& values, double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw InvalidArgument("alpha must be finite and nonnegative");
  }
  if (values.size() == 0) return VectorXd();
  if (!(values.minCoeff() > 0.0) || !values.allFinite()) {
    throw InvalidArgument("lambda(alpha) needs strictly positive eigenvalues");
  }
  // lambda^alpha / sum lambda^alpha, computed relative to the largest value.
  VectorXd weights;
  log_sum_exp_weights(alpha * values.array().log().matrix(), weights);
  return values.sum() * weights / weights.sum();
}

MomentSet compute_moments(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis) {
  const Index n = y.size();
  if (x.rows() != n) throw InvalidArgument("X and y have different row counts");
  if (!basis.empty() && basis.rows() != n) {
    throw InvalidArgument("basis and y have different row counts");
  }
  const Index k = x.cols();
  const Index l = basis.size();
  const MatrixXd& e = basis.vectors;
  MomentSet m;
  m.n = n;
  m.xx = MatrixXd::Zero(k, k);
  m.ex = MatrixXd::Zero(l, k);
  m.ee = MatrixXd::Zero(l, l);
  m.xy = VectorXd::Zero(k);
  m.ey = VectorXd::Zero(l);
  for (Index start = 0; start < n; start += kRowBlock) {
    const Index rows = std::min(kRowBlock, n - start);
    const auto xb = x.middleRows(start, rows);
    const auto yb = y.segment(start, rows);
    m.xx.noalias() += xb.transpose() * xb;
    m.xy.noalias() += xb.transpose() * yb;
    m.yy += yb.squaredNorm();
    if (l > 0) {
      const auto eb = e.middleRows(start, rows);
      m.ex.noalias() += eb.transpose() * xb;
      m.ee.noalias() += eb.transpose() * eb;
      m.ey.noalias() += eb.transpose() * yb;
    }
  }
  return m;
}

ProfileEvaluation profile_restricted_loglik(const MomentSet& moments, const VectorXd& values,
                                            const Theta& theta) {
  check_values(moments, values);
  const Index k = moments.k();
  const Index l = moments.l();
  const Index dof = moments.n - k;
  if (dof <= 0) throw InvalidArgument("need n > K for the restricted likelihood");

  const VectorXd v = random_effect_scale(values, theta);
  const Factored f = factor(moments, v);
  const VectorXd sol = f.llt.solve(f.rhs);

  ProfileEvaluation out;
  out.beta = sol.head(k);
  out.u = sol.tail(l);
  const auto& lower = f.llt.matrixLLT();
  out.log_det = 2.0 * lower.diagonal().array().log().sum();
  // y'y - 2 b'r + b'(B - diag(0, I)) b with B b = r.
  const double uu = out.u.squaredNorm();
  out.rss = moments.yy - sol.dot(f.rhs) - uu;
  const double penalized = out.rss + uu;
  if (!(penalized > 0.0) || !std::isfinite(out.log_det)) {
    throw NumericalError("likelihood", "non-positive penalized residual sum of squares");
  }
  const double nk = static_cast<double>(dof);
  out.loglik = -0.5 * out.log_det -
               0.5 * nk * (1.0 + std::log(2.0 * std::numbers::pi * penalized / nk));
  return out;
}

namespace {

ReesfFit finish_fit(const MomentSet& moments, const VectorXd& values, const Theta& theta) {
  const ProfileEvaluation eval = profile_restricted_loglik(moments, values, theta);
  const VectorXd v = random_effect_scale(values, theta);
  const Factored f = factor(moments, v);
  const Index k = moments.k();
  const Index l = moments.l();

  ReesfFit fit;
  fit.theta = theta;
  fit.loglik = eval.loglik;
  fit.beta = eval.beta;
  fit.u = eval.u;
  fit.gamma = v.cwiseProduct(eval.u);
  fit.sigma2 = std::max(0.0, eval.rss) / static_cast<double>(moments.n - k);
  fit.cov = fit.sigma2 * f.llt.solve(MatrixXd::Identity(k + l, k + l));
  fit.cov = 0.5 * (fit.cov + fit.cov.transpose()).eval();
  const VectorXd diag = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.beta_se = diag.head(k);
  fit.gamma_se = v.cwiseProduct(diag.tail(l));
  return fit;
}

}  // namespace

ReesfFit fit_reesf(const MomentSet& moments, const VectorXd& values, const ReesfOptions& options) {
  check_values(moments, values);
  if (moments.l() == 0) throw InvalidArgument("random-effects ESF needs a nonempty basis");
  const Index k = moments.k();
  if (moments.n <= k) throw InvalidArgument("need n > K");
  const auto start_time = std::chrono::steady_clock::now();

  // Starting point from the OLS residual variance.
  Eigen::LDLT<MatrixXd> ols(moments.xx);
  if (ols.info() != Eigen::Success) throw NumericalError("optimize", "X'X is singular");
  const VectorXd beta_ols = ols.solve(moments.xy);
  const double rss_ols = std::max(moments.yy - beta_ols.dot(moments.xy), 1e-12);
  const double start_sigma = rss_ols / static_cast<double>(moments.n - k) / 2.0;

  Objective obj{&moments, &values, &options, 0, std::numeric_limits<double>::infinity(), Theta{}};
  gsl_multimin_function fn{&objective, 2, &obj};
  const auto vec_deleter = [](gsl_vector* p) { gsl_vector_free(p); };
  std::unique_ptr<gsl_vector, decltype(vec_deleter)> x0(gsl_vector_alloc(2), vec_deleter);
  std::unique_ptr<gsl_vector, decltype(vec_deleter)> step(gsl_vector_alloc(2), vec_deleter);
  gsl_vector_set(x0.get(), 0, std::log(std::max(start_sigma, 1e-8)));
  gsl_vector_set(x0.get(), 1, 0.0);
  gsl_vector_set(step.get(), 0, 1.0);
  gsl_vector_set(step.get(), 1, 0.5);

  const auto min_deleter = [](gsl_multimin_fminimizer* p) { gsl_multimin_fminimizer_free(p); };
  std::unique_ptr<gsl_multimin_fminimizer, decltype(min_deleter)> minimizer(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2), min_deleter);
  if (gsl_multimin_fminimizer_set(minimizer.get(), &fn, x0.get(), step.get()) != GSL_SUCCESS) {
    throw NumericalError("optimize", "could not initialize the simplex");
  }

  // Stops on a small simplex or on a long stall of the minimum.
  constexpr int kStallIterations = 60;
  bool converged = false;
  double last_min = gsl_multimin_fminimizer_minimum(minimizer.get());
  int stalled = 0;
  while (obj.evaluations < options.max_evaluations) {
    if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
    const double size = gsl_multimin_fminimizer_size(minimizer.get());
    if (gsl_multimin_test_size(size, options.simplex_tolerance) == GSL_SUCCESS) {
      converged = true;
      break;
    }
    const double current = gsl_multimin_fminimizer_minimum(minimizer.get());
    if (last_min - current > 1e-10 * (1.0 + std::abs(current))) {
      last_min = current;
      stalled = 0;
    } else if (++stalled >= kStallIterations) {
      converged = true;
      break;
    }
  }
  if (!std::isfinite(obj.best_value) || obj.best_value >= kFailedObjective) {
    throw NumericalError("optimize", "the likelihood could not be evaluated at any point");
  }
  if (!converged) throw ConvergenceError(obj.best_theta, -obj.best_value);

  const gsl_vector* xm = gsl_multimin_fminimizer_x(minimizer.get());
  const Theta at_min = theta_from(
      std::clamp(gsl_vector_get(xm, 0), options.log_sigma_bounds[0], options.log_sigma_bounds[1]),
      std::clamp(gsl_vector_get(xm, 1), options.log_alpha_bounds[0], options.log_alpha_bounds[1]));
  ReesfFit fit = finish_fit(moments, values, at_min);
  fit.evaluations = obj.evaluations;
  fit.optimize_seconds = seconds_since(start_time);
  return fit;
}

ReesfFit fit_reesf(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis,
                   const ReesfOptions& options) {
  if (basis.empty()) throw InvalidArgument("random-effects ESF needs a nonempty basis");
  const auto start = std::chrono::steady_clock::now();
  const MomentSet moments = compute_moments(x, y, basis);
  const double moment_time = seconds_since(start);
  ReesfFit fit = fit_reesf(moments, basis.values, options);
  fit.moments_seconds = moment_time;
  fit.residuals = y - x * fit.beta - basis.vectors * fit.gamma;
  return fit;
}

MatrixXd reesf_covariance(const MomentSet& moments, const VectorXd& values, const Theta& theta,
                          double sigma2) {
  check_values(moments, values);
  const VectorXd v = random_effect_scale(values, theta);
  const Factored f = factor(moments, v);
  const Index p = moments.k() + moments.l();
  return sigma2 * f.llt.solve(MatrixXd::Identity(p, p));
}

VectorXd true_se_oracle(const MatrixXd& x, const EigenBasis& basis, const Theta& theta_true,
                        double sigma2_true) {
  if (!(sigma2_true > 0.0)) throw InvalidArgument("true residual variance must be positive");
  if (!basis.empty() && basis.rows() != x.rows()) {
    throw InvalidArgument("basis and X have different row counts");
  }
  const VectorXd w = random_effect_scale(basis.values, theta_true);
  const MatrixXd xx = x.transpose() * x;
  MatrixXd info = xx;
  if (basis.size() > 0) {
    // X' Sigma^-1 X = (X'X - X'E W (sigma2 I + W E'E W)^-1 W E'X) / sigma2.
    const MatrixXd wex = w.asDiagonal() * (basis.vectors.transpose() * x);
    MatrixXd inner = w.asDiagonal() * (basis.vectors.transpose() * basis.vectors) * w.asDiagonal();
    inner.diagonal().array() += sigma2_true;
    Eigen::LLT<MatrixXd> llt(inner);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("true standard errors", "low-rank inner system is not positive definite");
    }
    info -= wex.transpose() * llt.solve(wex);
  }
  info /= sigma2_true;
  Eigen::LLT<MatrixXd> info_llt(info);
  if (info_llt.info() != Eigen::Success) {
    throw NumericalError("true standard errors", "X' Sigma^-1 X is not positive definite");
  }
  const MatrixXd inv = info_llt.solve(MatrixXd::Identity(x.cols(), x.cols()));
  return inv.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace moranfilt

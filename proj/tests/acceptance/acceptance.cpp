#include "moranfilt/diagnostics.hpp"
#include "moranfilt/eigenbase.hpp"
#include "moranfilt/errors.hpp"
#include "moranfilt/random.hpp"
#include "moranfilt/reesf.hpp"
#include "moranfilt/simgen.hpp"
#include "moranfilt/spatial_graph.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace moranfilt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// A limit of zero means no runtime bound.
void report(int id, const std::string& name, double limit_seconds,
            const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = seconds_since(start);
  if (limit_seconds > 0.0 && elapsed >= limit_seconds) {
    o.pass = false;
    o.detail += ", over the " + fmt("%.0f", limit_seconds) + " s limit";
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), elapsed);
  std::fflush(stdout);
}

double sign_aligned_gap(const VectorXd& a, const VectorXd& b) {
  return std::min((a - b).cwiseAbs().maxCoeff(), (a + b).cwiseAbs().maxCoeff());
}

Outcome nystrom_anchor() {
  double worst = 0.0;
  Index compared = 0;
  for (Index n : {50, 150, 300}) {
    const Coordinates coords(oracle::random_points(n, 7 * n));
    const KernelSpec spec{KernelFamily::Exponential, estimate_range_mst(coords)};
    const EigenBasis all = exact_moran_eigen(build_connectivity(coords, spec, true), true);
    std::vector<Index> keep;
    for (Index l = 0; l < all.size(); ++l) {
      if (std::abs(all.vectors.col(l).sum()) < 0.5) keep.push_back(l);
    }
    const EigenBasis exact = all.select(keep);
    const EigenBasis ny = nystrom_moran_eigen(coords, select_knots(coords, n, 1), spec);
    if (ny.size() == 0 || ny.size() > exact.size()) return {false, "unexpected basis size"};
    for (Index l = 0; l < ny.size(); ++l) {
      worst = std::max(worst, sign_aligned_gap(ny.vectors.col(l), exact.vectors.col(l)));
    }
    compared += ny.size();
  }
  return {worst < 1e-6, "max deviation " + fmt("%.2e", worst) + " over " +
                            std::to_string(compared) + " eigenvectors"};
}

Outcome moment_fidelity() {
  double worst_spread = 0.0;
  double worst_theta = 0.0;
  for (Index n : {50, 200}) {
    std::mt19937_64 rng(n);
    std::normal_distribution<double> nd;
    const Coordinates coords(oracle::random_points(n, 11 * n));
    const KernelSpec spec{KernelFamily::Exponential, estimate_range_mst(coords)};
    const EigenBasis b =
        nystrom_moran_eigen(coords, select_knots(coords, n == 50 ? 15 : 40, 3), spec);
    MatrixXd x(n, 3);
    for (Index i = 0; i < n; ++i) x.row(i) << 1.0, nd(rng), nd(rng);
    VectorXd y = x * Eigen::Vector3d(1.0, 2.0, -0.5);
    for (Index k = 0; k < b.size(); ++k) y += 1.5 * std::sqrt(b.values[k]) * nd(rng) * b.vectors.col(k);
    for (Index i = 0; i < n; ++i) y[i] += nd(rng);

    const MomentSet m = compute_moments(x, y, b);
    double lo = INFINITY, hi = -INFINITY;
    for (double s : {0.01, 0.1, 1.0, 10.0, 100.0}) {
      for (double a : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double d = profile_restricted_loglik(m, b.values, {a, s}).loglik -
                         oracle::dense_reml(x, y, b.vectors, b.values, a, s);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
    }
    worst_spread = std::max(worst_spread, hi - lo);

    const ReesfFit fit = fit_reesf(m, b.values);
    const auto best = oracle::compass_maximize(
        [&](double ls, double la) {
          return oracle::dense_reml(x, y, b.vectors, b.values, std::exp(la), std::exp(ls));
        },
        0.0, 0.0, 1e-6);
    worst_theta = std::max({worst_theta,
                            std::abs(fit.theta.sigma_gamma2 / std::exp(best.log_s) - 1.0),
                            std::abs(fit.theta.alpha / std::exp(best.log_a) - 1.0)});
  }
  return {worst_spread < 1e-6 && worst_theta < 0.05,
          "grid spread " + fmt("%.2e", worst_spread) + ", theta rel. gap " +
              fmt("%.4f", worst_theta)};
}

// Shared by criteria 3 and 4.
McReportTable& recovery_table() {
  static McReportTable table = [] {
    SimConfig c;
    c.n = 5000;
    c.l_gen = 200;
    c.sigma_gamma = 2.0;
    c.sigma_gamma_x = 0.6;
    c.replications = 100;
    c.compute_mc = false;
    c.estimators = {{EstimatorKind::Lm, 0}, {EstimatorKind::Reesf, 200}};
    return run_experiment(c);
  }();
  return table;
}

Outcome coefficient_recovery() {
  const auto& t = recovery_table();
  const MetricRow& lm = t.find("LM", 5000, 2.0, 0.6).metrics;
  const TableRow& re_row = t.find("fRE200", 5000, 2.0, 0.6);
  const MetricRow& re = re_row.metrics;
  const bool ok = lm.rmse > 0.20 && re.rmse < 0.06 && std::abs(re.bias) < 0.02 &&
                  re.replications == 100;
  return {ok, "LM RMSE " + fmt("%.4f", lm.rmse) + ", fRE200 RMSE " + fmt("%.4f", re.rmse) +
                  ", fRE200 bias " + fmt("%+.4f", re.bias) + ", failures " +
                  std::to_string(re_row.failures)};
}

Outcome se_accuracy() {
  const auto& t = recovery_table();
  const MetricRow& lm = t.find("LM", 5000, 2.0, 0.6).metrics;
  const MetricRow& re = t.find("fRE200", 5000, 2.0, 0.6).metrics;
  return {re.rmspe_se < 0.08 && lm.rmspe_se > 0.10,
          "fRE200 RMSPE " + fmt("%.4f", re.rmspe_se) + ", LM RMSPE " + fmt("%.4f", lm.rmspe_se)};
}

Outcome residual_filtering() {
  SimConfig c;
  c.n = 5000;
  c.sigma_gamma_x = 0.0;
  c.replications = 20;
  c.estimators = {{EstimatorKind::Lm, 0}, {EstimatorKind::Esf, 200}, {EstimatorKind::Reesf, 200}};
  const McReportTable t = run_experiment(c);
  const double lm = t.find("LM", 5000, 1.0, 0.0).metrics.mean_z_mc;
  const double fe = t.find("fE200", 5000, 1.0, 0.0).metrics.mean_z_mc;
  const double re = t.find("fRE200", 5000, 1.0, 0.0).metrics.mean_z_mc;
  return {lm > 100.0 && fe < 10.0 && re < 10.0,
          "mean z: LM " + fmt("%.1f", lm) + ", fE200 " + fmt("%.2f", fe) + ", fRE200 " +
              fmt("%.2f", re)};
}

Outcome grid_bound() {
  const double r = default_grid_range();
  std::vector<double> b;
  for (Index l : {50, 100, 200, 400, 600}) b.push_back(contribution_lower_bound(500, r, l));
  const bool monotone = std::is_sorted(b.begin(), b.end());
  const VectorXd lam = analytic_grid_eigenvalues(500, r);
  const Index positive = (lam.array() > 0.0).count();
  const double full = contribution_lower_bound(500, r, positive);
  const double at200 = b[2];
  return {at200 >= 0.83 && at200 <= 0.93 && monotone && std::abs(full - 1.0) < 1e-9,
          "bound(L=200) " + fmt("%.4f", at200) + ", L=50..600 " + fmt("%.3f", b[0]) + " -> " +
              fmt("%.3f", b[4]) + (monotone ? " monotone" : " NOT monotone") + ", full basis " +
              fmt("%.6f", full)};
}

double fit_seconds(Index n) {
  SimConfig c;
  c.n = n;
  const SimulatedData d = simulate_dataset(c, 1);
  double best = INFINITY;
  for (int rep = 0; rep < 2; ++rep) {
    const auto start = Clock::now();
    const KnotSet knots = select_knots(d.coords, 200, 99);
    const EigenBasis b = nystrom_moran_eigen(d.coords, knots, {KernelFamily::Exponential, d.range});
    const ReesfFit fit = fit_reesf(d.x, d.y, b);
    best = std::min(best, seconds_since(start));
    if (!fit.beta.allFinite()) throw NumericalError("scaling", "non-finite fit");
  }
  return best;
}

Outcome scaling() {
  const double t10 = fit_seconds(10000);
  const double t20 = fit_seconds(20000);
  const double ratio = t20 / t10;
  return {t10 < 60.0 && ratio < 2.5,
          "fit n=10k " + fmt("%.2f", t10) + " s, n=20k " + fmt("%.2f", t20) + " s, ratio " +
              fmt("%.2f", ratio)};
}

Outcome kernel_robustness() {
  bool ok = true;
  std::string detail;
  for (SimConfig c : preset_configs("appendixB", 50, 1)) {
    c.estimators = {{EstimatorKind::Reesf, 200}};
    c.compute_mc = false;
    const McReportTable t = run_experiment(c);
    const MetricRow& m = t.rows.front().metrics;
    ok = ok && m.rmspe_se < 0.10 && m.replications == 50;
    detail += (detail.empty() ? "" : ", ") + std::string(kernel_tag(c.kernel)) + " " +
              fmt("%.4f", m.rmspe_se);
  }
  return {ok, "fRE200 RMSPE " + detail};
}

// Each property runs on 100 generated inputs.
Outcome property_suites() {
  constexpr int cases = 100;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int eig_fail = 0, trace_fail = 0, mc_fail = 0, rmse_fail = 0, det_fail = 0;

  for (int t = 0; t < cases; ++t) {
    const Index n = 5 + static_cast<Index>(rng() % 40);
    const Coordinates coords(oracle::random_points(n, rng()));
    const auto c = build_connectivity(coords, {KernelFamily::Exponential, 0.1 + u(rng)}, true);
    const EigenBasis b = exact_moran_eigen(c, true);
    const MatrixXd mcm = oracle::double_centered(c.values);
    const double resid = (mcm * b.vectors - b.vectors * b.values.asDiagonal()).cwiseAbs().maxCoeff();
    const double orth =
        (b.vectors.transpose() * b.vectors - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (!(resid < 1e-9 * n && orth < 1e-9)) ++eig_fail;
  }
  for (int t = 0; t < cases; ++t) {
    const Index l = 1 + static_cast<Index>(rng() % 300);
    VectorXd v(l);
    for (Index i = 0; i < l; ++i) v[i] = std::exp(8.0 * u(rng) - 4.0);
    const VectorXd la = lambda_alpha(v, 6.0 * u(rng));
    if (!(std::abs(la.sum() / v.sum() - 1.0) < 1e-10)) ++trace_fail;
  }
  for (int t = 0; t < cases; ++t) {
    const Index n = 5 + static_cast<Index>(rng() % 60);
    const Coordinates coords(oracle::random_points(n, rng()));
    const auto c = build_connectivity(coords, {KernelFamily::Gaussian, 0.3}, true);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y[i] = nd(rng);
    const VectorXd z = (std::exp(nd(rng)) * y).array() + 5.0 * nd(rng);
    if (!(std::abs(moran_coefficient(z, c) - moran_coefficient(y, c)) < 1e-9)) ++mc_fail;
  }
  for (int t = 0; t < cases; ++t) {
    const std::size_t m = 1 + rng() % 50;
    std::vector<double> est(m);
    for (auto& e : est) e = 2.0 + 0.3 * nd(rng);
    const double truth = 2.0 + nd(rng);
    double mean = 0.0;
    for (double e : est) mean += e / static_cast<double>(m);
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean) / static_cast<double>(m);
    const double r = rmse(est, truth);
    const double bb = bias(est, truth);
    if (!(std::abs(r * r - (bb * bb + var)) < 1e-10 * (1.0 + r * r))) ++rmse_fail;
  }
  for (int t = 0; t < cases; ++t) {
    const std::uint64_t seed = rng();
    SimConfig c;
    c.n = 20 + static_cast<Index>(rng() % 100);
    c.l_gen = 10;
    c.exact_max_n = 50;
    const SimulatedData a = simulate_dataset(c, seed);
    const SimulatedData b = simulate_dataset(c, seed);
    if (!(a.y == b.y && a.x == b.x && a.coords.points() == b.coords.points())) ++det_fail;
  }
  const int total = eig_fail + trace_fail + mc_fail + rmse_fail + det_fail;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "failures of 100 cases each: eigenpair %d, trace %d, MC invariance %d, "
                "rmse identity %d, determinism %d",
                eig_fail, trace_fail, mc_fail, rmse_fail, det_fail);
  return {total == 0, buf};
}

}  // namespace

int main() {
  report(1, "Nystrom exactness anchor", 10.0, nystrom_anchor);
  report(2, "moment-based likelihood fidelity", 60.0, moment_fidelity);
  report(3, "coefficient recovery", 1800.0, coefficient_recovery);
  report(4, "standard error accuracy", 0.0, se_accuracy);
  report(5, "residual filtering", 0.0, residual_filtering);
  report(6, "grid contribution bound", 30.0, grid_bound);
  report(7, "scaling", 0.0, scaling);
  report(8, "kernel robustness", 0.0, kernel_robustness);
  report(9, "property suites", 300.0, property_suites);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

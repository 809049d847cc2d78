#include "moranfilt/simgen.hpp"

#include "moranfilt/errors.hpp"
#include "moranfilt/esf.hpp"
#include "moranfilt/io.hpp"
#include "moranfilt/random.hpp"
#include "moranfilt/reesf.hpp"
#include "moranfilt/spatial_graph.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace moranfilt {

namespace {

// Sub-streams of a replication seed.
enum Stream : std::uint64_t {
  kCoords = 1,
  kRange = 2,
  kCovariate1 = 3,
  kCovariate2 = 4,
  kResponse = 5,
  kMoran = 6,
  kKnots = 1000,
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_stream(seed, stream);
  return rng();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string labelled(const EstimatorSpec& spec, KernelFamily family) {
  std::string out = spec.label();
  if (family != KernelFamily::Exponential) out += "[" + std::string(kernel_tag(family)) + "]";
  return out;
}

struct BasisCache {
  Index knots = 0;
  EigenBasis basis;
  double seconds = 0.0;
};

struct Outcome {
  double beta1 = 0.0;
  double se1 = 0.0;
  double seconds = 0.0;
  VectorXd residuals;
  bool failed = false;
  std::string failure;
};

std::vector<ReplicationRecord> run_replication(const SimConfig& config, Index iteration) {
  const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(iteration);
  const std::size_t m = config.estimators.size();
  std::vector<ReplicationRecord> records(m);
  for (std::size_t e = 0; e < m; ++e) {
    records[e].estimator = labelled(config.estimators[e], config.kernel);
    records[e].iteration = iteration;
  }
  auto fail_all = [&](const std::string& why) {
    for (auto& r : records) {
      r.failed = true;
      r.failure = why;
    }
    return records;
  };

  SimulatedData data;
  double se_true = 0.0;
  try {
    data = simulate_dataset(config, seed);
    const Theta truth{config.alpha_true, config.sigma_gamma * config.sigma_gamma};
    se_true = true_se_oracle(data.x, data.truth_basis, truth, 1.0)[1];
  } catch (const Error& err) {
    return fail_all(std::string("data generation: ") + err.what());
  }
  const KernelSpec fit_kernel{config.kernel, data.range};

  std::vector<BasisCache> bases;
  bases.reserve(m);
  auto basis_for = [&](Index l) -> const BasisCache& {
    for (const auto& b : bases) {
      if (b.knots == l) return b;
    }
    const auto start = std::chrono::steady_clock::now();
    BasisCache entry;
    entry.knots = l;
    const KnotSet knots = select_knots(data.coords, std::min(l, config.n), knot_seed(seed, l));
    entry.basis = nystrom_moran_eigen(data.coords, knots, fit_kernel);
    entry.seconds = seconds_since(start);
    bases.push_back(std::move(entry));
    return bases.back();
  };

  std::vector<Outcome> outcomes(m);
  for (std::size_t e = 0; e < m; ++e) {
    const EstimatorSpec& spec = config.estimators[e];
    Outcome& out = outcomes[e];
    try {
      double prep = 0.0;
      const EigenBasis* basis = nullptr;
      if (spec.kind != EstimatorKind::Lm) {
        const BasisCache& cached = basis_for(spec.knots);
        prep = cached.seconds;
        basis = &cached.basis;
      }
      const auto start = std::chrono::steady_clock::now();
      switch (spec.kind) {
        case EstimatorKind::Lm: {
          const EsfFit fit = fit_ols(data.x, data.y);
          out.beta1 = fit.beta[1];
          out.se1 = fit.beta_se[1];
          out.residuals = fit.residuals;
          break;
        }
        case EstimatorKind::Esf:
        case EstimatorKind::EsfScreened: {
          std::optional<double> screen;
          if (spec.kind == EstimatorKind::EsfScreened) screen = config.screening;
          const EsfFit fit = fit_esf(data.x, data.y, *basis, screen);
          out.beta1 = fit.beta[1];
          out.se1 = fit.beta_se[1];
          out.residuals = fit.residuals;
          break;
        }
        case EstimatorKind::Stepwise: {
          const EsfFit fit = fit_esf_stepwise(data.x, data.y, *basis);
          out.beta1 = fit.beta[1];
          out.se1 = fit.beta_se[1];
          out.residuals = fit.residuals;
          break;
        }
        case EstimatorKind::Reesf: {
          const ReesfFit fit = fit_reesf(data.x, data.y, *basis);
          out.beta1 = fit.beta[1];
          out.se1 = fit.beta_se[1];
          out.residuals = fit.residuals;
          break;
        }
      }
      out.seconds = prep + seconds_since(start);
      if (!std::isfinite(out.beta1) || !std::isfinite(out.se1)) {
        throw NumericalError("fit", "non-finite coefficient or standard error");
      }
    } catch (const Error& err) {
      out.failed = true;
      out.failure = err.what();
    }
  }

  if (config.compute_mc) {
    std::vector<std::size_t> ok;
    for (std::size_t e = 0; e < m; ++e) {
      if (!outcomes[e].failed) ok.push_back(e);
    }
    if (!ok.empty()) {
      MatrixXd res(config.n, static_cast<Index>(ok.size()));
      for (std::size_t a = 0; a < ok.size(); ++a) res.col(static_cast<Index>(a)) = outcomes[ok[a]].residuals;
      McOptions mc = config.mc;
      mc.seed = derive_seed(seed, kMoran);
      try {
        const auto reports = residual_mc_z(res, data.coords, fit_kernel, mc);
        for (std::size_t a = 0; a < ok.size(); ++a) records[ok[a]].z_mc = reports[a].z;
      } catch (const Error& err) {
        for (std::size_t e : ok) {
          outcomes[e].failed = true;
          outcomes[e].failure = std::string("residual Moran test: ") + err.what();
        }
      }
    }
  } else {
    for (auto& r : records) r.z_mc = std::numeric_limits<double>::quiet_NaN();
  }

  for (std::size_t e = 0; e < m; ++e) {
    records[e].beta1 = outcomes[e].beta1;
    records[e].se1 = outcomes[e].se1;
    records[e].se_true = se_true;
    records[e].seconds = outcomes[e].seconds;
    records[e].failed = outcomes[e].failed;
    records[e].failure = outcomes[e].failure;
  }
  return records;
}

TableRow aggregate(const SimConfig& config, const std::string& label,
                   const std::vector<ReplicationRecord>& records) {
  TableRow row;
  row.n = config.n;
  row.sigma_gamma = config.sigma_gamma;
  row.sigma_gamma_x = config.sigma_gamma_x;
  row.r_mult = config.r_mult;
  row.alpha_true = config.alpha_true;
  row.kernel = std::string(kernel_tag(config.kernel));
  row.metrics.estimator = label;

  std::vector<double> b;
  std::vector<double> se;
  std::vector<double> se_true;
  double z = 0.0;
  double t = 0.0;
  for (const auto& r : records) {
    if (r.estimator != label) continue;
    if (r.failed) {
      ++row.failures;
      continue;
    }
    b.push_back(r.beta1);
    se.push_back(r.se1);
    se_true.push_back(r.se_true);
    z += r.z_mc;
    t += r.seconds;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.metrics.replications = static_cast<Index>(b.size());
  if (b.empty()) {
    row.metrics.bias = row.metrics.rmse = row.metrics.rmspe_se = nan;
    row.metrics.mean_z_mc = row.metrics.mean_runtime_seconds = nan;
    return row;
  }
  const double truth = config.beta_true[1];
  const double count = static_cast<double>(b.size());
  row.metrics.bias = bias(b, truth);
  row.metrics.rmse = rmse(b, truth);
  row.metrics.rmspe_se = rmspe_se(se, se_true);
  row.metrics.mean_z_mc = z / count;
  row.metrics.mean_runtime_seconds = t / count;
  return row;
}

bool same(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

std::string EstimatorSpec::label() const {
  switch (kind) {
    case EstimatorKind::Lm:
      return "LM";
    case EstimatorKind::Esf:
      return "fE" + std::to_string(knots);
    case EstimatorKind::EsfScreened:
      return "fE" + std::to_string(knots) + "*";
    case EstimatorKind::Reesf:
      return "fRE" + std::to_string(knots);
    case EstimatorKind::Stepwise:
      return "Estep" + std::to_string(knots);
  }
  return "?";
}

EstimatorSpec parse_estimator(const std::string& label) {
  if (label == "LM" || label == "lm") return {EstimatorKind::Lm, 0};
  struct Prefix {
    const char* text;
    EstimatorKind kind;
  };
  // Longer prefixes first so "fRE" is not read as "fE".
  const Prefix prefixes[] = {{"Estep", EstimatorKind::Stepwise},
                             {"fRE", EstimatorKind::Reesf},
                             {"fE", EstimatorKind::Esf}};
  for (const auto& p : prefixes) {
    const std::string pre = p.text;
    if (label.rfind(pre, 0) != 0) continue;
    std::string digits = label.substr(pre.size());
    EstimatorKind kind = p.kind;
    if (kind == EstimatorKind::Esf && !digits.empty() && digits.back() == '*') {
      kind = EstimatorKind::EsfScreened;
      digits.pop_back();
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) break;
    const long long l = std::stoll(digits);
    if (l < 1) break;
    return {kind, static_cast<Index>(l)};
  }
  throw InvalidArgument("unknown estimator '" + label + "' (expected LM, fE<L>, fE<L>*, fRE<L> or Estep<L>)");
}

std::vector<EstimatorSpec> expand_estimators(const std::vector<EstimatorKind>& kinds,
                                             const std::vector<Index>& knots) {
  std::vector<EstimatorSpec> out;
  for (EstimatorKind kind : kinds) {
    if (kind == EstimatorKind::Lm) {
      out.push_back({kind, 0});
      continue;
    }
    for (Index l : knots) out.push_back({kind, l});
  }
  return out;
}

void SimConfig::validate() const {
  if (n < 10) throw InvalidArgument("n must be at least 10");
  if (l_gen < 2) throw InvalidArgument("L_gen must be at least 2");
  if (replications < 1) throw InvalidArgument("replications must be at least 1");
  if (estimators.empty()) throw InvalidArgument("at least one estimator is required");
  for (const auto& e : estimators) {
    if (e.kind != EstimatorKind::Lm && e.knots < 2) {
      throw InvalidArgument("estimator " + e.label() + " needs at least 2 knots");
    }
  }
  if (beta_true.size() != 3) throw InvalidArgument("beta_true must have three entries");
  if (!(sigma_gamma >= 0.0) || !std::isfinite(sigma_gamma)) {
    throw InvalidArgument("sigma_gamma must be nonnegative");
  }
  if (!(sigma_gamma_x >= 0.0 && sigma_gamma_x <= 1.0)) {
    throw InvalidArgument("sigma_gamma_x must lie in [0, 1]");
  }
  if (!(alpha_true > 0.0) || !std::isfinite(alpha_true)) {
    throw InvalidArgument("alpha_true must be positive");
  }
  if (!(r_mult > 0.0) || !std::isfinite(r_mult)) throw InvalidArgument("r_mult must be positive");
  if (!(screening >= 0.0 && screening < 1.0)) {
    throw InvalidArgument("screening threshold must lie in [0, 1)");
  }
  if (jobs < 1) throw InvalidArgument("jobs must be at least 1");
}

Coordinates generate_coordinates(Index n, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("need at least two sites");
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixX2d pts(n, 2);
  for (Index i = 0; i < n; ++i) {
    pts(i, 0) = normal(rng);
    pts(i, 1) = normal(rng);
  }
  return Coordinates(std::move(pts));
}

VectorXd generate_covariate(const EigenBasis& basis, double sigma_gamma_x, std::uint64_t seed) {
  if (!(sigma_gamma_x >= 0.0 && sigma_gamma_x <= 1.0)) {
    throw InvalidArgument("sigma_gamma_x must lie in [0, 1]");
  }
  const Index n = basis.rows();
  Rng rng = make_stream(seed, 0);
  const VectorXd g = standard_normal(basis.size(), rng);
  const VectorXd eps = standard_normal(n, rng);
  VectorXd out = (1.0 - sigma_gamma_x) * eps;
  if (!basis.empty() && sigma_gamma_x > 0.0) {
    const VectorXd gamma = sigma_gamma_x * basis.values.cwiseSqrt().cwiseProduct(g);
    out.noalias() += basis.vectors * gamma;
  }
  return out;
}

VectorXd generate_response(const MatrixXd& x, const EigenBasis& basis,
                           const std::vector<double>& beta_true, double sigma_gamma,
                           double alpha_true, std::uint64_t seed) {
  if (static_cast<Index>(beta_true.size()) != x.cols()) {
    throw InvalidArgument("beta_true length does not match the columns of X");
  }
  if (!basis.empty() && basis.rows() != x.rows()) {
    throw InvalidArgument("basis and X have different row counts");
  }
  if (!(sigma_gamma >= 0.0)) throw InvalidArgument("sigma_gamma must be nonnegative");
  const Index n = x.rows();
  Rng rng = make_stream(seed, 0);
  const VectorXd g = standard_normal(basis.size(), rng);
  const VectorXd eps = standard_normal(n, rng);
  const Eigen::Map<const VectorXd> beta(beta_true.data(), x.cols());
  VectorXd y = x * beta + eps;
  if (!basis.empty() && sigma_gamma > 0.0) {
    const VectorXd scale = lambda_alpha(basis.values, alpha_true).cwiseSqrt();
    y.noalias() += basis.vectors * (sigma_gamma * scale.cwiseProduct(g));
  }
  return y;
}

std::uint64_t knot_seed(std::uint64_t replication_seed, Index knots) {
  return derive_seed(replication_seed, kKnots + static_cast<std::uint64_t>(knots));
}

SimulatedData simulate_dataset(const SimConfig& config, std::uint64_t seed) {
  SimulatedData data;
  data.seed = seed;
  data.coords = generate_coordinates(config.n, derive_seed(seed, kCoords));
  RangeOptions range_opts;
  range_opts.seed = derive_seed(seed, kRange);
  data.range = estimate_range_mst(data.coords, range_opts);
  data.true_kernel = KernelSpec{config.kernel, config.r_mult * data.range};
  if (config.n <= config.exact_max_n) {
    data.truth_basis =
        exact_moran_eigen(build_connectivity(data.coords, data.true_kernel, true));
  } else {
    const Index l = std::min(config.l_gen, config.n);
    const KnotSet knots = select_knots(data.coords, l, knot_seed(seed, l));
    data.truth_basis = nystrom_moran_eigen(data.coords, knots, data.true_kernel);
  }
  data.x.resize(config.n, 3);
  data.x.col(0).setOnes();
  data.x.col(1) = generate_covariate(data.truth_basis, config.sigma_gamma_x,
                                     derive_seed(seed, kCovariate1));
  data.x.col(2) = generate_covariate(data.truth_basis, config.sigma_gamma_x,
                                     derive_seed(seed, kCovariate2));
  data.y = generate_response(data.x, data.truth_basis, config.beta_true, config.sigma_gamma,
                             config.alpha_true, derive_seed(seed, kResponse));
  return data;
}

McReportTable run_experiment(const SimConfig& config) {
  config.validate();
  const Index reps = config.replications;
  std::vector<std::vector<ReplicationRecord>> per_rep(static_cast<std::size_t>(reps));

  const int workers = static_cast<int>(std::min<Index>(config.jobs, reps));
  if (workers <= 1) {
    for (Index i = 0; i < reps; ++i) per_rep[static_cast<std::size_t>(i)] = run_replication(config, i);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (Index i = next++; i < reps; i = next++) {
          try {
            per_rep[static_cast<std::size_t>(i)] = run_replication(config, i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  McReportTable table;
  for (auto& rep : per_rep) {
    for (auto& r : rep) table.records.push_back(std::move(r));
  }
  for (const auto& spec : config.estimators) {
    table.rows.push_back(aggregate(config, labelled(spec, config.kernel), table.records));
  }
  return table;
}

void McReportTable::append(const McReportTable& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  records.insert(records.end(), other.records.begin(), other.records.end());
}

const TableRow& McReportTable::find(const std::string& estimator, Index n, double sigma_gamma,
                                    double sigma_gamma_x, double r_mult,
                                    double alpha_true) const {
  for (const auto& row : rows) {
    if (row.metrics.estimator == estimator && row.n == n && same(row.sigma_gamma, sigma_gamma) &&
        same(row.sigma_gamma_x, sigma_gamma_x) && same(row.r_mult, r_mult) &&
        same(row.alpha_true, alpha_true)) {
      return row;
    }
  }
  throw InvalidArgument("no table row for estimator " + estimator);
}

void write_table_csv(const McReportTable& table, std::ostream& out) {
  using io::format_double;
  out << "estimator,n,sigma_gamma,sigma_gamma_x,r_mult,alpha_true,bias,rmse,rmspe_se,"
         "mean_z_mc,mean_fit_seconds,replications,failures\n";
  for (const auto& row : table.rows) {
    const MetricRow& m = row.metrics;
    out << m.estimator << ',' << row.n << ',' << format_double(row.sigma_gamma) << ','
        << format_double(row.sigma_gamma_x) << ',' << format_double(row.r_mult) << ','
        << format_double(row.alpha_true) << ',' << format_double(m.bias) << ','
        << format_double(m.rmse) << ',' << format_double(m.rmspe_se) << ','
        << format_double(m.mean_z_mc) << ',' << format_double(m.mean_runtime_seconds) << ','
        << m.replications << ',' << row.failures << '\n';
  }
}

void write_table_json(const McReportTable& table, std::ostream& out) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    const MetricRow& m = row.metrics;
    rows.push_back({{"estimator", m.estimator},
                    {"kernel", row.kernel},
                    {"n", row.n},
                    {"sigma_gamma", row.sigma_gamma},
                    {"sigma_gamma_x", row.sigma_gamma_x},
                    {"r_mult", row.r_mult},
                    {"alpha_true", row.alpha_true},
                    {"bias", num(m.bias)},
                    {"rmse", num(m.rmse)},
                    {"rmspe_se", num(m.rmspe_se)},
                    {"mean_z_mc", num(m.mean_z_mc)},
                    {"mean_fit_seconds", num(m.mean_runtime_seconds)},
                    {"replications", m.replications},
                    {"failures", row.failures}});
  }
  std::map<std::string, Index> failure_reasons;
  for (const auto& r : table.records) {
    if (r.failed) ++failure_reasons[r.failure];
  }
  nlohmann::json doc = {{"rows", rows}, {"failure_reasons", failure_reasons}};
  out << doc.dump(2) << '\n';
}

std::vector<SimConfig> preset_configs(const std::string& name, Index replications,
                                      std::uint64_t base_seed) {
  using K = EstimatorKind;
  SimConfig base;
  base.replications = replications;
  base.base_seed = base_seed;
  std::vector<SimConfig> out;

  if (name == "table234") {
    base.n = 5000;
    base.estimators = {{K::Lm, 0},          {K::Stepwise, 200},   {K::Esf, 100},
                       {K::Esf, 200},       {K::EsfScreened, 100}, {K::EsfScreened, 200},
                       {K::Reesf, 50},      {K::Reesf, 100},       {K::Reesf, 200}};
    for (double sx : {0.0, 0.6}) {
      for (double sg : {0.5, 1.0, 2.0}) {
        SimConfig c = base;
        c.sigma_gamma = sg;
        c.sigma_gamma_x = sx;
        out.push_back(c);
      }
    }
  } else if (name == "table5") {
    base.estimators = {{K::Lm, 0}, {K::Esf, 200}, {K::Reesf, 200}};
    for (Index n : {5000, 10000, 20000}) {
      for (double sx : {0.0, 0.6}) {
        SimConfig c = base;
        c.n = n;
        c.sigma_gamma_x = sx;
        out.push_back(c);
      }
    }
  } else if (name == "scaling") {
    base.estimators = {{K::Lm, 0}, {K::Esf, 200}, {K::Reesf, 200}};
    base.compute_mc = false;
    for (Index n : {5000, 10000, 20000}) {
      SimConfig c = base;
      c.n = n;
      out.push_back(c);
    }
  } else if (name == "appendixB") {
    base.n = 5000;
    base.estimators = {{K::Lm, 0}, {K::Esf, 200}, {K::Reesf, 200}};
    for (KernelFamily f : {KernelFamily::Exponential, KernelFamily::Spherical,
                           KernelFamily::Gaussian}) {
      SimConfig c = base;
      c.kernel = f;
      out.push_back(c);
    }
  } else if (name == "appendixC") {
    base.n = 5000;
    base.estimators = {{K::Lm, 0}, {K::Esf, 200}, {K::Reesf, 200}};
    for (double a : {0.5, 1.0, 2.0}) {
      SimConfig c = base;
      c.alpha_true = a;
      out.push_back(c);
    }
  } else {
    throw InvalidArgument("unknown preset '" + name +
                          "' (expected table234, table5, scaling, appendixB or appendixC)");
  }
  return out;
}

}  // namespace moranfilt

#include "moranfilt/cli.hpp"

#include "moranfilt/diagnostics.hpp"
#include "moranfilt/eigenbase.hpp"
#include "moranfilt/errors.hpp"
#include "moranfilt/esf.hpp"
#include "moranfilt/io.hpp"
#include "moranfilt/reesf.hpp"
#include "moranfilt/simgen.hpp"
#include "moranfilt/spatial_graph.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace moranfilt::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct DatasetArgs {
  std::string path;
  std::string coords = "x_coord,y_coord";
  std::string response = "y";
  std::string covariates;  // empty: every remaining column
};

struct SpatialArgs {
  Index knots = 200;
  std::string kernel = "exp";
  std::optional<double> range;
  std::uint64_t seed = 1;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& d, bool with_model_columns) {
  cmd->add_option("data", d.path, "Input CSV file")->required();
  cmd->add_option("--coords", d.coords, "Coordinate columns, comma separated")
      ->capture_default_str();
  if (with_model_columns) {
    cmd->add_option("--response", d.response, "Response column")->capture_default_str();
    cmd->add_option("--covariates", d.covariates,
                    "Covariate columns, comma separated (default: all other columns)");
  }
}

void add_spatial_options(CLI::App* cmd, SpatialArgs& s) {
  cmd->add_option("--knots", s.knots, "Number of knots L")->capture_default_str();
  cmd->add_option("--kernel", s.kernel, "Kernel family: exp, sph or gau")->capture_default_str();
  cmd->add_option("--range", s.range, "Kernel range r (default: longest MST edge)");
  cmd->add_option("--seed", s.seed, "Random seed for knots and subsampling")
      ->capture_default_str();
}

Coordinates read_coordinates(const io::CsvTable& table, const std::string& spec) {
  const auto names = split_names(spec);
  if (names.size() != 2) throw InvalidArgument("--coords must name exactly two columns");
  Eigen::MatrixX2d pts(static_cast<Index>(table.rows.size()), 2);
  pts.col(0) = table.numeric_column(names[0]);
  pts.col(1) = table.numeric_column(names[1]);
  return Coordinates(std::move(pts));
}

KernelSpec resolve_kernel(const SpatialArgs& s, const Coordinates& coords, double& range_seconds) {
  KernelSpec spec;
  spec.family = parse_kernel_tag(s.kernel);
  const auto start = std::chrono::steady_clock::now();
  if (s.range) {
    if (!(*s.range > 0.0) || !std::isfinite(*s.range)) {
      throw InvalidArgument("--range must be a positive number");
    }
    spec.range = *s.range;
  } else {
    RangeOptions opts;
    opts.seed = s.seed;
    spec.range = estimate_range_mst(coords, opts);
  }
  range_seconds = seconds_since(start);
  return spec;
}

Index clamp_knots(Index requested, Index n) {
  if (requested < 2) throw InvalidArgument("--knots must be at least 2");
  if (requested > n) {
    std::cerr << "note: --knots " << requested << " exceeds the row count; using " << n << '\n';
    return n;
  }
  return requested;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InvalidArgument("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  return out;
}

json mc_json(const McReport& r) {
  return {{"mc", r.mc},       {"expected", r.expected}, {"variance", r.variance},
          {"z", r.z},         {"n_used", r.n_used},     {"subsampled", r.subsampled}};
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

// ---- estimate -------------------------------------------------------------

struct EstimateArgs {
  DatasetArgs data;
  SpatialArgs spatial;
  std::string model = "resf";
  std::string screen = "0.01";
  std::string out = ".";
};

int cmd_estimate(const EstimateArgs& a) {
  const io::CsvTable table = io::read_csv_file(a.data.path);
  const Coordinates coords = read_coordinates(table, a.data.coords);
  const Index n = coords.size();

  std::vector<std::string> cov_names;
  if (!a.data.covariates.empty()) {
    cov_names = split_names(a.data.covariates);
  } else {
    const auto coord_names = split_names(a.data.coords);
    for (const auto& h : table.header) {
      if (h == a.data.response) continue;
      if (std::find(coord_names.begin(), coord_names.end(), h) != coord_names.end()) continue;
      cov_names.push_back(h);
    }
  }
  const VectorXd y = table.numeric_column(a.data.response);
  const Index k = static_cast<Index>(cov_names.size()) + 1;
  if (n < std::max<Index>(k + 2, 10)) {
    throw InvalidArgument("data file has " + std::to_string(n) + " rows; at least " +
                          std::to_string(std::max<Index>(k + 2, 10)) + " are required");
  }
  MatrixXd x(n, k);
  x.col(0).setOnes();
  for (Index j = 1; j < k; ++j) x.col(j) = table.numeric_column(cov_names[static_cast<std::size_t>(j - 1)]);
  std::vector<std::string> coef_names{"(Intercept)"};
  coef_names.insert(coef_names.end(), cov_names.begin(), cov_names.end());

  if (a.model != "lm" && a.model != "esf" && a.model != "resf") {
    throw InvalidArgument("--model must be lm, esf or resf");
  }
  std::optional<double> screening;
  if (a.screen != "off") {
    try {
      std::size_t used = 0;
      screening = std::stod(a.screen, &used);
      if (used != a.screen.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw InvalidArgument("--screen must be a threshold in [0, 1) or 'off'");
    }
  }

  json runtime = {{"range", 0.0}, {"knots", 0.0}, {"eigen", 0.0},
                  {"moments", 0.0}, {"optimize", 0.0}, {"solve", 0.0}};
  double range_seconds = 0.0;
  const KernelSpec kernel = resolve_kernel(a.spatial, coords, range_seconds);
  runtime["range"] = range_seconds;

  EigenBasis basis = EigenBasis::none(n);
  if (a.model != "lm") {
    const Index l = clamp_knots(a.spatial.knots, n);
    auto start = std::chrono::steady_clock::now();
    const KnotSet knots = select_knots(coords, l, a.spatial.seed);
    runtime["knots"] = seconds_since(start);
    start = std::chrono::steady_clock::now();
    basis = nystrom_moran_eigen(coords, knots, kernel);
    runtime["eigen"] = seconds_since(start);
  }

  VectorXd beta;
  VectorXd beta_se;
  VectorXd residuals;
  json report;
  report["model"] = a.model;
  report["n"] = n;
  report["K"] = k;
  report["kernel"] = {{"family", std::string(kernel_tag(kernel.family))}, {"range", kernel.range}};

  if (a.model == "resf") {
    const ReesfFit fit = fit_reesf(x, y, basis);
    beta = fit.beta;
    beta_se = fit.beta_se;
    residuals = fit.residuals;
    runtime["moments"] = fit.moments_seconds;
    runtime["optimize"] = fit.optimize_seconds;
    report["L_retained"] = basis.size();
    report["theta"] = {{"alpha", fit.theta.alpha}, {"sigma_gamma2", fit.theta.sigma_gamma2}};
    report["variance_components"] = {{"sigma2", fit.sigma2},
                                     {"sigma_gamma2", fit.theta.sigma_gamma2 * fit.sigma2}};
    report["loglik"] = fit.loglik;
    report["evaluations"] = fit.evaluations;
  } else {
    const auto start = std::chrono::steady_clock::now();
    const EsfFit fit = a.model == "lm" ? fit_ols(x, y) : fit_esf(x, y, basis, screening);
    runtime["solve"] = seconds_since(start);
    beta = fit.beta;
    beta_se = fit.beta_se;
    residuals = fit.residuals;
    report["L_retained"] = static_cast<Index>(fit.selected.size());
    report["L_candidates"] = basis.size();
    if (a.model == "esf") report["screening"] = finite_or_null(screening.value_or(NAN));
    report["variance_components"] = {{"sigma2", fit.sigma2}};
    report["adj_r2"] = finite_or_null(fit.adj_r2);
  }

  McOptions mc;
  mc.seed = a.spatial.seed;
  const McReport z = residual_mc_z(residuals, coords, kernel, mc);
  report["residual_mc"] = mc_json(z);

  json coefs = json::array();
  for (Index j = 0; j < k; ++j) {
    coefs.push_back({{"name", coef_names[static_cast<std::size_t>(j)]},
                     {"estimate", beta[j]},
                     {"se", beta_se[j]},
                     {"z", beta[j] / beta_se[j]}});
  }
  report["coefficients"] = coefs;
  report["runtime_seconds"] = runtime;

  const fs::path dir = prepare_dir(a.out);
  {
    auto out = open_out(dir / "report.json");
    out << report.dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "residuals.csv");
    out << "id,residual\n";
    for (Index i = 0; i < n; ++i) out << (i + 1) << ',' << io::format_double(residuals[i]) << '\n';
  }

  std::cout << "model " << a.model << "  n = " << n << "  L = " << report["L_retained"].get<Index>()
            << "  kernel " << kernel_tag(kernel.family) << " r = " << kernel.range << '\n';
  std::cout << std::left << std::setw(16) << "coefficient" << std::right << std::setw(14)
            << "estimate" << std::setw(14) << "se" << std::setw(10) << "z" << '\n';
  for (Index j = 0; j < k; ++j) {
    std::cout << std::left << std::setw(16) << coef_names[static_cast<std::size_t>(j)] << std::right
              << std::setw(14) << beta[j] << std::setw(14) << beta_se[j] << std::setw(10)
              << std::setprecision(3) << beta[j] / beta_se[j] << std::setprecision(6) << '\n';
  }
  std::cout << "residual MC " << z.mc << "  z = " << z.z << (z.subsampled ? " (subsample)" : "")
            << '\n';
  return 0;
}

// ---- eigen ----------------------------------------------------------------

struct EigenArgs {
  DatasetArgs data;
  SpatialArgs spatial;
  bool exact = false;
  std::string out = ".";
};

int cmd_eigen(const EigenArgs& a) {
  const io::CsvTable table = io::read_csv_file(a.data.path);
  const Coordinates coords = read_coordinates(table, a.data.coords);
  double range_seconds = 0.0;
  const KernelSpec kernel = resolve_kernel(a.spatial, coords, range_seconds);
  EigenBasis basis;
  if (a.exact) {
    basis = exact_moran_eigen(build_connectivity(coords, kernel, true));
  } else {
    const Index l = clamp_knots(a.spatial.knots, coords.size());
    basis = nystrom_moran_eigen(coords, select_knots(coords, l, a.spatial.seed), kernel);
  }
  const fs::path dir = prepare_dir(a.out);
  auto vec_out = open_out(dir / "eigenvectors.csv");
  auto val_out = open_out(dir / "eigenvalues.csv");
  write_basis_csv(basis, vec_out, val_out);
  std::cerr << "retained " << basis.size() << " eigenvectors\n";
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  Index n = 1000;
  double sigma_gamma = 1.0;
  double sigma_gamma_x = 0.0;
  double alpha = 1.0;
  double r_mult = 1.0;
  Index l_gen = 200;
  std::string kernel = "exp";
  std::uint64_t seed = 1;
  std::string out = "simulated.csv";
};

int cmd_simulate(const SimulateArgs& a) {
  SimConfig config;
  config.n = a.n;
  config.l_gen = a.l_gen;
  config.sigma_gamma = a.sigma_gamma;
  config.sigma_gamma_x = a.sigma_gamma_x;
  config.alpha_true = a.alpha;
  config.r_mult = a.r_mult;
  config.kernel = parse_kernel_tag(a.kernel);
  config.replications = 1;
  config.base_seed = a.seed;
  config.estimators = {{EstimatorKind::Lm, 0}};
  config.validate();

  const SimulatedData data = simulate_dataset(config, a.seed);
  const fs::path path(a.out);
  if (path.has_parent_path()) prepare_dir(path.parent_path().string());
  {
    auto out = open_out(path);
    out << "x_coord,y_coord,x1,x2,y\n";
    for (Index i = 0; i < config.n; ++i) {
      out << io::format_double(data.coords.points()(i, 0)) << ','
          << io::format_double(data.coords.points()(i, 1)) << ','
          << io::format_double(data.x(i, 1)) << ',' << io::format_double(data.x(i, 2)) << ','
          << io::format_double(data.y[i]) << '\n';
    }
  }
  fs::path sidecar = path;
  sidecar.replace_extension(".truth.json");
  json truth = {{"beta", config.beta_true},
                {"theta", {{"alpha", config.alpha_true},
                           {"sigma_gamma", config.sigma_gamma},
                           {"sigma_gamma2", config.sigma_gamma * config.sigma_gamma}}},
                {"sigma2", 1.0},
                {"sigma_gamma_x", config.sigma_gamma_x},
                {"kernel", {{"family", a.kernel}, {"range", data.true_kernel.range}}},
                {"mst_range", data.range},
                {"r_mult", config.r_mult},
                {"basis", {{"mode", data.truth_basis.mode == EigenMode::Exact ? "exact" : "nystrom"},
                           {"size", data.truth_basis.size()}}},
                {"seed", a.seed}};
  auto out = open_out(sidecar);
  out << truth.dump(2) << '\n';
  return 0;
}

// ---- benchmark ------------------------------------------------------------

struct BenchmarkArgs {
  std::string preset;
  Index replications = 0;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out = ".";
  std::vector<Index> n{5000};
  std::vector<double> sigma_gamma{1.0};
  std::vector<double> sigma_gamma_x{0.0};
  std::vector<double> r_mult{1.0};
  std::vector<double> alpha{1.0};
  std::vector<std::string> kernels{"exp"};
  std::vector<std::string> estimators{"LM", "fE200", "fRE200"};
  bool no_mc = false;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  const Index reps = a.replications > 0 ? a.replications : 200;
  std::vector<SimConfig> configs;
  if (!a.preset.empty()) {
    configs = preset_configs(a.preset, reps, a.seed);
  } else {
    std::vector<EstimatorSpec> est;
    for (const auto& e : a.estimators) est.push_back(parse_estimator(e));
    for (Index n : a.n)
      for (double sg : a.sigma_gamma)
        for (double sx : a.sigma_gamma_x)
          for (double rm : a.r_mult)
            for (double al : a.alpha)
              for (const auto& kt : a.kernels) {
                SimConfig c;
                c.n = n;
                c.sigma_gamma = sg;
                c.sigma_gamma_x = sx;
                c.r_mult = rm;
                c.alpha_true = al;
                c.kernel = parse_kernel_tag(kt);
                c.estimators = est;
                c.replications = reps;
                c.base_seed = a.seed;
                configs.push_back(c);
              }
  }
  for (auto& c : configs) {
    c.jobs = a.jobs;
    if (a.no_mc) c.compute_mc = false;
    c.validate();
  }

  McReportTable table;
  for (const auto& c : configs) {
    std::cerr << "running n = " << c.n << " sigma_gamma = " << c.sigma_gamma
              << " sigma_gamma_x = " << c.sigma_gamma_x << " r_mult = " << c.r_mult
              << " alpha = " << c.alpha_true << " kernel = " << kernel_tag(c.kernel) << '\n';
    table.append(run_experiment(c));
  }
  const fs::path dir = prepare_dir(a.out);
  {
    auto out = open_out(dir / "benchmark.csv");
    write_table_csv(table, out);
  }
  {
    auto out = open_out(dir / "benchmark.json");
    write_table_json(table, out);
  }
  std::size_t failed = 0;
  for (const auto& r : table.records) failed += r.failed ? 1 : 0;
  if (!table.records.empty() && failed == table.records.size()) {
    std::cerr << "error: every replication failed\n";
    return 3;
  }
  write_table_csv(table, std::cout);
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Fast eigenvector spatial filtering and random-effects ESF"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Fit LM, fast ESF or fast RE-ESF to a CSV data set");
  add_dataset_options(c_est, est.data, true);
  add_spatial_options(c_est, est.spatial);
  c_est->add_option("--model", est.model, "lm, esf or resf")->capture_default_str();
  c_est->add_option("--screen", est.screen, "ESF correlation threshold or 'off'")
      ->capture_default_str();
  c_est->add_option("--out", est.out, "Output directory")->capture_default_str();

  EigenArgs eig;
  auto* c_eig = app.add_subcommand("eigen", "Export Moran eigenvectors and eigenvalues");
  add_dataset_options(c_eig, eig.data, false);
  add_spatial_options(c_eig, eig.spatial);
  c_eig->add_flag("--exact", eig.exact, "Exact decomposition of MCM instead of Nystrom");
  c_eig->add_option("--out", eig.out, "Output directory")->capture_default_str();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write a synthetic data set and its truth");
  c_sim->add_option("--n", sim.n, "Sample size")->capture_default_str();
  c_sim->add_option("--sigma-gamma", sim.sigma_gamma, "Residual spatial scale")
      ->capture_default_str();
  c_sim->add_option("--sigma-gamma-x", sim.sigma_gamma_x, "Covariate spatial share in [0, 1]")
      ->capture_default_str();
  c_sim->add_option("--alpha", sim.alpha, "True alpha")->capture_default_str();
  c_sim->add_option("--r-mult", sim.r_mult, "True range as a multiple of the MST range")
      ->capture_default_str();
  c_sim->add_option("--l-gen", sim.l_gen, "Basis size of the generating process")
      ->capture_default_str();
  c_sim->add_option("--kernel", sim.kernel, "Kernel family: exp, sph or gau")
      ->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--out", sim.out, "Output CSV path")->capture_default_str();

  BenchmarkArgs bench;
  auto* c_bench = app.add_subcommand("benchmark", "Run a Monte Carlo comparison");
  c_bench->add_option("--preset", bench.preset,
                      "table234, table5, scaling, appendixB or appendixC");
  c_bench->add_option("--replications", bench.replications, "Replications per configuration");
  c_bench->add_option("--seed", bench.seed, "Base seed")->capture_default_str();
  c_bench->add_option("--jobs", bench.jobs, "Replication worker threads")->capture_default_str();
  c_bench->add_option("--out", bench.out, "Output directory")->capture_default_str();
  c_bench->add_option("--n", bench.n, "Sample sizes")->delimiter(',');
  c_bench->add_option("--sigma-gamma", bench.sigma_gamma, "Residual spatial scales")->delimiter(',');
  c_bench->add_option("--sigma-gamma-x", bench.sigma_gamma_x, "Covariate spatial shares")
      ->delimiter(',');
  c_bench->add_option("--r-mult", bench.r_mult, "True range multipliers")->delimiter(',');
  c_bench->add_option("--alpha", bench.alpha, "True alpha values")->delimiter(',');
  c_bench->add_option("--kernel", bench.kernels, "Kernel families")->delimiter(',');
  c_bench->add_option("--estimators", bench.estimators, "Estimator labels, e.g. LM,fE200,fRE200")
      ->delimiter(',');
  c_bench->add_flag("--no-mc", bench.no_mc, "Skip the residual Moran test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_est->parsed()) return cmd_estimate(est);
    if (c_eig->parsed()) return cmd_eigen(eig);
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_bench->parsed()) return cmd_benchmark(bench);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure in " << e.stage() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace moranfilt::cli

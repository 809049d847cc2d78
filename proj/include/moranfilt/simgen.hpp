#pragma once

#include "moranfilt/diagnostics.hpp"
#include "moranfilt/eigenbase.hpp"
#include "moranfilt/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace moranfilt {

enum class EstimatorKind { Lm, Esf, EsfScreened, Reesf, Stepwise };

/// One estimator of the comparison, e.g. "LM", "fE200", "fE200*", "fRE200",
/// "Estep200".
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Lm;
  Index knots = 0;  ///< unused for LM

  std::string label() const;
};

/// Parses a label produced by EstimatorSpec::label.
EstimatorSpec parse_estimator(const std::string& label);

struct SimConfig {
  Index n = 5000;
  Index l_gen = 200;
  std::vector<EstimatorSpec> estimators;
  std::vector<double> beta_true = {1.0, 2.0, -0.5};
  double sigma_gamma = 1.0;
  double sigma_gamma_x = 0.0;
  double alpha_true = 1.0;
  double r_mult = 1.0;
  KernelFamily kernel = KernelFamily::Exponential;
  Index replications = 200;
  std::uint64_t base_seed = 1;
  double screening = 0.01;
  /// The truth basis is exact at or below this size, Nystrom above it.
  Index exact_max_n = 300;
  bool compute_mc = true;
  McOptions mc;
  /// Replication-level worker threads; results do not depend on it.
  int jobs = 1;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// Estimators expanded over a list of basis sizes, e.g. ({Reesf}, {50, 200})
/// gives fRE50 and fRE200.
std::vector<EstimatorSpec> expand_estimators(const std::vector<EstimatorKind>& kinds,
                                             const std::vector<Index>& knots);

/// n i.i.d. bivariate standard normal sites.
Coordinates generate_coordinates(Index n, std::uint64_t seed);

/// E gamma_x + eps_x with gamma_x ~ N(0, s^2 Lambda(1)) and
/// eps_x ~ N(0, (1 - s)^2 I), s = sigma_gamma_x in [0, 1].
VectorXd generate_covariate(const EigenBasis& basis, double sigma_gamma_x, std::uint64_t seed);

/// X beta + E gamma + eps with gamma ~ N(0, sigma_gamma^2 Lambda(alpha)) and
/// eps ~ N(0, I).
VectorXd generate_response(const MatrixXd& x, const EigenBasis& basis,
                           const std::vector<double>& beta_true, double sigma_gamma,
                           double alpha_true, std::uint64_t seed);

/// A generated data set together with the truth used to build it.
struct SimulatedData {
  Coordinates coords;
  MatrixXd x;  ///< [1, x1, x2]
  VectorXd y;
  double range = 0.0;  ///< MST range of the sites
  KernelSpec true_kernel;
  EigenBasis truth_basis;
  std::uint64_t seed = 0;
};

/// Draws one data set following the experiment design for replication seed
/// `seed`: sites, MST range r, truth basis at r_mult * r, covariates, response.
SimulatedData simulate_dataset(const SimConfig& config, std::uint64_t seed);

/// Knot seed shared by generation and fitting for a replication and basis size.
std::uint64_t knot_seed(std::uint64_t replication_seed, Index knots);

/// Outcome of one estimator on one replication.
struct ReplicationRecord {
  std::string estimator;
  Index iteration = 0;
  double beta1 = 0.0;
  double se1 = 0.0;
  double se_true = 0.0;
  double z_mc = 0.0;
  double seconds = 0.0;
  bool failed = false;
  std::string failure;
};

struct TableRow {
  MetricRow metrics;
  Index n = 0;
  double sigma_gamma = 0.0;
  double sigma_gamma_x = 0.0;
  double r_mult = 1.0;
  double alpha_true = 1.0;
  std::string kernel;
  Index failures = 0;
};

struct McReportTable {
  std::vector<TableRow> rows;
  std::vector<ReplicationRecord> records;

  void append(const McReportTable& other);
  /// Row for (estimator, n, sigma_gamma, sigma_gamma_x, r_mult, alpha_true);
  /// throws InvalidArgument when absent.
  const TableRow& find(const std::string& estimator, Index n, double sigma_gamma,
                       double sigma_gamma_x, double r_mult = 1.0, double alpha_true = 1.0) const;
};

/// Runs every replication of `config` and aggregates one row per estimator.
/// Replication i uses seed base_seed + i. A failing estimator is recorded and
/// excluded from its row's aggregates; the run continues.
McReportTable run_experiment(const SimConfig& config);

/// Writes the fixed-column CSV (one row per configuration and estimator).
void write_table_csv(const McReportTable& table, std::ostream& out);
/// Writes the rows as a JSON array summary.
void write_table_json(const McReportTable& table, std::ostream& out);

/// Named experiment matrices: table234, table5, scaling, appendixB, appendixC.
std::vector<SimConfig> preset_configs(const std::string& name, Index replications,
                                      std::uint64_t base_seed);

}  // namespace moranfilt

#pragma once

#include "moranfilt/eigenbase.hpp"
#include "moranfilt/types.hpp"

#include <optional>
#include <vector>

namespace moranfilt {

/// Fixed-effects eigenvector spatial filter: OLS on [X, E_selected].
struct EsfFit {
  VectorXd beta;
  VectorXd gamma;
  VectorXd beta_se;
  VectorXd gamma_se;
  double sigma2 = 0.0;
  std::vector<Index> selected;  ///< basis columns used, ascending
  VectorXd residuals;
  double adj_r2 = 0.0;
  double rss = 0.0;
};

/// Indices l with |cor(y, e_l)| > threshold. Columns with zero variance are
/// never selected.
std::vector<Index> screen_eigenvectors(const VectorXd& y, const EigenBasis& basis,
                                       double threshold);

/// OLS over [X, E_selected], where the selection is every column of `basis`
/// or, given a threshold, the correlation-screened subset. The system is
/// assembled from (K+L')-dimensional cross-moments and solved with a
/// column-pivoted QR of the equilibrated Gram matrix.
EsfFit fit_esf(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis,
               std::optional<double> screening = std::nullopt);

/// Plain linear model, i.e. fit_esf with an empty basis.
EsfFit fit_ols(const MatrixXd& x, const VectorXd& y);

struct StepwiseOptions {
  Index max_n = 10000;
  Index max_candidates = 200;
};

/// Forward selection: starting from X alone, repeatedly add the basis column
/// that maximizes adjusted R^2; stop when no column improves it. Ties go to
/// the lowest column index. Assumes X carries an intercept.
EsfFit fit_esf_stepwise(const MatrixXd& x, const VectorXd& y, const EigenBasis& basis,
                        const StepwiseOptions& options = {});

}  // namespace moranfilt

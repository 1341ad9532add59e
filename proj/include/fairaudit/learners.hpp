#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

enum class FitKind { logistic, ols, lasso, multitask_row };

const char* fit_kind_name(FitKind k);

// One fitted linear model. vcov and residual_variance are filled for OLS only;
// objective_trace records the optimizer's objective per iteration (logistic)
// or per sweep (lasso), and is non-increasing.
struct LinearFit {
  FitKind kind = FitKind::ols;
  Eigen::VectorXd coefficients;  // length p, original feature scale
  double intercept = 0.0;
  bool converged = true;
  int iterations = 0;
  double lambda = 0.0;
  double residual_variance = 0.0;  // ols: RSS / (n - p - 1)
  Eigen::MatrixXd vcov;            // ols: (p+1) x (p+1), intercept first
  std::vector<double> objective_trace;
};

struct LogisticConfig {
  int max_iter = 100;
  double tol = 1e-8;  // on the gradient infinity norm
  double l2 = 0.0;    // ridge penalty on coefficients (never the intercept)
};

/// Penalized mean log-loss: mean_i w_i*ell_i / mean_w + (l2/2)*|beta|^2, with
/// ell_i = log(1+exp(s_i)) - y_i*s_i and s = X*beta + alpha. Weights default
/// to one. Evaluated in a numerically stable form.
double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& beta, double alpha, double l2,
                          const Eigen::VectorXd& weights = Eigen::VectorXd());

/// Gradient of logistic_objective over [alpha, beta]; length p+1, alpha first.
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& beta, double alpha, double l2,
                                  const Eigen::VectorXd& weights = Eigen::VectorXd());

/// IRLS with objective-based step halving; falls back to damped gradient steps
/// when the Hessian solve degenerates. Non-convergence (e.g. separation with
/// l2 = 0) is reported through the converged flag, never an exception; a
/// single-class y is accepted on the same terms.
LinearFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const LogisticConfig& cfg = {},
                       const Eigen::VectorXd& weights = Eigen::VectorXd());

/// sigmoid(X*beta + alpha), stable for scores of any magnitude.
Eigen::VectorXd predict_proba(const LinearFit& fit, const Eigen::MatrixXd& X);

/// X*beta + alpha.
Eigen::VectorXd predict_linear(const LinearFit& fit, const Eigen::MatrixXd& X);

/// Least squares with intercept via column-pivoted QR. Requires n > p + 1 and
/// full column rank; rank deficiency raises an error naming the dependent
/// columns. Fills residual_variance and vcov = sigma^2 * (A'A)^-1 over the
/// intercept-augmented design.
LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& column_names = {});

struct LassoConfig {
  int max_sweeps = 1000;
  double tol = 1e-9;  // on the largest standardized-coefficient update
};

/// Smallest lambda at which the lasso solution is all zeros:
/// max_j |x~_j' (y - mean(y))| / n over internally standardized columns.
double lasso_max_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Cyclic coordinate descent with soft thresholding. Columns are standardized
/// internally (constant columns get coefficient zero); lambda applies on that
/// standardized scale and coefficients are reported on the original scale.
LinearFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                    const LassoConfig& cfg = {});

/// The objective fit_lasso minimizes, evaluated at a fit on the original
/// scale: mean squared residual / 2 + lambda * sum_j |beta_j * sd_j|.
double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const LinearFit& fit, double lambda);

/// Block coordinate descent over coefficient rows with a group soft
/// threshold: every task keeps the same support (rows are zero or dense
/// across all tasks). With one task this reduces exactly to fit_lasso.
std::vector<LinearFit> fit_multitask_lasso(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                           double lambda, const LassoConfig& cfg = {});

/// One-hot design block for the named protected attributes; the first level
/// of each attribute (in its declared order) is the dropped reference.
struct DesignBlock {
  Eigen::MatrixXd columns;
  std::vector<std::string> names;
};
DesignBlock one_hot(const Dataset& ds, const std::vector<std::string>& attrs);

// One-vs-rest multi-label model: an independent logistic fit per label over
// the shared design (features, plus one-hot protected attributes when aware).
struct MultiLabelModel {
  std::vector<LinearFit> fits;  // one per label
  std::vector<std::string> label_names;
  std::vector<std::string> design_names;
  std::vector<std::string> encoded_attributes;  // empty when unaware
  bool include_protected = false;
  TaskKind task = TaskKind::adoption;

  std::string to_json_text() const;
  static MultiLabelModel from_json_text(const std::string& text);
};

/// Design matrix the model scores: features, plus one-hot columns when aware.
Eigen::MatrixXd model_design(const MultiLabelModel& model, const Dataset& ds);

/// n x K probability matrix for every label.
Eigen::MatrixXd predict_proba_all(const MultiLabelModel& model, const Dataset& ds);

/// Trains one logistic fit per label. Labels that fail to converge stay in
/// the model flagged, so a rare degenerate label never aborts the audit.
MultiLabelModel fit_multilabel(const Dataset& ds, const LogisticConfig& cfg,
                               bool include_protected);

}  // namespace fairaudit

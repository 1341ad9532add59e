#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fairaudit/learners.hpp"

namespace fairaudit {

enum class TestStatistic { accuracy, auc };

const char* test_statistic_name(TestStatistic s);
TestStatistic test_statistic_from_name(const std::string& name);

struct TwoSampleConfig {
  LogisticConfig classifier{100, 1e-8, 1e-3};  // small ridge keeps permuted refits stable
  int n_permutations = 200;
  TestStatistic statistic = TestStatistic::accuracy;
  double holdout_fraction = 0.3;
  int threads = 0;  // 0 = hardware concurrency; permutations are independent
};

// Outcome of the classifier two-sample test: can a model find the protected
// attribute in the features? observed is the held-out statistic of the real
// labeling; null_samples come from refits on permuted labelings over the same
// split; p uses the add-one rule (1 + #{null >= observed}) / (1 + B).
struct TwoSampleResult {
  TestStatistic statistic_id = TestStatistic::accuracy;
  double observed = 0;
  std::vector<double> null_samples;
  double p_value = 1;
  double adjusted_p = 1;  // Holm-adjusted in multiclass runs, = p_value otherwise
  LinearFit classifier;
  Eigen::VectorXd attribution;  // mean |contribution| per design column
  int n_permutations = 0;
  std::uint64_t seed = 0;
  std::string level;  // one-vs-rest level in multiclass runs

  std::string to_json_text(const std::vector<std::string>& column_names = {}) const;
};

/// Five steps: fix a stratified 70/30 split from the seed, fit the classifier
/// on the training side, score the held-out statistic, repeat on permuted
/// attribute vectors over the same split, and smooth the p-value by add-one.
/// Errors: single-class attr; a split that strands either class.
TwoSampleResult two_sample_test(const Eigen::MatrixXd& X, const Eigen::VectorXd& attr,
                                const TwoSampleConfig& cfg, std::uint64_t seed);

/// One-vs-rest test per attribute level (levels must all be populated),
/// with Holm step-down adjustment across the levels.
std::vector<TwoSampleResult> multiclass_attr_test(const Eigen::MatrixXd& X,
                                                  const std::vector<int>& codes,
                                                  const std::vector<std::string>& level_names,
                                                  const TwoSampleConfig& cfg,
                                                  std::uint64_t seed);

/// Holm step-down adjustment; returns the adjusted values in input order.
std::vector<double> holm_adjust(const std::vector<double>& p_values);

/// Per-row, per-column contributions phi[i][j] = beta_j * (x_ij - mean_j),
/// which sum across j to the row's score minus the mean score exactly.
Eigen::MatrixXd attribution_matrix(const LinearFit& fit, const Eigen::MatrixXd& X);

/// Mean |phi| per column: the global attribution ranking.
Eigen::VectorXd linear_attribution(const LinearFit& fit, const Eigen::MatrixXd& X);

enum class CoefBlock { intercept, feature, predicted_label, demographic };

const char* coef_block_name(CoefBlock b);

// OLS decomposition of a per-instance bias quantity over features, model
// outputs, and demographic one-hots. Delegates the solve to fit_ols, so the
// numbers match it bit for bit.
struct DecompositionFit {
  LinearFit ols;
  double alpha = 0;
  Eigen::VectorXd beta;   // feature block
  Eigen::VectorXd gamma;  // predicted-label block
  Eigen::VectorXd delta;  // demographic block
  Eigen::VectorXd residuals;
  Eigen::VectorXd standard_errors;  // sqrt(diag(vcov)), intercept first
  std::vector<std::string> column_names;  // intercept first
  std::vector<CoefBlock> column_blocks;

  std::string to_json_text() const;
};

DecompositionFit bias_decomposition(const Eigen::VectorXd& bias, const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& yhat, const DesignBlock& demographics,
                                    const std::vector<std::string>& feature_names = {},
                                    const std::vector<std::string>& label_names = {});

/// Regresses the residual y - yhat on demographics alone: any recoverable
/// structure there is signal the model left on the table.
DecompositionFit residual_regression(const Eigen::VectorXd& y_true,
                                     const Eigen::VectorXd& y_pred,
                                     const DesignBlock& demographics);

struct VcovReport {
  std::vector<std::string> column_names;
  Eigen::MatrixXd vcov;
  Eigen::MatrixXd correlation;
  struct FlaggedPair {
    int i, j;
    double correlation;
  };
  std::vector<FlaggedPair> flagged;  // |corr| > threshold, i < j
  double threshold = 0.9;

  std::string to_json_text() const;
};

/// Labeled coefficient covariance with high-|correlation| pairs flagged;
/// the multicollinearity early-warning view.
VcovReport coef_vcov_report(const DecompositionFit& fit, double threshold = 0.9);

}  // namespace fairaudit

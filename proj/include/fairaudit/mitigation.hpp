#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fairaudit/learners.hpp"
#include "fairaudit/metrics.hpp"

namespace fairaudit {

enum class ThresholdCriterion { equal_selection_rate, equal_tpr };

const char* threshold_criterion_name(ThresholdCriterion c);
ThresholdCriterion threshold_criterion_from_name(const std::string& name);

// Per-(label, group) decision thresholds. Groups are addressed by name so a
// policy fitted on one split can be applied to another; names the policy has
// never seen fall back to default_threshold.
struct ThresholdPolicy {
  ThresholdCriterion criterion = ThresholdCriterion::equal_selection_rate;
  std::vector<std::string> labels;
  std::vector<std::string> groups;
  Eigen::ArrayXXd thresholds;  // K x G
  Eigen::ArrayXd residual_gap;  // per label: criterion range achieved on the fitting data
  std::vector<std::vector<bool>> excluded;  // K x G: no positives under equal_tpr
  double default_threshold = 0.5;
  double tol = 0.02;

  std::string to_json_text() const;
  static ThresholdPolicy from_json_text(const std::string& text);
};

/// Searches per-group thresholds (over each group's sorted unique scores and
/// the midpoints between them) for a common criterion level, so the range of
/// the criterion metric across groups falls within tol where achievable; the
/// residual range is recorded either way. Groups already within tol at the
/// default threshold keep it. Under equal_tpr, groups without positives are
/// flagged, excluded from the range, and keep the default threshold.
ThresholdPolicy fit_thresholds(const Eigen::MatrixXd& probas, const Eigen::MatrixXd& targets,
                               const IntersectionIndex& idx, ThresholdCriterion criterion,
                               double tol, const std::vector<std::string>& label_names = {});

/// Decisions 1{p >= threshold(label, group of row)}; rows outside every known
/// group use the default threshold.
Eigen::MatrixXd apply_thresholds(const Eigen::MatrixXd& probas, const IntersectionIndex& idx,
                                 const ThresholdPolicy& policy);

enum class FairnessConstraint { demographic_parity, equalized_odds };

const char* fairness_constraint_name(FairnessConstraint c);
FairnessConstraint fairness_constraint_from_name(const std::string& name);

struct EgrConfig {
  LogisticConfig base{100, 1e-8, 1e-3};
  double epsilon = 0.02;
  int max_iter = 50;
  double learning_rate = 0;  // 0 = 2*log(#multipliers)/sqrt(max_iter)
  double nu_tol = 1e-4;      // stop once the Lagrangian gap estimate falls below
  bool best_iterate = false;  // return the best single round instead of the mixture
};

struct EgrTraceRow {
  int iteration = 0;
  double violation = 0;  // max signed constraint gap of the running mixture
  double gap = 0;        // Lagrangian gap estimate
  double best_gap = 0;   // running minimum of gap
};

// Mixture of deterministic classifiers from the constrained reduction.
// weights sum to one; the mixture score of a row is the weighted share of
// components voting 1, determinized at 0.5.
struct RandomizedClassifier {
  FairnessConstraint constraint = FairnessConstraint::demographic_parity;
  double epsilon = 0.02;
  std::vector<LinearFit> components;
  Eigen::VectorXd weights;
  bool converged = false;
  std::vector<EgrTraceRow> trace;
};

Eigen::VectorXd mixture_scores(const RandomizedClassifier& rc, const Eigen::MatrixXd& X);
Eigen::VectorXd mixture_decisions(const RandomizedClassifier& rc, const Eigen::MatrixXd& X);

/// Largest constraint gap of a decision vector: under demographic parity the
/// max over groups of |selection(group) - selection(all)|, under equalized
/// odds additionally sliced by the true label. Empty slices contribute
/// nothing.
double constraint_violation(const Eigen::VectorXd& decisions, const Eigen::VectorXd& y,
                            const std::vector<int>& group, int n_groups,
                            FairnessConstraint constraint);

/// Constrained training as a two-player game: multiplicative-weight updates
/// on the constraint multipliers (capped at 1/epsilon) against cost-reweighted
/// logistic best responses. Round one uses zero multipliers, so a classifier
/// that is already fair within epsilon returns alone immediately. Returns the
/// uniform mixture over rounds (or the best round when configured), with a
/// per-round trace of violation and Lagrangian gap.
RandomizedClassifier exponentiated_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                            const std::vector<int>& group, int n_groups,
                                            FairnessConstraint constraint, const EgrConfig& cfg);

struct TradeoffPoint {
  double epsilon = 0;
  std::uint64_t seed = 0;
  double accuracy = 0;   // held-out accuracy of the determinized mixture
  double violation = 0;  // held-out constraint gap
  bool dominated = false;  // another point is strictly better on both axes
  Eigen::VectorXd group_rates;  // held-out per-group selection rate (or TPR under odds)
  bool converged = false;
};

/// One constrained run per epsilon, each on its own seeded train/holdout
/// split, evaluated out of sample. Duplicate epsilons get distinct derived
/// seeds and both points are kept.
std::vector<TradeoffPoint> pareto_sweep(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const std::vector<int>& group, int n_groups,
                                        FairnessConstraint constraint,
                                        const std::vector<double>& epsilons,
                                        const EgrConfig& cfg, double holdout_fraction,
                                        std::uint64_t seed);

// Head-to-head of training with and without the protected attributes:
// difference[k][m] = unaware metric - aware metric on the shared holdout.
struct AwarenessComparison {
  std::vector<std::string> labels;
  std::vector<MetricId> metrics;
  Eigen::MatrixXd difference;  // K x 7, NaN where either side is undefined
  MetricTable recall_unaware;  // per-group recall grids over all attributes
  MetricTable recall_aware;
  std::uint64_t seed = 0;

  std::string to_json_text() const;
  std::string to_csv() const;
};

AwarenessComparison awareness_comparison(const Dataset& ds, const LogisticConfig& cfg,
                                         double holdout_fraction, std::uint64_t seed,
                                         int min_support = 30);

}  // namespace fairaudit

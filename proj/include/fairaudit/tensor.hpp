#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/metrics.hpp"

namespace fairaudit {

// Metric value g(l, k) per (group l, label k); the raw material tensors are
// built from. Rows are groups, columns are labels.
struct GValueGrid {
  MetricId metric = MetricId::selection_rate;
  std::vector<std::string> group_keys;
  std::vector<std::string> label_ids;
  Eigen::ArrayXXd values;                                    // L x K
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> status;  // CellStatus

  int group_count() const { return static_cast<int>(values.rows()); }
  int label_count() const { return static_cast<int>(values.cols()); }
  bool defined(int l, int k) const {
    return status(l, k) == static_cast<int>(CellStatus::defined);
  }
};

/// Evaluates one metric per (group, label). Classification metrics expect
/// binary predictions; regression metrics expect real-valued ones.
GValueGrid metric_by_group_and_label(const Eigen::MatrixXd& targets,
                                     const Eigen::MatrixXd& preds,
                                     const IntersectionIndex& idx, MetricId metric,
                                     const std::vector<std::string>& label_names = {});

// Per-(group, label) weights used to tilt a tensor. Rows follow the group
// axis, columns the label axis. All entries nonnegative; when `normalized`
// is set each row sums to one.
struct WeightMatrix {
  Eigen::MatrixXd values;  // L x K
  bool normalized = false;

  void validate() const;
  static WeightMatrix from_json_text(const std::string& text);
  std::string to_json_text() const;
};

/// Borda weights from two importance rankings (most important first):
/// a group ranked r-th of L scores L - r + 1 and a label ranked r-th of K
/// scores K - r + 1 (the least preferred item scores 1, never 0, so every
/// cell keeps positive weight); W[l,k] is the product of the two scores.
/// Each ranking must be a permutation of the corresponding id list. Rows are
/// normalized to sum to one when `normalize` is set.
WeightMatrix borda_weights(const std::vector<std::string>& group_ranking,
                           const std::vector<std::string>& label_ranking,
                           const std::vector<std::string>& group_keys,
                           const std::vector<std::string>& label_ids, bool normalize = true);

// Antisymmetric fairness tensor: values[l](k1,k2) = g(l,k1) - g(l,k2).
// Cells touching an undefined g-value are NaN and masked out of gdefined.
struct FairnessTensor {
  MetricId metric = MetricId::selection_rate;
  std::vector<std::string> group_keys;
  std::vector<std::string> label_ids;
  std::vector<Eigen::MatrixXd> values;                         // L matrices, K x K
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> gdefined;  // L x K, 0/1
  std::string dataset_hash;
  std::string model_id;

  int group_count() const { return static_cast<int>(values.size()); }
  int label_count() const { return group_count() ? static_cast<int>(values[0].rows()) : 0; }
  bool cell_defined(int l, int k1, int k2) const {
    return gdefined(l, k1) != 0 && gdefined(l, k2) != 0;
  }
  std::string to_json_text() const;
  std::string to_csv() const;  // long form: group,label_a,label_b,value
};

enum class UndefinedPolicy { strict, masked };

/// strict: any undefined g-cell is an error listing the offending
/// (group, label) pairs. masked: affected tensor cells become NaN and are
/// excluded from aggregation, with coverage reported there.
FairnessTensor build_tensor(const GValueGrid& grid, UndefinedPolicy policy = UndefinedPolicy::strict);

/// Weighted tensor, cell by cell:
/// result[l](k1,k2) = W[l,k1]*T[l](k1,k2) - W[l,k2]*T[l](k1,k2).
/// A constant weight matrix therefore annihilates the tensor; that is a
/// documented property of the construction, not a defect.
FairnessTensor apply_weights(const FairnessTensor& t, const WeightMatrix& w);

struct PairwiseGroupVector {
  MetricId metric = MetricId::selection_rate;
  int label = 0;
  int reference_group = 0;
  std::vector<std::string> other_groups;
  Eigen::VectorXd values;  // g(ref,k) - g(l,k) for every l != ref, group order
};

/// Group-axis reading for one label: the reference group's g-value minus
/// every other group's. Errors if any needed cell is undefined.
PairwiseGroupVector pairwise_group_vector(const GValueGrid& grid, int label,
                                          int reference_group);

enum class AggregateScheme { weighted_mean, median, harmonic_mean_abs, max_abs };

const char* aggregate_scheme_name(AggregateScheme s);
AggregateScheme aggregate_scheme_from_name(const std::string& name);

struct AggregateResult {
  AggregateScheme scheme = AggregateScheme::weighted_mean;
  double value = 0;
  int cells_used = 0;
  double coverage = 1.0;  // used / (L * K * (K-1) / 2)
  std::array<int, 3> peak_cell = {-1, -1, -1};  // (l, k1, k2) of the largest |value|
  double peak_value = 0;
};

/// Collapses the strict upper triangle (k1 < k2) of every group slice.
/// weighted_mean and harmonic_mean_abs act on |value| (harmonic with
/// epsilon 1e-9); median is the weighted median of the signed values;
/// max_abs reports the largest magnitude. Optional cell_weights must match
/// the tensor shape; zero-weight cells drop out of every scheme.
AggregateResult aggregate(const FairnessTensor& t, AggregateScheme scheme,
                          const std::vector<Eigen::MatrixXd>* cell_weights = nullptr);

struct ModelComparison {
  FairnessTensor delta;  // per cell: B - A on the common defined mask
  AggregateResult aggregate_a;
  AggregateResult aggregate_b;
  double scalar_delta = 0;  // aggregate(B) - aggregate(A): negative means B improves
};

/// Requires matching metric, group, and label axes.
ModelComparison compare_models(const FairnessTensor& a, const FairnessTensor& b,
                               AggregateScheme scheme);

}  // namespace fairaudit

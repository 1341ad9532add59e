#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

enum class MetricId {
  selection_rate,
  accuracy,
  precision,
  ppv,  // alias of precision, kept as its own id for table labeling
  recall_tpr,
  fpr,
  fnr,
  f1,
  overall_error,
  npv,
  mse,
  mae,
  rmse,
  r2,
  explained_variance,
};

const char* metric_name(MetricId m);
MetricId metric_from_name(const std::string& name);
bool is_classification_metric(MetricId m);

/// The seven columns of the standard per-label comparison table.
std::vector<MetricId> standard_classification_metrics();
std::vector<MetricId> standard_regression_metrics();

enum class CellStatus : int { defined = 0, zero_denominator = 1, empty_group = 2 };

// Per-(label, group) confusion counts; rows are labels, columns are groups.
struct ConfusionCounts {
  std::vector<std::string> label_names;
  std::vector<std::string> group_names;
  Eigen::ArrayXXd tp, fp, tn, fn;  // K x G each
  Eigen::ArrayXd group_sizes;      // G
  std::vector<bool> below_support;  // per group, copied from the index

  int label_count() const { return static_cast<int>(tp.rows()); }
  int group_count() const { return static_cast<int>(tp.cols()); }
};

// One metric over the (label, group) grid. A cell is either defined or carries
// the reason it is not; below-min-support groups keep their values but stay
// flagged so disparity can exclude them.
struct MetricTable {
  MetricId metric = MetricId::selection_rate;
  std::vector<std::string> labels;
  std::vector<std::string> groups;
  Eigen::ArrayXXd values;                          // K x G, NaN where undefined
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> status;  // CellStatus
  Eigen::ArrayXd group_sizes;
  std::vector<bool> below_support;

  bool defined(int label, int group) const {
    return status(label, group) == static_cast<int>(CellStatus::defined);
  }
  std::string to_csv() const;  // long form: metric,label,group,value,status
  std::string to_json_text() const;
};

/// Counts predictions against binary targets within each index group.
/// preds must be 0/1 with the same shape as targets.
ConfusionCounts confusion(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& preds,
                          const IntersectionIndex& idx,
                          const std::vector<std::string>& label_names = {});

/// One classification metric over the confusion grid; zero denominators (and
/// f1 with precision + recall = 0) become undefined cells with the reason.
MetricTable classification_metric(const ConfusionCounts& counts, MetricId metric);

/// One regression metric per group for a single label's predictions. r2 uses
/// the within-group mean for its total sum of squares and is undefined for a
/// constant group; it can be negative.
MetricTable regression_group_metric(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred,
                                    const IntersectionIndex& idx, MetricId metric,
                                    const std::string& label_name = "label");

enum class GapMode { difference, ratio };

struct GapVector {
  MetricId metric = MetricId::selection_rate;
  GapMode mode = GapMode::difference;
  std::string label;
  std::vector<std::string> groups;
  int reference_group = -1;
  Eigen::ArrayXd values;  // NaN where undefined
  Eigen::Array<int, Eigen::Dynamic, 1> status;
};

/// Per-group gap against a reference for one label's row of the table.
/// difference: value_g - value_ref; ratio: value_g / value_ref (undefined at
/// value_ref = 0). Without an explicit reference, difference mode compares
/// against the group attaining the row maximum and ratio mode against the
/// largest group by size.
GapVector fairness_gap(const MetricTable& table, int label, GapMode mode,
                       std::optional<int> reference_group = std::nullopt);

struct DisparityResult {
  double value = 0;
  int max_group = -1;
  int min_group = -1;
};

/// max - min of the defined cells in one label's row. Below-min-support
/// groups are excluded unless include_flagged; fewer than two usable cells is
/// an error.
DisparityResult disparity(const MetricTable& table, int label, bool include_flagged = false);

struct CalibrationCell {
  int group = 0;
  int bin = 0;
  double bin_low = 0, bin_high = 0;
  double mean_predicted = 0;
  double positive_rate = 0;
  int count = 0;  // empty bins keep count 0 and carry no rates
};

struct CalibrationTable {
  std::vector<std::string> groups;
  int bins = 10;
  std::vector<CalibrationCell> cells;  // group-major, bin-minor, empty bins included
  std::string to_json_text() const;
};

/// Equal-width probability bins on [0,1]; each bin is [lo, hi) except the
/// last, which closes at 1.
CalibrationTable calibration_by_group(const Eigen::VectorXd& y_true,
                                      const Eigen::VectorXd& probas,
                                      const IntersectionIndex& idx, int bins = 10);

}  // namespace fairaudit

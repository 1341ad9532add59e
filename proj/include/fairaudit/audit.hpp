#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairaudit/dataset.hpp"
#include "fairaudit/learners.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/tensor.hpp"

namespace fairaudit {

struct AuditOptions {
  std::vector<std::string> attrs;  // empty = every protected attribute
  std::vector<MetricId> metrics;   // empty = the standard set for the task
  double holdout_fraction = 0.3;
  std::uint64_t seed = 42;
  LogisticConfig classifier;      // adoption models
  double lasso_lambda = 0.01;     // spending models (row-sparse multitask)
  bool include_protected = false;
  bool include_flagged = false;   // let below-support groups into disparities
  int min_support = 30;
  // Disparities above this value are breaches; unset = never breach.
  std::optional<double> fail_threshold;
  std::optional<MetricId> tensor_metric;  // default: selection_rate / mse by task
  std::optional<WeightMatrix> tensor_weights;
  double correlation_threshold = 0.8;

  std::string to_json_text() const;
};

struct DisparityEntry {
  MetricId metric = MetricId::selection_rate;
  std::string label;
  double value = 0;
  std::string max_group;
  std::string min_group;
  bool breach = false;
};

// Everything one audit run produces. The only nondeterministic field is
// generated_at; erase it to compare runs.
struct AuditReport {
  std::string dataset_fingerprint;  // hex64 of the dataset hash
  std::string config_fingerprint;   // hex64 over the serialized options
  std::uint64_t seed = 42;
  std::string generated_at;  // UTC, RFC 3339
  AuditOptions options;
  MultiLabelModel model;
  std::vector<std::string> group_names;
  std::vector<int> group_sizes;
  std::vector<bool> group_below_support;
  std::vector<MetricTable> tables;          // one per audited metric
  std::vector<DisparityEntry> disparities;  // per (metric, label) with >= 2 usable cells
  FairnessTensor tensor;
  std::vector<AggregateResult> aggregates;  // every scheme
  QualityReport quality;
  std::vector<DisparityEntry> breaches;

  int exit_code() const { return breaches.empty() ? 0 : 2; }
  std::string to_json_text() const;
};

/// Splits off a holdout, trains the per-label model on the rest (logistic
/// one-vs-rest for adoption, row-sparse multitask lasso for spending), then
/// evaluates every audited metric per (label, intersection group) on the
/// holdout, computes disparities and the fairness tensor with all aggregate
/// schemes, and attaches a data quality report over the full dataset.
AuditReport run_audit(const Dataset& ds, const AuditOptions& opts);

/// Writes the per-metric tables, disparities, and tensor as CSV files under
/// dir (created if missing), returning the file names written.
std::vector<std::string> save_csv_bundle(const AuditReport& report, const std::string& dir);

std::string hex64(std::uint64_t v);
std::string utc_timestamp();

}  // namespace fairaudit

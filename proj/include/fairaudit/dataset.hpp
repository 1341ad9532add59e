#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairaudit/common.hpp"
#include "fairaudit/rng.hpp"

namespace fairaudit {

enum class TaskKind { adoption, spending };

const char* task_name(TaskKind t);
TaskKind task_from_name(const std::string& name);

struct ProtectedAttribute {
  std::string name;
  // Level order is load order (declared or lexicographic-observed); the list
  // always contains "unspecified", kept in the last position.
  std::vector<std::string> levels;

  int level_index(const std::string& level) const;
  int unspecified_index() const;
};

inline constexpr const char* kUnspecified = "unspecified";

// Tabular audit input: numeric features, per-label targets (binary adoption
// flags or nonnegative spend amounts), and coded protected attributes.
struct Dataset {
  Eigen::MatrixXd features;         // n x p
  Eigen::MatrixXd targets;          // n x K
  Eigen::MatrixXi protected_codes;  // n x d, codes into attributes[j].levels
  std::vector<ProtectedAttribute> attributes;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  TaskKind task = TaskKind::adoption;

  int rows() const { return static_cast<int>(features.rows()); }
  int feature_count() const { return static_cast<int>(features.cols()); }
  int label_count() const { return static_cast<int>(targets.cols()); }
  int attribute_count() const { return static_cast<int>(attributes.size()); }

  int attribute_column(const std::string& name) const;  // -1 if absent

  /// Throws on any structural invariant violation (shape mismatch, codes out
  /// of range, negative spend, non-binary adoption flag).
  void validate() const;
};

/// Order-insensitive fingerprint of shapes and contents, for provenance.
std::uint64_t dataset_hash(const Dataset& ds);

struct GroupKey {
  std::vector<int> level_codes;  // one code per selected attribute
};

// Cartesian intersection of the selected attributes' observed levels, in
// lexicographic order over each attribute's level order. Only nonempty cells
// become groups; every row belongs to exactly one group.
struct IntersectionIndex {
  std::vector<std::string> attribute_names;
  std::vector<int> attribute_columns;
  std::vector<std::vector<std::string>> attribute_levels;  // full level lists
  std::vector<GroupKey> groups;
  std::vector<std::vector<int>> members;  // row ids per group, ascending
  std::vector<bool> below_support;
  int min_support = 30;

  int group_count() const { return static_cast<int>(groups.size()); }
  std::string group_name(int g) const;  // levels joined with '|'
  /// Dense row -> group id map for n rows.
  std::vector<int> group_of_rows(int n) const;
};

enum class ColumnRole { feature, label, protected_attr, ignore };

struct ColumnSchema {
  TaskKind task = TaskKind::adoption;
  // Every CSV column must appear here with a role.
  std::vector<std::pair<std::string, ColumnRole>> columns;
  // Optional declared level sets for protected columns; order is authoritative
  // and every observed value must be a member.
  std::map<std::string, std::vector<std::string>> declared_levels;

  static ColumnSchema from_json_text(const std::string& text);
  static ColumnSchema from_json_file(const std::string& path);
};

/// Strict CSV load: header row required, '.' decimal, empty protected cells
/// map to "unspecified", empty feature/label cells are errors.
Dataset load_csv(const std::string& path, const ColumnSchema& schema);

/// Writes the dataset back out as CSV (features, labels, attributes), with
/// round-trip float formatting. Column order: features, labels, attributes.
void write_csv(const Dataset& ds, const std::string& path);

/// Schema matching write_csv output, for reloading generated data.
ColumnSchema schema_for(const Dataset& ds);

/// Intersections over the named attributes; an empty list yields one global
/// group named "all" (population-level view).
IntersectionIndex derive_intersections(const Dataset& ds,
                                       const std::vector<std::string>& attrs,
                                       int min_support = 30);

/// Row subset in the given order (indices must be valid and may repeat).
Dataset take_rows(const Dataset& ds, const std::vector<int>& rows);

/// Deterministic split into (train, holdout). Holdout gets round(n * fraction)
/// rows; with stratify_label set, positives and negatives of that label are
/// allocated by largest remainder so each part's positive rate stays within
/// one row of the population rate.
std::pair<Dataset, Dataset> split(const Dataset& ds, double holdout_fraction,
                                  std::uint64_t seed,
                                  std::optional<int> stratify_label = std::nullopt);

struct SynthAttribute {
  std::string name;
  std::vector<std::string> levels;  // without "unspecified"
  std::vector<double> level_probs;  // same length, renormalized internally
  double unspecified_rate = 0.0;
};

struct CorrelatedPair {
  int source = 0;
  int target = 1;
  double r = 0.9;
};

struct FeatureEffect {
  int label = 0;
  int feature = 0;
  double coef = 0.0;
};

// Plants dependence of a feature's mixture mode (proxy) or a label's positive
// rate (label signal) on one attribute level.
struct PlantedDependence {
  int index = 0;  // feature index (proxy) or label index (signal)
  std::string attribute;
  std::string level;
  double strength = 0.0;
};

struct SynthConfig {
  int n = 1000;
  int p = 4;
  int k = 2;
  TaskKind task = TaskKind::adoption;
  std::uint64_t seed = 42;
  std::vector<SynthAttribute> attributes;
  std::vector<double> label_positive_rates;  // adoption task, length k
  std::vector<double> spend_mean_log;        // spending task, length k
  std::vector<double> spend_sd_log;
  double bimodal_low = -1.0;
  double bimodal_high = 1.0;
  double bimodal_sd = 0.15;
  double bimodal_mix = 0.5;
  std::vector<CorrelatedPair> correlated_pairs;
  std::optional<PlantedDependence> proxy;
  std::optional<PlantedDependence> label_signal;
  std::vector<FeatureEffect> feature_effects;

  void validate() const;
  static SynthConfig from_json_text(const std::string& text);
  static SynthConfig from_json_file(const std::string& path);
  std::string to_json_text() const;
};

// Draw order (one child stream per block, so blocks never interleave):
//   1. attributes, one stream per attribute column;
//   2. features, one stream per feature column (correlated targets use the
//      source draw plus an independent noise stream; the proxy feature's mode
//      probability shifts by strength * (indicator - 1/2));
//   3. labels, one stream per label. Adoption flags are Bernoulli at the
//      configured rate, shifted by feature effects through a logistic link
//      and by the planted label signal; spend amounts are lognormal gated on
//      a Bernoulli adoption draw.
Dataset generate_synthetic(const SynthConfig& cfg);

struct QualityOptions {
  double correlation_threshold = 0.8;
  int min_support = 30;
  std::vector<std::string> attrs;  // empty = all protected attributes
};

struct SpendSummary {
  double mean = 0, sd = 0, min = 0, max = 0, median = 0, zero_fraction = 0;
};

struct QualityReport {
  std::vector<std::pair<std::string, double>> unspecified_rates;
  std::vector<std::pair<std::string, double>> label_positive_rates;  // adoption
  std::vector<std::pair<std::string, SpendSummary>> spend_summaries;  // spending
  Eigen::MatrixXd feature_correlation;  // p x p Pearson
  struct CorrelatedFinding {
    int i, j;
    double r;
  };
  std::vector<CorrelatedFinding> high_correlation_pairs;  // |r| >= threshold, i < j
  std::vector<std::string> group_names;
  std::vector<int> group_sizes;
  std::vector<bool> group_below_support;
  double correlation_threshold = 0.8;
  int min_support = 30;

  std::string to_json_text() const;
};

QualityReport data_quality_report(const Dataset& ds, const QualityOptions& opts = {});

namespace detail {
/// Largest-remainder apportionment of round(total * fraction) across strata.
/// Ties in remainder go to the larger stratum, then to the stratum whose
/// smallest member row comes first, so the result is invariant to relabeling
/// the strata.
std::vector<int> stratified_allocation(const std::vector<std::vector<int>>& strata,
                                       double fraction);
}  // namespace detail

}  // namespace fairaudit

#include "fairaudit/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace fairaudit {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

GValueGrid metric_by_group_and_label(const Eigen::MatrixXd& targets,
                                     const Eigen::MatrixXd& preds,
                                     const IntersectionIndex& idx, MetricId metric,
                                     const std::vector<std::string>& label_names) {
  GValueGrid grid;
  grid.metric = metric;
  const int k = static_cast<int>(targets.cols());
  const int l = idx.group_count();
  grid.values.resize(l, k);
  grid.status.resize(l, k);

  if (is_classification_metric(metric)) {
    ConfusionCounts counts = confusion(targets, preds, idx, label_names);
    MetricTable table = classification_metric(counts, metric);  // K x G
    grid.label_ids = table.labels;
    grid.group_keys = table.groups;
    for (int gi = 0; gi < l; ++gi)
      for (int ki = 0; ki < k; ++ki) {
        grid.values(gi, ki) = table.values(ki, gi);
        grid.status(gi, ki) = table.status(ki, gi);
      }
  } else {
    require(targets.cols() == preds.cols() && targets.rows() == preds.rows(),
            "targets and predictions shapes differ");
    for (int gi = 0; gi < l; ++gi) grid.group_keys.push_back(idx.group_name(gi));
    for (int ki = 0; ki < k; ++ki) {
      std::string name = ki < static_cast<int>(label_names.size())
                             ? label_names[ki]
                             : "label_" + std::to_string(ki + 1);
      MetricTable table =
          regression_group_metric(targets.col(ki), preds.col(ki), idx, metric, name);
      grid.label_ids.push_back(name);
      for (int gi = 0; gi < l; ++gi) {
        grid.values(gi, ki) = table.values(0, gi);
        grid.status(gi, ki) = table.status(0, gi);
      }
    }
  }
  return grid;
}

void WeightMatrix::validate() const {
  require(values.rows() >= 1 && values.cols() >= 1, "weight matrix is empty");
  require((values.array() >= 0).all(), "weights must be nonnegative");
  if (normalized) {
    for (Eigen::Index l = 0; l < values.rows(); ++l)
      require(std::abs(values.row(l).sum() - 1.0) <= 1e-9,
              "weight row " + std::to_string(l) + " does not sum to 1");
  }
}

WeightMatrix WeightMatrix::from_json_text(const std::string& text) {
  json j = json::parse(text);
  WeightMatrix w;
  const auto& rows = j.at("values");
  require(rows.is_array() && !rows.empty(), "weight matrix needs a values array");
  const int l = static_cast<int>(rows.size());
  const int k = static_cast<int>(rows[0].size());
  w.values.resize(l, k);
  for (int li = 0; li < l; ++li) {
    require(static_cast<int>(rows[li].size()) == k, "ragged weight matrix");
    for (int ki = 0; ki < k; ++ki) w.values(li, ki) = rows[li][ki].get<double>();
  }
  w.normalized = j.value("normalized", false);
  w.validate();
  return w;
}

std::string WeightMatrix::to_json_text() const {
  json j;
  json rows = json::array();
  for (Eigen::Index l = 0; l < values.rows(); ++l) {
    json row = json::array();
    for (Eigen::Index k = 0; k < values.cols(); ++k) row.push_back(values(l, k));
    rows.push_back(row);
  }
  j["values"] = rows;
  j["normalized"] = normalized;
  return j.dump(2);
}

WeightMatrix borda_weights(const std::vector<std::string>& group_ranking,
                           const std::vector<std::string>& label_ranking,
                           const std::vector<std::string>& group_keys,
                           const std::vector<std::string>& label_ids, bool normalize) {
  auto scores = [](const std::vector<std::string>& ranking,
                   const std::vector<std::string>& ids, const char* what) {
    require(ranking.size() == ids.size(),
            std::string(what) + " ranking length differs from the id list");
    std::vector<double> s(ids.size(), -1);
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      auto it = std::find(ids.begin(), ids.end(), ranking[r]);
      require(it != ids.end(), std::string(what) + " ranking names unknown id '" + ranking[r] + "'");
      std::size_t pos = static_cast<std::size_t>(it - ids.begin());
      require(s[pos] < 0, std::string(what) + " ranking repeats '" + ranking[r] + "'");
      s[pos] = static_cast<double>(ranking.size() - r);
    }
    return s;
  };
  std::vector<double> gs = scores(group_ranking, group_keys, "group");
  std::vector<double> ls = scores(label_ranking, label_ids, "label");

  WeightMatrix w;
  w.values.resize(static_cast<Eigen::Index>(gs.size()), static_cast<Eigen::Index>(ls.size()));
  for (std::size_t l = 0; l < gs.size(); ++l)
    for (std::size_t k = 0; k < ls.size(); ++k)
      w.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = gs[l] * ls[k];
  if (normalize) {
    for (Eigen::Index l = 0; l < w.values.rows(); ++l) w.values.row(l) /= w.values.row(l).sum();
    w.normalized = true;
  }
  w.validate();
  return w;
}

FairnessTensor build_tensor(const GValueGrid& grid, UndefinedPolicy policy) {
  const int l = grid.group_count(), k = grid.label_count();
  require(l >= 1 && k >= 1, "grid is empty");

  if (policy == UndefinedPolicy::strict) {
    std::string missing;
    for (int li = 0; li < l; ++li)
      for (int ki = 0; ki < k; ++ki)
        if (!grid.defined(li, ki))
          missing += " (" + grid.group_keys[li] + ", " + grid.label_ids[ki] + ")";
    if (!missing.empty())
      throw std::runtime_error("undefined metric cells:" + missing +
                               "; use the masked policy to skip them");
  }

  FairnessTensor t;
  t.metric = grid.metric;
  t.group_keys = grid.group_keys;
  t.label_ids = grid.label_ids;
  t.gdefined.resize(l, k);
  t.values.assign(l, Eigen::MatrixXd(k, k));
  for (int li = 0; li < l; ++li) {
    for (int ki = 0; ki < k; ++ki) t.gdefined(li, ki) = grid.defined(li, ki) ? 1 : 0;
    for (int k1 = 0; k1 < k; ++k1)
      for (int k2 = 0; k2 < k; ++k2)
        t.values[li](k1, k2) = grid.defined(li, k1) && grid.defined(li, k2)
                                   ? grid.values(li, k1) - grid.values(li, k2)
                                   : kNaN;
  }
  return t;
}

FairnessTensor apply_weights(const FairnessTensor& t, const WeightMatrix& w) {
  w.validate();
  require(w.values.rows() == t.group_count() && w.values.cols() == t.label_count(),
          "weight matrix shape differs from the tensor axes");
  FairnessTensor out = t;
  out.model_id = t.model_id;
  const int k = t.label_count();
  for (int l = 0; l < t.group_count(); ++l)
    for (int k1 = 0; k1 < k; ++k1)
      for (int k2 = 0; k2 < k; ++k2) {
        double v = t.values[l](k1, k2);
        out.values[l](k1, k2) =
            std::isnan(v) ? kNaN : w.values(l, k1) * v - w.values(l, k2) * v;
      }
  return out;
}

PairwiseGroupVector pairwise_group_vector(const GValueGrid& grid, int label,
                                          int reference_group) {
  const int l = grid.group_count();
  require(label >= 0 && label < grid.label_count(), "label out of range");
  require(reference_group >= 0 && reference_group < l, "reference group out of range");
  require(l >= 2, "need at least two groups");

  PairwiseGroupVector v;
  v.metric = grid.metric;
  v.label = label;
  v.reference_group = reference_group;
  require(grid.defined(reference_group, label),
          "reference cell (" + grid.group_keys[reference_group] + ", " +
              grid.label_ids[label] + ") is undefined");
  v.values.resize(l - 1);
  int out = 0;
  for (int li = 0; li < l; ++li) {
    if (li == reference_group) continue;
    require(grid.defined(li, label), "cell (" + grid.group_keys[li] + ", " +
                                         grid.label_ids[label] + ") is undefined");
    v.other_groups.push_back(grid.group_keys[li]);
    v.values[out++] = grid.values(reference_group, label) - grid.values(li, label);
  }
  return v;
}

const char* aggregate_scheme_name(AggregateScheme s) {
  switch (s) {
    case AggregateScheme::weighted_mean: return "weighted_mean";
    case AggregateScheme::median: return "median";
    case AggregateScheme::harmonic_mean_abs: return "harmonic_mean_abs";
    case AggregateScheme::max_abs: return "max_abs";
  }
  return "unknown";
}

AggregateScheme aggregate_scheme_from_name(const std::string& name) {
  if (name == "weighted_mean") return AggregateScheme::weighted_mean;
  if (name == "median") return AggregateScheme::median;
  if (name == "harmonic_mean_abs") return AggregateScheme::harmonic_mean_abs;
  if (name == "max_abs") return AggregateScheme::max_abs;
  throw std::invalid_argument("unknown aggregation scheme '" + name + "'");
}

AggregateResult aggregate(const FairnessTensor& t, AggregateScheme scheme,
                          const std::vector<Eigen::MatrixXd>* cell_weights) {
  const int l = t.group_count(), k = t.label_count();
  require(l >= 1 && k >= 2, "aggregation needs at least two labels");
  if (cell_weights) {
    require(static_cast<int>(cell_weights->size()) == l, "cell weights group axis differs");
    for (const auto& m : *cell_weights) {
      require(m.rows() == k && m.cols() == k, "cell weights label axes differ");
      require((m.array() >= 0).all(), "cell weights must be nonnegative");
    }
  }

  struct Entry {
    double value, weight;
    int l, k1, k2;
  };
  std::vector<Entry> used;
  const int total = l * k * (k - 1) / 2;
  for (int li = 0; li < l; ++li)
    for (int k1 = 0; k1 < k; ++k1)
      for (int k2 = k1 + 1; k2 < k; ++k2) {
        if (!t.cell_defined(li, k1, k2)) continue;
        double w = cell_weights ? (*cell_weights)[li](k1, k2) : 1.0;
        if (w == 0) continue;
        used.push_back({t.values[li](k1, k2), w, li, k1, k2});
      }
  require(!used.empty(), "no defined cells to aggregate");

  AggregateResult res;
  res.scheme = scheme;
  res.cells_used = static_cast<int>(used.size());
  res.coverage = total > 0 ? static_cast<double>(used.size()) / total : 1.0;
  for (const auto& e : used) {
    if (std::abs(e.value) >= std::abs(res.peak_value) || res.peak_cell[0] < 0) {
      res.peak_value = e.value;
      res.peak_cell = {e.l, e.k1, e.k2};
    }
  }

  double wsum = 0;
  for (const auto& e : used) wsum += e.weight;
  switch (scheme) {
    case AggregateScheme::weighted_mean: {
      double acc = 0;
      for (const auto& e : used) acc += e.weight * std::abs(e.value);
      res.value = acc / wsum;
      break;
    }
    case AggregateScheme::harmonic_mean_abs: {
      double acc = 0;
      for (const auto& e : used) acc += e.weight / (std::abs(e.value) + 1e-9);
      res.value = wsum / acc;
      break;
    }
    case AggregateScheme::max_abs: {
      double best = -1;
      for (const auto& e : used)
        if (std::abs(e.value) > best) {
          best = std::abs(e.value);
          res.value = best;
        }
      break;
    }
    case AggregateScheme::median: {
      // Weighted median of signed values: the value where the cumulative
      // weight reaches half, averaging with the next when it lands exactly.
      std::sort(used.begin(), used.end(),
                [](const Entry& a, const Entry& b) { return a.value < b.value; });
      double half = 0.5 * wsum, cum = 0;
      for (std::size_t i = 0; i < used.size(); ++i) {
        cum += used[i].weight;
        if (cum > half) {
          res.value = used[i].value;
          break;
        }
        if (cum == half) {
          res.value = i + 1 < used.size() ? 0.5 * (used[i].value + used[i + 1].value)
                                          : used[i].value;
          break;
        }
      }
      break;
    }
  }
  return res;
}

ModelComparison compare_models(const FairnessTensor& a, const FairnessTensor& b,
                               AggregateScheme scheme) {
  require(a.metric == b.metric, "tensors use different metrics");
  require(a.group_keys == b.group_keys, "tensors use different group axes");
  require(a.label_ids == b.label_ids, "tensors use different label axes");

  ModelComparison cmp;
  cmp.delta = a;
  cmp.delta.model_id = a.model_id + " -> " + b.model_id;
  const int k = a.label_count();
  for (int l = 0; l < a.group_count(); ++l) {
    for (int ki = 0; ki < k; ++ki)
      cmp.delta.gdefined(l, ki) = a.gdefined(l, ki) && b.gdefined(l, ki) ? 1 : 0;
    for (int k1 = 0; k1 < k; ++k1)
      for (int k2 = 0; k2 < k; ++k2)
        cmp.delta.values[l](k1, k2) =
            a.cell_defined(l, k1, k2) && b.cell_defined(l, k1, k2)
                ? b.values[l](k1, k2) - a.values[l](k1, k2)
                : kNaN;
  }
  cmp.aggregate_a = aggregate(a, scheme);
  cmp.aggregate_b = aggregate(b, scheme);
  cmp.scalar_delta = cmp.aggregate_b.value - cmp.aggregate_a.value;
  return cmp;
}

std::string FairnessTensor::to_json_text() const {
  json j;
  j["metric"] = metric_name(metric);
  j["groups"] = group_keys;
  j["labels"] = label_ids;
  json slices = json::array();
  for (const auto& m : values) {
    json slice = json::array();
    for (Eigen::Index k1 = 0; k1 < m.rows(); ++k1) {
      json row = json::array();
      for (Eigen::Index k2 = 0; k2 < m.cols(); ++k2) {
        double v = m(k1, k2);
        if (std::isnan(v))
          row.push_back(nullptr);
        else
          row.push_back(v);
      }
      slice.push_back(row);
    }
    slices.push_back(slice);
  }
  j["values"] = slices;
  j["provenance"] = {{"dataset_hash", dataset_hash}, {"model_id", model_id}};
  return j.dump(2);
}

std::string FairnessTensor::to_csv() const {
  std::string out = "group,label_a,label_b,value\n";
  char buf[40];
  for (int l = 0; l < group_count(); ++l)
    for (int k1 = 0; k1 < label_count(); ++k1)
      for (int k2 = 0; k2 < label_count(); ++k2) {
        out += group_keys[l] + ',' + label_ids[k1] + ',' + label_ids[k2] + ',';
        double v = values[l](k1, k2);
        if (!std::isnan(v)) {
          auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
          (void)ec;
          out.append(buf, ptr);
        }
        out += '\n';
      }
  return out;
}

}  // namespace fairaudit

#include "fairaudit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace fairaudit {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* status_name(int s) {
  switch (static_cast<CellStatus>(s)) {
    case CellStatus::defined: return "defined";
    case CellStatus::zero_denominator: return "zero_denominator";
    case CellStatus::empty_group: return "empty_group";
  }
  return "unknown";
}
}  // namespace

const char* metric_name(MetricId m) {
  switch (m) {
    case MetricId::selection_rate: return "selection_rate";
    case MetricId::accuracy: return "accuracy";
    case MetricId::precision: return "precision";
    case MetricId::ppv: return "ppv";
    case MetricId::recall_tpr: return "recall_tpr";
    case MetricId::fpr: return "fpr";
    case MetricId::fnr: return "fnr";
    case MetricId::f1: return "f1";
    case MetricId::overall_error: return "overall_error";
    case MetricId::npv: return "npv";
    case MetricId::mse: return "mse";
    case MetricId::mae: return "mae";
    case MetricId::rmse: return "rmse";
    case MetricId::r2: return "r2";
    case MetricId::explained_variance: return "explained_variance";
  }
  return "unknown";
}

MetricId metric_from_name(const std::string& name) {
  static const std::pair<const char*, MetricId> table[] = {
      {"selection_rate", MetricId::selection_rate},
      {"accuracy", MetricId::accuracy},
      {"precision", MetricId::precision},
      {"ppv", MetricId::ppv},
      {"recall_tpr", MetricId::recall_tpr},
      {"recall", MetricId::recall_tpr},
      {"tpr", MetricId::recall_tpr},
      {"fpr", MetricId::fpr},
      {"fnr", MetricId::fnr},
      {"f1", MetricId::f1},
      {"overall_error", MetricId::overall_error},
      {"npv", MetricId::npv},
      {"mse", MetricId::mse},
      {"mae", MetricId::mae},
      {"rmse", MetricId::rmse},
      {"r2", MetricId::r2},
      {"explained_variance", MetricId::explained_variance},
  };
  for (const auto& [n, id] : table)
    if (name == n) return id;
  throw std::invalid_argument("unknown metric '" + name + "'");
}

bool is_classification_metric(MetricId m) {
  switch (m) {
    case MetricId::mse:
    case MetricId::mae:
    case MetricId::rmse:
    case MetricId::r2:
    case MetricId::explained_variance: return false;
    default: return true;
  }
}

std::vector<MetricId> standard_classification_metrics() {
  return {MetricId::selection_rate, MetricId::accuracy, MetricId::precision,
          MetricId::fpr,            MetricId::recall_tpr, MetricId::fnr,
          MetricId::f1};
}

std::vector<MetricId> standard_regression_metrics() {
  return {MetricId::mse, MetricId::mae, MetricId::rmse, MetricId::r2,
          MetricId::explained_variance};
}

ConfusionCounts confusion(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& preds,
                          const IntersectionIndex& idx,
                          const std::vector<std::string>& label_names) {
  require(targets.rows() == preds.rows() && targets.cols() == preds.cols(),
          "targets and predictions shapes differ");
  require((targets.array() == 0.0 || targets.array() == 1.0).all(), "targets must be 0/1");
  require((preds.array() == 0.0 || preds.array() == 1.0).all(), "predictions must be 0/1");
  const int k = static_cast<int>(targets.cols());
  const int g = idx.group_count();
  require(g >= 1, "intersection index has no groups");

  ConfusionCounts c;
  c.tp.setZero(k, g);
  c.fp.setZero(k, g);
  c.tn.setZero(k, g);
  c.fn.setZero(k, g);
  c.group_sizes.resize(g);
  c.below_support = idx.below_support;
  for (int gi = 0; gi < g; ++gi) {
    c.group_names.push_back(idx.group_name(gi));
    c.group_sizes[gi] = static_cast<double>(idx.members[gi].size());
    for (int r : idx.members[gi]) {
      require(r >= 0 && r < targets.rows(), "index row outside the prediction matrix");
      for (int ki = 0; ki < k; ++ki) {
        bool y = targets(r, ki) == 1.0;
        bool yhat = preds(r, ki) == 1.0;
        if (y && yhat)
          c.tp(ki, gi) += 1;
        else if (!y && yhat)
          c.fp(ki, gi) += 1;
        else if (!y && !yhat)
          c.tn(ki, gi) += 1;
        else
          c.fn(ki, gi) += 1;
      }
    }
  }
  for (int ki = 0; ki < k; ++ki)
    c.label_names.push_back(ki < static_cast<int>(label_names.size())
                                ? label_names[ki]
                                : "label_" + std::to_string(ki + 1));
  return c;
}

namespace {

struct Cell {
  double value = kNaN;
  CellStatus status = CellStatus::zero_denominator;
};

Cell ratio(double num, double den) {
  if (den == 0) return {kNaN, CellStatus::zero_denominator};
  return {num / den, CellStatus::defined};
}

Cell classification_cell(const ConfusionCounts& c, MetricId m, int k, int g) {
  const double tp = c.tp(k, g), fp = c.fp(k, g), tn = c.tn(k, g), fn = c.fn(k, g);
  const double n = tp + fp + tn + fn;
  if (n == 0) return {kNaN, CellStatus::empty_group};
  switch (m) {
    case MetricId::selection_rate: return ratio(tp + fp, n);
    case MetricId::accuracy: return ratio(tp + tn, n);
    case MetricId::overall_error: return ratio(fp + fn, n);
    case MetricId::precision:
    case MetricId::ppv: return ratio(tp, tp + fp);
    case MetricId::recall_tpr: return ratio(tp, tp + fn);
    case MetricId::fpr: return ratio(fp, fp + tn);
    case MetricId::fnr: return ratio(fn, tp + fn);
    case MetricId::npv: return ratio(tn, tn + fn);
    case MetricId::f1: {
      Cell p = ratio(tp, tp + fp), r = ratio(tp, tp + fn);
      if (p.status != CellStatus::defined || r.status != CellStatus::defined)
        return {kNaN, CellStatus::zero_denominator};
      if (p.value + r.value == 0) return {kNaN, CellStatus::zero_denominator};
      return {2 * p.value * r.value / (p.value + r.value), CellStatus::defined};
    }
    default: throw std::invalid_argument("not a classification metric: " + std::string(metric_name(m)));
  }
}

}  // namespace

MetricTable classification_metric(const ConfusionCounts& counts, MetricId metric) {
  require(is_classification_metric(metric),
          std::string("metric '") + metric_name(metric) + "' needs regression inputs");
  MetricTable t;
  t.metric = metric;
  t.labels = counts.label_names;
  t.groups = counts.group_names;
  t.group_sizes = counts.group_sizes;
  t.below_support = counts.below_support;
  const int k = counts.label_count(), g = counts.group_count();
  t.values.resize(k, g);
  t.status.resize(k, g);
  for (int ki = 0; ki < k; ++ki)
    for (int gi = 0; gi < g; ++gi) {
      Cell cell = classification_cell(counts, metric, ki, gi);
      t.values(ki, gi) = cell.value;
      t.status(ki, gi) = static_cast<int>(cell.status);
    }
  return t;
}

MetricTable regression_group_metric(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred,
                                    const IntersectionIndex& idx, MetricId metric,
                                    const std::string& label_name) {
  require(!is_classification_metric(metric),
          std::string("metric '") + metric_name(metric) + "' needs classification inputs");
  require(y_true.size() == y_pred.size(), "prediction length differs from targets");
  const int g = idx.group_count();
  require(g >= 1, "intersection index has no groups");

  MetricTable t;
  t.metric = metric;
  t.labels = {label_name};
  t.group_sizes.resize(g);
  t.below_support = idx.below_support;
  t.values.resize(1, g);
  t.status.resize(1, g);
  for (int gi = 0; gi < g; ++gi) {
    t.groups.push_back(idx.group_name(gi));
    const auto& rows = idx.members[gi];
    t.group_sizes[gi] = static_cast<double>(rows.size());
    if (rows.empty()) {
      t.values(0, gi) = kNaN;
      t.status(0, gi) = static_cast<int>(CellStatus::empty_group);
      continue;
    }
    const double m = static_cast<double>(rows.size());
    double se = 0, ae = 0, ysum = 0;
    for (int r : rows) {
      require(r >= 0 && r < y_true.size(), "index row outside the target vector");
      double e = y_true[r] - y_pred[r];
      se += e * e;
      ae += std::abs(e);
      ysum += y_true[r];
    }
    const double mse = se / m, mae = ae / m;
    Cell cell;
    switch (metric) {
      case MetricId::mse: cell = {mse, CellStatus::defined}; break;
      case MetricId::mae: cell = {mae, CellStatus::defined}; break;
      case MetricId::rmse: cell = {std::sqrt(mse), CellStatus::defined}; break;
      case MetricId::r2: {
        double ymean = ysum / m, tss = 0;
        for (int r : rows) tss += (y_true[r] - ymean) * (y_true[r] - ymean);
        cell = tss == 0 ? Cell{kNaN, CellStatus::zero_denominator}
                        : Cell{1.0 - se / tss, CellStatus::defined};
        break;
      }
      case MetricId::explained_variance: {
        double ymean = ysum / m, tss = 0;
        double rmean = 0;
        for (int r : rows) rmean += (y_true[r] - y_pred[r]);
        rmean /= m;
        double rvar = 0;
        for (int r : rows) {
          tss += (y_true[r] - ymean) * (y_true[r] - ymean);
          double d = (y_true[r] - y_pred[r]) - rmean;
          rvar += d * d;
        }
        cell = tss == 0 ? Cell{kNaN, CellStatus::zero_denominator}
                        : Cell{1.0 - rvar / tss, CellStatus::defined};
        break;
      }
      default: break;
    }
    t.values(0, gi) = cell.value;
    t.status(0, gi) = static_cast<int>(cell.status);
  }
  return t;
}

GapVector fairness_gap(const MetricTable& table, int label, GapMode mode,
                       std::optional<int> reference_group) {
  const int g = static_cast<int>(table.groups.size());
  require(g >= 1, "table has no groups");
  require(label >= 0 && label < static_cast<int>(table.labels.size()), "label out of range");
  GapVector gap;
  gap.metric = table.metric;
  gap.mode = mode;
  gap.label = table.labels[label];
  gap.groups = table.groups;
  gap.values.resize(g);
  gap.status.resize(g);

  int ref = -1;
  if (reference_group) {
    require(*reference_group >= 0 && *reference_group < g, "reference group out of range");
    ref = *reference_group;
  } else if (mode == GapMode::difference) {
    // Default reference: the group attaining the row maximum.
    double best = -std::numeric_limits<double>::infinity();
    for (int gi = 0; gi < g; ++gi)
      if (table.defined(label, gi) && table.values(label, gi) > best) {
        best = table.values(label, gi);
        ref = gi;
      }
    require(ref >= 0, "no defined cells to take a reference from");
  } else {
    // Default reference for ratios: the largest group by size.
    double best = -1;
    for (int gi = 0; gi < g; ++gi)
      if (table.group_sizes[gi] > best) {
        best = table.group_sizes[gi];
        ref = gi;
      }
  }
  gap.reference_group = ref;

  const bool ref_defined = table.defined(label, ref);
  const double ref_value = ref_defined ? table.values(label, ref) : kNaN;
  for (int gi = 0; gi < g; ++gi) {
    if (!table.defined(label, gi) || !ref_defined) {
      gap.values[gi] = kNaN;
      gap.status[gi] = static_cast<int>(CellStatus::zero_denominator);
      continue;
    }
    if (mode == GapMode::difference) {
      gap.values[gi] = table.values(label, gi) - ref_value;
      gap.status[gi] = static_cast<int>(CellStatus::defined);
    } else if (ref_value == 0) {
      gap.values[gi] = kNaN;
      gap.status[gi] = static_cast<int>(CellStatus::zero_denominator);
    } else {
      gap.values[gi] = table.values(label, gi) / ref_value;
      gap.status[gi] = static_cast<int>(CellStatus::defined);
    }
  }
  return gap;
}

DisparityResult disparity(const MetricTable& table, int label, bool include_flagged) {
  require(label >= 0 && label < static_cast<int>(table.labels.size()), "label out of range");
  DisparityResult r;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  int used = 0;
  for (int gi = 0; gi < static_cast<int>(table.groups.size()); ++gi) {
    if (!table.defined(label, gi)) continue;
    if (!include_flagged && table.below_support[gi]) continue;
    ++used;
    double v = table.values(label, gi);
    if (v > hi) {
      hi = v;
      r.max_group = gi;
    }
    if (v < lo) {
      lo = v;
      r.min_group = gi;
    }
  }
  require(used >= 2, "disparity needs at least two usable groups for label '" +
                         table.labels[label] + "' of " + metric_name(table.metric));
  r.value = hi - lo;
  return r;
}

CalibrationTable calibration_by_group(const Eigen::VectorXd& y_true,
                                      const Eigen::VectorXd& probas,
                                      const IntersectionIndex& idx, int bins) {
  require(bins >= 1, "need at least one bin");
  require(y_true.size() == probas.size(), "probability length differs from targets");
  require((y_true.array() == 0.0 || y_true.array() == 1.0).all(), "targets must be 0/1");
  require((probas.array() >= 0.0 && probas.array() <= 1.0).all(),
          "probabilities must lie in [0,1]");

  CalibrationTable t;
  t.bins = bins;
  const double width = 1.0 / bins;
  for (int g = 0; g < idx.group_count(); ++g) {
    t.groups.push_back(idx.group_name(g));
    std::vector<double> sum_p(bins, 0), sum_y(bins, 0);
    std::vector<int> count(bins, 0);
    for (int r : idx.members[g]) {
      require(r >= 0 && r < probas.size(), "index row outside the probability vector");
      int b = std::min(static_cast<int>(probas[r] / width), bins - 1);  // last bin closed
      sum_p[b] += probas[r];
      sum_y[b] += y_true[r];
      count[b] += 1;
    }
    for (int b = 0; b < bins; ++b) {
      CalibrationCell cell;
      cell.group = g;
      cell.bin = b;
      cell.bin_low = b * width;
      cell.bin_high = b == bins - 1 ? 1.0 : (b + 1) * width;
      cell.count = count[b];
      if (count[b] > 0) {
        cell.mean_predicted = sum_p[b] / count[b];
        cell.positive_rate = sum_y[b] / count[b];
      }
      t.cells.push_back(cell);
    }
  }
  return t;
}

std::string MetricTable::to_csv() const {
  std::string out = "metric,label,group,value,status\n";
  for (int k = 0; k < static_cast<int>(labels.size()); ++k)
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
      out += metric_name(metric);
      out += ',';
      out += labels[k];
      out += ',';
      out += groups[g];
      out += ',';
      if (defined(k, g)) {
        char buf[40];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values(k, g));
        (void)ec;
        out.append(buf, ptr);
      }
      out += ',';
      out += status_name(status(k, g));
      out += '\n';
    }
  return out;
}

std::string MetricTable::to_json_text() const {
  json j;
  j["metric"] = metric_name(metric);
  j["labels"] = labels;
  j["groups"] = groups;
  json rows = json::array();
  json stat = json::array();
  for (int k = 0; k < static_cast<int>(labels.size()); ++k) {
    json vrow = json::array(), srow = json::array();
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
      if (defined(k, g))
        vrow.push_back(values(k, g));
      else
        vrow.push_back(nullptr);
      srow.push_back(status_name(status(k, g)));
    }
    rows.push_back(vrow);
    stat.push_back(srow);
  }
  j["values"] = rows;
  j["status"] = stat;
  json sizes = json::array();
  for (Eigen::Index g = 0; g < group_sizes.size(); ++g) sizes.push_back(group_sizes[g]);
  j["group_sizes"] = sizes;
  j["below_min_support"] = below_support;
  return j.dump(2);
}

std::string CalibrationTable::to_json_text() const {
  json j;
  j["groups"] = groups;
  j["bins"] = bins;
  json cells_json = json::array();
  for (const auto& c : cells) {
    json cj;
    cj["group"] = groups[c.group];
    cj["bin"] = c.bin;
    cj["low"] = c.bin_low;
    cj["high"] = c.bin_high;
    cj["count"] = c.count;
    if (c.count > 0) {
      cj["mean_predicted"] = c.mean_predicted;
      cj["positive_rate"] = c.positive_rate;
    }
    cells_json.push_back(cj);
  }
  j["cells"] = cells_json;
  return j.dump(2);
}

}  // namespace fairaudit

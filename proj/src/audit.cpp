#include "fairaudit/audit.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "fairaudit/common.hpp"

namespace fairaudit {

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string AuditOptions::to_json_text() const {
  nlohmann::json j;
  j["attrs"] = attrs;
  nlohmann::json ms = nlohmann::json::array();
  for (MetricId m : metrics) ms.push_back(metric_name(m));
  j["metrics"] = ms;
  j["holdout_fraction"] = holdout_fraction;
  j["seed"] = seed;
  j["classifier"] = {{"max_iter", classifier.max_iter},
                     {"tol", classifier.tol},
                     {"l2", classifier.l2}};
  j["lasso_lambda"] = lasso_lambda;
  j["include_protected"] = include_protected;
  j["include_flagged"] = include_flagged;
  j["min_support"] = min_support;
  if (fail_threshold)
    j["fail_threshold"] = *fail_threshold;
  else
    j["fail_threshold"] = nullptr;
  j["tensor_metric"] = tensor_metric ? nlohmann::json(metric_name(*tensor_metric))
                                     : nlohmann::json(nullptr);
  if (tensor_weights)
    j["tensor_weights"] = nlohmann::json::parse(tensor_weights->to_json_text());
  else
    j["tensor_weights"] = nullptr;
  j["correlation_threshold"] = correlation_threshold;
  return j.dump(2);
}

namespace {

// K x G regression table assembled label by label.
MetricTable regression_table(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& preds,
                             const IntersectionIndex& idx, MetricId metric,
                             const std::vector<std::string>& label_names) {
  const int k = static_cast<int>(targets.cols());
  MetricTable out;
  for (int l = 0; l < k; ++l) {
    MetricTable row = regression_group_metric(targets.col(l), preds.col(l), idx, metric,
                                              label_names[l]);
    if (l == 0) {
      out = row;
      out.labels.clear();
      out.values.resize(k, row.values.cols());
      out.status.resize(k, row.status.cols());
    }
    out.labels.push_back(label_names[l]);
    out.values.row(l) = row.values.row(0);
    out.status.row(l) = row.status.row(0);
  }
  return out;
}

MultiLabelModel fit_spending_model(const Dataset& train, const AuditOptions& opts) {
  MultiLabelModel model;
  model.task = TaskKind::spending;
  model.include_protected = opts.include_protected;
  model.label_names = train.label_names;
  model.design_names = train.feature_names;
  if (opts.include_protected) {
    for (const auto& a : train.attributes) model.encoded_attributes.push_back(a.name);
  }
  Eigen::MatrixXd X = train.features;
  if (!model.encoded_attributes.empty()) {
    DesignBlock block = one_hot(train, model.encoded_attributes);
    Eigen::MatrixXd full(X.rows(), X.cols() + block.columns.cols());
    full << X, block.columns;
    X = std::move(full);
    for (const auto& n : block.names) model.design_names.push_back(n);
  }
  model.fits = fit_multitask_lasso(X, train.targets, opts.lasso_lambda);
  return model;
}

nlohmann::json disparity_json(const DisparityEntry& d) {
  return {{"metric", metric_name(d.metric)}, {"label", d.label},    {"value", d.value},
          {"max_group", d.max_group},        {"min_group", d.min_group},
          {"breach", d.breach}};
}

}  // namespace

AuditReport run_audit(const Dataset& ds, const AuditOptions& opts) {
  ds.validate();
  require(opts.holdout_fraction > 0 && opts.holdout_fraction < 1,
          "holdout_fraction must be in (0, 1)");
  require(opts.min_support >= 1, "min_support must be positive");

  AuditReport report;
  report.options = opts;
  report.seed = opts.seed;
  report.dataset_fingerprint = hex64(dataset_hash(ds));
  report.config_fingerprint = hex64(fnv1a64(opts.to_json_text()));
  report.generated_at = utc_timestamp();

  auto [train, holdout] = split(ds, opts.holdout_fraction, opts.seed);

  Eigen::MatrixXd preds;
  if (ds.task == TaskKind::adoption) {
    report.model = fit_multilabel(train, opts.classifier, opts.include_protected);
    preds = (predict_proba_all(report.model, holdout).array() >= 0.5).cast<double>();
  } else {
    report.model = fit_spending_model(train, opts);
    Eigen::MatrixXd design = model_design(report.model, holdout);
    preds.resize(holdout.rows(), holdout.label_count());
    for (int l = 0; l < holdout.label_count(); ++l)
      preds.col(l) = predict_linear(report.model.fits[l], design);
  }

  std::vector<std::string> attrs = opts.attrs;
  if (attrs.empty())
    for (const ProtectedAttribute& a : ds.attributes) attrs.push_back(a.name);
  IntersectionIndex idx = derive_intersections(holdout, attrs, opts.min_support);
  for (int g = 0; g < idx.group_count(); ++g) {
    report.group_names.push_back(idx.group_name(g));
    report.group_sizes.push_back(static_cast<int>(idx.members[g].size()));
    report.group_below_support.push_back(idx.below_support[g]);
  }

  std::vector<MetricId> metrics = opts.metrics;
  if (metrics.empty())
    metrics = ds.task == TaskKind::adoption ? standard_classification_metrics()
                                            : standard_regression_metrics();
  ConfusionCounts counts;
  if (ds.task == TaskKind::adoption)
    counts = confusion(holdout.targets, preds, idx, ds.label_names);
  for (MetricId m : metrics) {
    require(ds.task == TaskKind::adoption ? is_classification_metric(m)
                                          : !is_classification_metric(m),
            std::string("metric ") + metric_name(m) + " does not apply to this task");
    MetricTable table = ds.task == TaskKind::adoption
                            ? classification_metric(counts, m)
                            : regression_table(holdout.targets, preds, idx, m, ds.label_names);
    for (int l = 0; l < ds.label_count(); ++l) {
      int usable = 0;
      for (int g = 0; g < idx.group_count(); ++g)
        if (table.defined(l, g) && (opts.include_flagged || !table.below_support[g])) ++usable;
      if (usable < 2) continue;
      DisparityResult d = disparity(table, l, opts.include_flagged);
      DisparityEntry entry;
      entry.metric = m;
      entry.label = ds.label_names[l];
      entry.value = d.value;
      entry.max_group = idx.group_name(d.max_group);
      entry.min_group = idx.group_name(d.min_group);
      entry.breach = opts.fail_threshold && d.value > *opts.fail_threshold;
      report.disparities.push_back(entry);
      if (entry.breach) report.breaches.push_back(entry);
    }
    report.tables.push_back(std::move(table));
  }

  MetricId tmetric = opts.tensor_metric.value_or(
      ds.task == TaskKind::adoption ? MetricId::selection_rate : MetricId::mse);
  GValueGrid grid = metric_by_group_and_label(holdout.targets, preds, idx, tmetric,
                                              ds.label_names);
  report.tensor = build_tensor(grid, UndefinedPolicy::masked);
  report.tensor.dataset_hash = report.dataset_fingerprint;
  report.tensor.model_id = std::string(opts.include_protected ? "aware-" : "unaware-") +
                           task_name(ds.task);
  if (opts.tensor_weights) report.tensor = apply_weights(report.tensor, *opts.tensor_weights);
  for (AggregateScheme s : {AggregateScheme::weighted_mean, AggregateScheme::median,
                            AggregateScheme::harmonic_mean_abs, AggregateScheme::max_abs})
    report.aggregates.push_back(aggregate(report.tensor, s));

  QualityOptions qopts;
  qopts.correlation_threshold = opts.correlation_threshold;
  qopts.min_support = opts.min_support;
  qopts.attrs = opts.attrs;
  report.quality = data_quality_report(ds, qopts);
  return report;
}

std::string AuditReport::to_json_text() const {
  nlohmann::json j;
  j["report_version"] = 1;
  j["meta"] = {{"seed", seed},
               {"dataset_fingerprint", dataset_fingerprint},
               {"config_fingerprint", config_fingerprint},
               {"generated_at", generated_at}};
  j["options"] = nlohmann::json::parse(options.to_json_text());
  j["model"] = nlohmann::json::parse(model.to_json_text());
  j["groups"] = nlohmann::json::array();
  for (std::size_t g = 0; g < group_names.size(); ++g)
    j["groups"].push_back({{"name", group_names[g]},
                           {"size", group_sizes[g]},
                           {"below_support", static_cast<bool>(group_below_support[g])}});
  j["tables"] = nlohmann::json::array();
  for (const MetricTable& t : tables) j["tables"].push_back(nlohmann::json::parse(t.to_json_text()));
  j["disparities"] = nlohmann::json::array();
  for (const DisparityEntry& d : disparities) j["disparities"].push_back(disparity_json(d));
  j["tensor"] = nlohmann::json::parse(tensor.to_json_text());
  j["aggregates"] = nlohmann::json::array();
  for (const AggregateResult& a : aggregates)
    j["aggregates"].push_back({{"scheme", aggregate_scheme_name(a.scheme)},
                               {"value", a.value},
                               {"cells_used", a.cells_used},
                               {"coverage", a.coverage},
                               {"peak_cell", {a.peak_cell[0], a.peak_cell[1], a.peak_cell[2]}},
                               {"peak_value", a.peak_value}});
  j["quality"] = nlohmann::json::parse(quality.to_json_text());
  j["breaches"] = nlohmann::json::array();
  for (const DisparityEntry& d : breaches) j["breaches"].push_back(disparity_json(d));
  j["exit_code"] = exit_code();
  return j.dump(2);
}

std::vector<std::string> save_csv_bundle(const AuditReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    fs::path path = fs::path(dir) / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    written.push_back(name);
  };
  for (const MetricTable& t : report.tables)
    emit(std::string("metric_") + metric_name(t.metric) + ".csv", t.to_csv());
  std::string disp = "metric,label,value,max_group,min_group,breach\n";
  for (const DisparityEntry& d : report.disparities) {
    disp += metric_name(d.metric);
    disp += ',';
    disp += d.label;
    disp += ',';
    disp += std::to_string(d.value);
    disp += ',';
    disp += d.max_group;
    disp += ',';
    disp += d.min_group;
    disp += ',';
    disp += d.breach ? "true" : "false";
    disp += '\n';
  }
  emit("disparities.csv", disp);
  emit("tensor.csv", report.tensor.to_csv());
  return written;
}

}  // namespace fairaudit

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fairaudit/audit.hpp"
#include "fairaudit/dataset.hpp"
#include "fairaudit/learners.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/mitigation.hpp"
#include "fairaudit/statistics.hpp"
#include "fairaudit/tensor.hpp"

namespace {

using namespace fairaudit;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << text << "\n";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset load_dataset(const std::string& data_path, const std::string& schema_path) {
  ColumnSchema schema = ColumnSchema::from_json_file(schema_path);
  Dataset ds = load_csv(data_path, schema);
  ds.validate();
  return ds;
}

std::vector<MetricId> parse_metrics(const std::vector<std::string>& names) {
  std::vector<MetricId> out;
  for (const std::string& n : names) out.push_back(metric_from_name(n));
  return out;
}

int label_index(const Dataset& ds, const std::string& label) {
  if (label.empty()) return 0;
  for (int l = 0; l < ds.label_count(); ++l)
    if (ds.label_names[l] == label) return l;
  try {
    std::size_t pos = 0;
    int l = std::stoi(label, &pos);
    if (pos == label.size() && l >= 0 && l < ds.label_count()) return l;
  } catch (const std::exception&) {
  }
  throw std::runtime_error("unknown label: " + label);
}

std::vector<std::string> attrs_or_all(const Dataset& ds, std::vector<std::string> attrs) {
  if (attrs.empty())
    for (const ProtectedAttribute& at : ds.attributes) attrs.push_back(at.name);
  return attrs;
}

// Levels with no rows on the fitted split would make the regression design
// singular; they carry no information, so they are dropped from the block.
DesignBlock drop_empty_levels(const DesignBlock& demo) {
  std::vector<int> keep;
  for (int j = 0; j < demo.columns.cols(); ++j)
    if (demo.columns.col(j).cwiseAbs().sum() > 0) keep.push_back(j);
  if (keep.size() == static_cast<std::size_t>(demo.columns.cols())) return demo;
  DesignBlock out;
  out.columns.resize(demo.columns.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.columns.col(static_cast<Eigen::Index>(i)) = demo.columns.col(keep[i]);
    out.names.push_back(demo.names[static_cast<std::size_t>(keep[i])]);
  }
  return out;
}

struct SynthArgs {
  std::string config_path, out_path, schema_out, quality_out;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
  SynthConfig cfg = SynthConfig::from_json_file(a.config_path);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  Dataset ds = generate_synthetic(cfg);
  write_csv(ds, a.out_path);
  std::string schema_path = a.schema_out.empty() ? a.out_path + ".schema.json" : a.schema_out;
  {
    ColumnSchema sc = schema_for(ds);
    nlohmann::json j;
    j["task"] = task_name(sc.task);
    nlohmann::json cols = nlohmann::json::object();
    for (const auto& [name, role] : sc.columns)
      cols[name] = role == ColumnRole::feature  ? "feature"
                   : role == ColumnRole::label ? "label"
                                               : "protected";
    j["columns"] = cols;
    nlohmann::json lv = nlohmann::json::object();
    for (const auto& [name, levels] : sc.declared_levels) lv[name] = levels;
    j["levels"] = lv;
    emit(j.dump(2), schema_path);
  }
  if (!a.quality_out.empty()) emit(data_quality_report(ds).to_json_text(), a.quality_out);
  nlohmann::json summary{{"rows", ds.rows()},
                         {"features", ds.feature_count()},
                         {"labels", ds.label_count()},
                         {"seed", cfg.seed},
                         {"data", a.out_path},
                         {"schema", schema_path}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

struct AuditArgs {
  std::string data_path, schema_path, out_path, csv_dir, model_out, weights_path;
  std::vector<std::string> attrs, metrics;
  std::string tensor_metric;
  AuditOptions opts;
  double fail_threshold = -1;
  bool has_fail_threshold = false;
};

int run_audit_cmd(AuditArgs& a) {
  Dataset ds = load_dataset(a.data_path, a.schema_path);
  a.opts.attrs = a.attrs;
  a.opts.metrics = parse_metrics(a.metrics);
  if (!a.tensor_metric.empty()) a.opts.tensor_metric = metric_from_name(a.tensor_metric);
  if (a.has_fail_threshold) a.opts.fail_threshold = a.fail_threshold;
  if (!a.weights_path.empty())
    a.opts.tensor_weights = WeightMatrix::from_json_text(slurp(a.weights_path));
  AuditReport report = run_audit(ds, a.opts);
  emit(report.to_json_text(), a.out_path);
  if (!a.csv_dir.empty()) save_csv_bundle(report, a.csv_dir);
  if (!a.model_out.empty()) emit(report.model.to_json_text(), a.model_out);
  for (const DisparityEntry& b : report.breaches)
    std::cerr << "breach: " << metric_name(b.metric) << " disparity " << b.value << " on label '"
              << b.label << "' (max " << b.max_group << ", min " << b.min_group
              << ") exceeds " << *report.options.fail_threshold << "\n";
  return report.exit_code();
}

struct ProxyArgs {
  std::string data_path, schema_path, attr, statistic = "accuracy", out_path;
  int permutations = 200;
  int threads = 0;
  double holdout = 0.3;
  std::uint64_t seed = 42;
};

int run_proxy(const ProxyArgs& a) {
  Dataset ds = load_dataset(a.data_path, a.schema_path);
  int col = ds.attribute_column(a.attr);
  if (col < 0) throw std::runtime_error("unknown protected attribute: " + a.attr);
  const ProtectedAttribute& attr = ds.attributes[col];

  std::vector<int> counts(attr.levels.size(), 0);
  for (int i = 0; i < ds.rows(); ++i) counts[ds.protected_codes(i, col)]++;
  std::vector<int> populated;
  for (std::size_t l = 0; l < counts.size(); ++l)
    if (counts[l] > 0) populated.push_back(static_cast<int>(l));
  if (populated.size() < 2)
    throw std::runtime_error("attribute '" + a.attr + "' has fewer than two observed levels");

  TwoSampleConfig cfg;
  cfg.statistic = test_statistic_from_name(a.statistic);
  cfg.n_permutations = a.permutations;
  cfg.holdout_fraction = a.holdout;
  cfg.threads = a.threads;

  nlohmann::json j;
  j["attribute"] = a.attr;
  j["statistic"] = a.statistic;
  j["permutations"] = a.permutations;
  j["seed"] = a.seed;
  nlohmann::json results = nlohmann::json::array();
  if (populated.size() == 2) {
    Eigen::VectorXd y(ds.rows());
    for (int i = 0; i < ds.rows(); ++i)
      y(i) = ds.protected_codes(i, col) == populated[1] ? 1.0 : 0.0;
    TwoSampleResult r = two_sample_test(ds.features, y, cfg, a.seed);
    r.level = attr.levels[populated[1]];
    results.push_back(nlohmann::json::parse(r.to_json_text(ds.feature_names)));
  } else {
    std::vector<int> codes(ds.rows());
    std::vector<std::string> names;
    std::vector<int> remap(counts.size(), -1);
    for (std::size_t k = 0; k < populated.size(); ++k) {
      remap[populated[k]] = static_cast<int>(k);
      names.push_back(attr.levels[populated[k]]);
    }
    for (int i = 0; i < ds.rows(); ++i) codes[i] = remap[ds.protected_codes(i, col)];
    for (const TwoSampleResult& r : multiclass_attr_test(ds.features, codes, names, cfg, a.seed))
      results.push_back(nlohmann::json::parse(r.to_json_text(ds.feature_names)));
  }
  j["results"] = results;
  emit(j.dump(2), a.out_path);
  return 0;
}

struct DecomposeArgs {
  std::string data_path, schema_path, label, out_path;
  double holdout = 0.3;
  double corr_threshold = 0.9;
  std::uint64_t seed = 42;
  bool include_protected = false;
  LogisticConfig classifier;
  double lasso_lambda = 0.01;
};

int run_decompose(const DecomposeArgs& a) {
  Dataset ds = load_dataset(a.data_path, a.schema_path);
  int l = label_index(ds, a.label);
  AuditOptions opts;
  opts.holdout_fraction = a.holdout;
  opts.seed = a.seed;
  opts.classifier = a.classifier;
  opts.lasso_lambda = a.lasso_lambda;
  opts.include_protected = a.include_protected;

  auto [train, hold] = split(ds, a.holdout, a.seed);
  Eigen::MatrixXd yhat;
  if (ds.task == TaskKind::adoption) {
    MultiLabelModel model = fit_multilabel(train, a.classifier, a.include_protected);
    yhat = predict_proba_all(model, hold);
  } else {
    std::vector<LinearFit> fits = fit_multitask_lasso(train.features, train.targets,
                                                      a.lasso_lambda);
    yhat.resize(hold.rows(), hold.label_count());
    for (int k = 0; k < hold.label_count(); ++k)
      yhat.col(k) = predict_linear(fits[k], hold.features);
  }
  Eigen::VectorXd bias = hold.targets.col(l) - yhat.col(l);

  std::vector<std::string> attr_names;
  for (const auto& at : ds.attributes) attr_names.push_back(at.name);
  DesignBlock demo = drop_empty_levels(one_hot(hold, attr_names));
  DecompositionFit fit = bias_decomposition(bias, hold.features, yhat, demo, ds.feature_names,
                                            ds.label_names);
  VcovReport vcov = coef_vcov_report(fit, a.corr_threshold);
  DecompositionFit resid = residual_regression(hold.targets.col(l), yhat.col(l), demo);

  nlohmann::json j;
  j["label"] = ds.label_names[l];
  j["seed"] = a.seed;
  j["decomposition"] = nlohmann::json::parse(fit.to_json_text());
  j["vcov"] = nlohmann::json::parse(vcov.to_json_text());
  j["residual_regression"] = nlohmann::json::parse(resid.to_json_text());
  emit(j.dump(2), a.out_path);
  return 0;
}

struct MitigateArgs {
  std::string data_path, schema_path, method = "thresholds", out_path, policy_out;
  std::string criterion = "equal_selection_rate", constraint = "demographic_parity", label;
  std::vector<std::string> attrs;
  std::vector<double> epsilons;
  double epsilon = 0.02, tol = 0.02, holdout = 0.3;
  int max_iter = 50, min_support = 30;
  std::uint64_t seed = 42;
  bool best_iterate = false, include_protected = false;
  LogisticConfig classifier;
};

nlohmann::json rate_range_json(const MetricTable& table, const ThresholdPolicy& policy) {
  nlohmann::json per_label = nlohmann::json::array();
  for (int l = 0; l < static_cast<int>(table.labels.size()); ++l) {
    double lo = 1e300, hi = -1e300;
    int used = 0;
    for (int g = 0; g < static_cast<int>(table.groups.size()); ++g) {
      if (!table.defined(l, g) || policy.excluded[l][g]) continue;
      lo = std::min(lo, table.values(l, g));
      hi = std::max(hi, table.values(l, g));
      ++used;
    }
    per_label.push_back({{"label", table.labels[l]},
                         {"range", used >= 2 ? hi - lo : 0.0},
                         {"groups_used", used}});
  }
  return per_label;
}

int run_mitigate(const MitigateArgs& a) {
  Dataset ds = load_dataset(a.data_path, a.schema_path);
  nlohmann::json j;
  j["method"] = a.method;
  j["seed"] = a.seed;

  if (a.method == "awareness") {
    AwarenessComparison cmp = awareness_comparison(ds, a.classifier, a.holdout, a.seed,
                                                   a.min_support);
    j["comparison"] = nlohmann::json::parse(cmp.to_json_text());
    emit(j.dump(2), a.out_path);
    return 0;
  }

  auto [train, hold] = split(ds, a.holdout, a.seed);
  std::vector<std::string> attrs = attrs_or_all(ds, a.attrs);
  IntersectionIndex idx_train = derive_intersections(train, attrs, a.min_support);
  IntersectionIndex idx_hold = derive_intersections(hold, attrs, a.min_support);

  if (a.method == "thresholds") {
    require(ds.task == TaskKind::adoption, "threshold fitting needs binary adoption labels");
    MultiLabelModel model = fit_multilabel(train, a.classifier, a.include_protected);
    Eigen::MatrixXd p_train = predict_proba_all(model, train);
    Eigen::MatrixXd p_hold = predict_proba_all(model, hold);
    ThresholdCriterion crit = threshold_criterion_from_name(a.criterion);
    ThresholdPolicy policy = fit_thresholds(p_train, train.targets, idx_train, crit, a.tol,
                                            ds.label_names);
    MetricId metric = crit == ThresholdCriterion::equal_selection_rate ? MetricId::selection_rate
                                                                       : MetricId::recall_tpr;
    Eigen::MatrixXd before = (p_hold.array() >= 0.5).cast<double>();
    Eigen::MatrixXd after = apply_thresholds(p_hold, idx_hold, policy);
    MetricTable tb = classification_metric(confusion(hold.targets, before, idx_hold,
                                                     ds.label_names),
                                           metric);
    MetricTable ta = classification_metric(confusion(hold.targets, after, idx_hold,
                                                     ds.label_names),
                                           metric);
    j["criterion"] = threshold_criterion_name(crit);
    j["policy"] = nlohmann::json::parse(policy.to_json_text());
    j["holdout_range_before"] = rate_range_json(tb, policy);
    j["holdout_range_after"] = rate_range_json(ta, policy);
    if (!a.policy_out.empty()) emit(policy.to_json_text(), a.policy_out);
    emit(j.dump(2), a.out_path);
    return 0;
  }

  require(ds.task == TaskKind::adoption, "constrained training needs binary adoption labels");
  int l = label_index(ds, a.label);
  FairnessConstraint constraint = fairness_constraint_from_name(a.constraint);
  EgrConfig cfg;
  cfg.base = a.classifier;
  cfg.epsilon = a.epsilon;
  cfg.max_iter = a.max_iter;
  cfg.best_iterate = a.best_iterate;

  if (a.method == "sweep") {
    require(!a.epsilons.empty(), "--epsilons is required for the sweep method");
    IntersectionIndex idx_full = derive_intersections(ds, attrs_or_all(ds, a.attrs),
                                                      a.min_support);
    std::vector<int> group = idx_full.group_of_rows(ds.rows());
    std::vector<TradeoffPoint> points =
        pareto_sweep(ds.features, ds.targets.col(l), group, idx_full.group_count(), constraint,
                     a.epsilons, cfg, a.holdout, a.seed);
    nlohmann::json arr = nlohmann::json::array();
    for (const TradeoffPoint& p : points) {
      nlohmann::json rates = nlohmann::json::array();
      for (int g = 0; g < p.group_rates.size(); ++g)
        rates.push_back(std::isnan(p.group_rates(g)) ? nlohmann::json(nullptr)
                                                     : nlohmann::json(p.group_rates(g)));
      arr.push_back({{"epsilon", p.epsilon},
                     {"seed", p.seed},
                     {"accuracy", p.accuracy},
                     {"violation", p.violation},
                     {"dominated", p.dominated},
                     {"converged", p.converged},
                     {"group_rates", rates}});
    }
    j["label"] = ds.label_names[l];
    j["constraint"] = fairness_constraint_name(constraint);
    j["points"] = arr;
    emit(j.dump(2), a.out_path);
    return 0;
  }

  require(a.method == "egr", "unknown mitigation method: " + a.method);
  std::vector<int> gtr = idx_train.group_of_rows(train.rows());
  RandomizedClassifier rc = exponentiated_gradient(train.features, train.targets.col(l), gtr,
                                                   idx_train.group_count(), constraint, cfg);
  std::vector<int> ghold = idx_hold.group_of_rows(hold.rows());
  LinearFit plain = fit_logistic(train.features, train.targets.col(l), a.classifier);
  Eigen::VectorXd p_plain = predict_proba(plain, hold.features);
  Eigen::VectorXd d_plain(p_plain.size());
  for (int i = 0; i < p_plain.size(); ++i) d_plain(i) = p_plain(i) >= 0.5 ? 1.0 : 0.0;
  Eigen::VectorXd d_mix = mixture_decisions(rc, hold.features);
  Eigen::VectorXd yh = hold.targets.col(l);

  nlohmann::json trace = nlohmann::json::array();
  for (const EgrTraceRow& row : rc.trace)
    trace.push_back({{"iteration", row.iteration},
                     {"violation", row.violation},
                     {"gap", row.gap},
                     {"best_gap", row.best_gap}});
  nlohmann::json weights = nlohmann::json::array();
  for (int t = 0; t < rc.weights.size(); ++t) weights.push_back(rc.weights(t));
  j["label"] = ds.label_names[l];
  j["constraint"] = fairness_constraint_name(constraint);
  j["epsilon"] = a.epsilon;
  j["converged"] = rc.converged;
  j["iterations"] = static_cast<int>(rc.components.size());
  j["trace"] = trace;
  j["mixture_weights"] = weights;
  j["holdout"] = {
      {"accuracy_unmitigated", (d_plain.array() == yh.array()).cast<double>().mean()},
      {"violation_unmitigated",
       constraint_violation(d_plain, yh, ghold, idx_hold.group_count(), constraint)},
      {"accuracy", (d_mix.array() == yh.array()).cast<double>().mean()},
      {"violation", constraint_violation(d_mix, yh, ghold, idx_hold.group_count(), constraint)}};
  emit(j.dump(2), a.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairness audit toolkit for multi-label models on tabular data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fairaudit 0.1.0");

  SynthArgs synth_args;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset from a JSON config");
  synth->add_option("--config", synth_args.config_path, "generator config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_args.out_path, "output CSV path")->required();
  synth->add_option("--schema-out", synth_args.schema_out, "schema JSON path");
  synth->add_option("--quality-out", synth_args.quality_out, "data quality report path");
  auto* seed_opt = synth->add_option("--seed", synth_seed, "override the config seed");

  AuditArgs audit_args;
  auto* audit = app.add_subcommand("audit", "run the fairness audit and write the report");
  audit->add_option("--data", audit_args.data_path, "input CSV")->required()
      ->check(CLI::ExistingFile);
  audit->add_option("--schema", audit_args.schema_path, "column schema JSON")->required()
      ->check(CLI::ExistingFile);
  audit->add_option("--out", audit_args.out_path, "report path (default stdout)");
  audit->add_option("--csv-dir", audit_args.csv_dir, "also write CSV tables here");
  audit->add_option("--model-out", audit_args.model_out, "save the fitted model JSON");
  audit->add_option("--attrs", audit_args.attrs, "protected attributes to intersect")
      ->delimiter(',');
  audit->add_option("--metrics", audit_args.metrics, "metrics to audit")->delimiter(',');
  audit->add_option("--seed", audit_args.opts.seed, "master seed");
  audit->add_option("--holdout", audit_args.opts.holdout_fraction, "holdout fraction");
  audit->add_flag("--include-protected", audit_args.opts.include_protected,
                  "let the model see protected attributes");
  audit->add_flag("--include-flagged", audit_args.opts.include_flagged,
                  "include below-support groups in disparities");
  audit->add_option("--min-support", audit_args.opts.min_support, "small-group flag threshold");
  auto* fail_opt = audit->add_option("--fail-threshold", audit_args.fail_threshold,
                                     "exit 2 when any disparity exceeds this");
  audit->add_option("--tensor-metric", audit_args.tensor_metric, "metric for the tensor");
  audit->add_option("--weights", audit_args.weights_path, "tensor weight matrix JSON");
  audit->add_option("--lambda", audit_args.opts.lasso_lambda, "spending-model lasso penalty");
  audit->add_option("--l2", audit_args.opts.classifier.l2, "logistic ridge penalty");
  audit->add_option("--max-iter", audit_args.opts.classifier.max_iter,
                    "logistic iteration budget");

  ProxyArgs proxy_args;
  auto* proxy = app.add_subcommand("proxy", "classifier two-sample test for attribute leakage");
  proxy->add_option("--data", proxy_args.data_path, "input CSV")->required()
      ->check(CLI::ExistingFile);
  proxy->add_option("--schema", proxy_args.schema_path, "column schema JSON")->required()
      ->check(CLI::ExistingFile);
  proxy->add_option("--attr", proxy_args.attr, "protected attribute to test")->required();
  proxy->add_option("--statistic", proxy_args.statistic, "accuracy or auc");
  proxy->add_option("--permutations", proxy_args.permutations, "null refits");
  proxy->add_option("--threads", proxy_args.threads, "0 = all cores");
  proxy->add_option("--holdout", proxy_args.holdout, "held-out fraction");
  proxy->add_option("--seed", proxy_args.seed, "master seed");
  proxy->add_option("--out", proxy_args.out_path, "result path (default stdout)");

  DecomposeArgs dec_args;
  auto* dec = app.add_subcommand("decompose", "regression decomposition of per-instance bias");
  dec->add_option("--data", dec_args.data_path, "input CSV")->required()
      ->check(CLI::ExistingFile);
  dec->add_option("--schema", dec_args.schema_path, "column schema JSON")->required()
      ->check(CLI::ExistingFile);
  dec->add_option("--label", dec_args.label, "label name or index (default first)");
  dec->add_option("--holdout", dec_args.holdout, "holdout fraction");
  dec->add_option("--seed", dec_args.seed, "master seed");
  dec->add_option("--corr-threshold", dec_args.corr_threshold,
                  "flag coefficient correlations above this");
  dec->add_flag("--include-protected", dec_args.include_protected,
                "let the model see protected attributes");
  dec->add_option("--out", dec_args.out_path, "result path (default stdout)");

  MitigateArgs mit_args;
  auto* mit = app.add_subcommand("mitigate",
                                 "threshold search, constrained training, or awareness check");
  mit->add_option("--data", mit_args.data_path, "input CSV")->required()
      ->check(CLI::ExistingFile);
  mit->add_option("--schema", mit_args.schema_path, "column schema JSON")->required()
      ->check(CLI::ExistingFile);
  mit->add_option("--method", mit_args.method, "thresholds, egr, sweep, or awareness");
  mit->add_option("--criterion", mit_args.criterion, "equal_selection_rate or equal_tpr");
  mit->add_option("--constraint", mit_args.constraint, "demographic_parity or equalized_odds");
  mit->add_option("--label", mit_args.label, "label for constrained training");
  mit->add_option("--attrs", mit_args.attrs, "protected attributes to intersect")
      ->delimiter(',');
  mit->add_option("--epsilon", mit_args.epsilon, "constraint slack");
  mit->add_option("--epsilons", mit_args.epsilons, "slack grid for the sweep")->delimiter(',');
  mit->add_option("--tol", mit_args.tol, "acceptable criterion range for thresholds");
  mit->add_option("--holdout", mit_args.holdout, "holdout fraction");
  mit->add_option("--max-iter", mit_args.max_iter, "constrained training rounds");
  mit->add_option("--min-support", mit_args.min_support, "small-group flag threshold");
  mit->add_option("--seed", mit_args.seed, "master seed");
  mit->add_flag("--best-iterate", mit_args.best_iterate, "return the best round, not the mix");
  mit->add_flag("--include-protected", mit_args.include_protected,
                "let the model see protected attributes");
  mit->add_option("--out", mit_args.out_path, "result path (default stdout)");
  mit->add_option("--policy-out", mit_args.policy_out, "save the threshold policy JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }

  try {
    if (*synth) {
      if (*seed_opt) synth_args.seed = synth_seed;
      return run_synth(synth_args);
    }
    if (*audit) {
      audit_args.has_fail_threshold = fail_opt->count() > 0;
      return run_audit_cmd(audit_args);
    }
    if (*proxy) return run_proxy(proxy_args);
    if (*dec) return run_decompose(dec_args);
    if (*mit) return run_mitigate(mit_args);
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}

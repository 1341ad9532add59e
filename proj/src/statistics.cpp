#include "fairaudit/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

using nlohmann::json;

const char* test_statistic_name(TestStatistic s) {
  return s == TestStatistic::accuracy ? "accuracy" : "auc";
}

TestStatistic test_statistic_from_name(const std::string& name) {
  if (name == "accuracy") return TestStatistic::accuracy;
  if (name == "auc") return TestStatistic::auc;
  throw std::invalid_argument("unknown test statistic '" + name + "'");
}

namespace {

double held_out_statistic(TestStatistic stat, const Eigen::VectorXd& scores,
                          const Eigen::VectorXd& labels) {
  const Eigen::Index m = scores.size();
  if (stat == TestStatistic::accuracy) {
    double correct = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double pred = scores[i] >= 0.5 ? 1.0 : 0.0;
      correct += pred == labels[i] ? 1.0 : 0.0;
    }
    return correct / static_cast<double>(m);
  }
  // AUC via average ranks (ties share their midrank).
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });
  std::vector<double> rank(m);
  Eigen::Index i = 0;
  while (i < m) {
    Eigen::Index j = i;
    while (j + 1 < m && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
    for (Eigen::Index t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double n1 = 0, rank_sum = 0;
  for (Eigen::Index t = 0; t < m; ++t)
    if (labels[t] == 1.0) {
      n1 += 1;
      rank_sum += rank[t];
    }
  double n0 = static_cast<double>(m) - n1;
  // A permuted labeling can strand one class outside the held-out part;
  // score that draw as chance-level rather than failing the whole test.
  if (n1 == 0 || n0 == 0) return 0.5;
  return (rank_sum - n1 * (n1 + 1) / 2.0) / (n1 * n0);
}

struct FixedSplit {
  std::vector<int> train, test;
};

// Stratified by the attribute so both classes reach both parts whenever the
// class sizes allow it; the allocation's tie-breaks make the split invariant
// to swapping the 0/1 encoding.
FixedSplit fixed_split(const Eigen::VectorXd& attr, double fraction, const Rng& base) {
  const int n = static_cast<int>(attr.size());
  std::vector<std::vector<int>> strata(2);
  for (int i = 0; i < n; ++i) strata[attr[i] == 1.0 ? 0 : 1].push_back(i);
  require(!strata[0].empty() && !strata[1].empty(), "attribute has a single class");

  std::vector<int> quota = detail::stratified_allocation(strata, fraction);
  for (int s = 0; s < 2; ++s)
    require_data(quota[s] >= 1 && quota[s] < static_cast<int>(strata[s].size()),
                 "degenerate held-out split: a class would miss one part");

  Rng rng = base.child("ctst.split");
  std::vector<int> perm = rng.permutation(n);
  std::vector<int> stratum_of(n);
  for (int i : strata[0]) stratum_of[i] = 0;
  for (int i : strata[1]) stratum_of[i] = 1;

  FixedSplit sp;
  for (int i = 0; i < n; ++i) {
    int r = perm[i];
    if (quota[stratum_of[r]] > 0) {
      sp.test.push_back(r);
      quota[stratum_of[r]] -= 1;
    } else {
      sp.train.push_back(r);
    }
  }
  std::sort(sp.train.begin(), sp.train.end());
  std::sort(sp.test.begin(), sp.test.end());
  return sp;
}

double refit_statistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& labels,
                       const FixedSplit& sp, const TwoSampleConfig& cfg) {
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd Xtr(sp.train.size(), p);
  Eigen::VectorXd ytr(sp.train.size());
  for (std::size_t i = 0; i < sp.train.size(); ++i) {
    Xtr.row(static_cast<Eigen::Index>(i)) = X.row(sp.train[i]);
    ytr[static_cast<Eigen::Index>(i)] = labels[sp.train[i]];
  }
  LinearFit fit = fit_logistic(Xtr, ytr, cfg.classifier);
  Eigen::MatrixXd Xte(sp.test.size(), p);
  Eigen::VectorXd yte(sp.test.size());
  for (std::size_t i = 0; i < sp.test.size(); ++i) {
    Xte.row(static_cast<Eigen::Index>(i)) = X.row(sp.test[i]);
    yte[static_cast<Eigen::Index>(i)] = labels[sp.test[i]];
  }
  return held_out_statistic(cfg.statistic, predict_proba(fit, Xte), yte);
}

}  // namespace

TwoSampleResult two_sample_test(const Eigen::MatrixXd& X, const Eigen::VectorXd& attr,
                                const TwoSampleConfig& cfg, std::uint64_t seed) {
  require(X.rows() == attr.size(), "X and attr row counts differ");
  require((attr.array() == 0.0 || attr.array() == 1.0).all(), "attr must be 0/1");
  require(cfg.n_permutations >= 1, "need at least one permutation");
  require(cfg.holdout_fraction > 0 && cfg.holdout_fraction < 1,
          "holdout fraction must lie strictly between 0 and 1");
  const int n = static_cast<int>(X.rows());

  Rng base(seed);
  FixedSplit sp = fixed_split(attr, cfg.holdout_fraction, base);

  TwoSampleResult res;
  res.statistic_id = cfg.statistic;
  res.seed = seed;
  res.n_permutations = cfg.n_permutations;

  // Observed fit, kept for attribution.
  {
    Eigen::MatrixXd Xtr(sp.train.size(), X.cols());
    Eigen::VectorXd ytr(sp.train.size());
    for (std::size_t i = 0; i < sp.train.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(sp.train[i]);
      ytr[static_cast<Eigen::Index>(i)] = attr[sp.train[i]];
    }
    res.classifier = fit_logistic(Xtr, ytr, cfg.classifier);
    Eigen::MatrixXd Xte(sp.test.size(), X.cols());
    Eigen::VectorXd yte(sp.test.size());
    for (std::size_t i = 0; i < sp.test.size(); ++i) {
      Xte.row(static_cast<Eigen::Index>(i)) = X.row(sp.test[i]);
      yte[static_cast<Eigen::Index>(i)] = attr[sp.test[i]];
    }
    res.observed = held_out_statistic(cfg.statistic, predict_proba(res.classifier, Xte), yte);
  }
  res.attribution = linear_attribution(res.classifier, X);

  // Permutation null: shuffle the full attribute vector, same split, refit.
  // Each permutation owns a derived stream, so thread count cannot change
  // the result.
  const int B = cfg.n_permutations;
  res.null_samples.assign(B, 0.0);
  int threads = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, B));
  auto run_range = [&](int lo, int hi) {
    for (int b = lo; b < hi; ++b) {
      Rng prng = base.child("ctst.perm", static_cast<std::uint64_t>(b + 1));
      std::vector<int> perm = prng.permutation(n);
      Eigen::VectorXd shuffled(n);
      for (int i = 0; i < n; ++i) shuffled[i] = attr[perm[i]];
      res.null_samples[b] = refit_statistic(X, shuffled, sp, cfg);
    }
  };
  if (threads == 1) {
    run_range(0, B);
  } else {
    std::vector<std::future<void>> futures;
    int chunk = (B + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      int lo = t * chunk, hi = std::min(B, lo + chunk);
      if (lo >= hi) break;
      futures.push_back(std::async(std::launch::async, run_range, lo, hi));
    }
    for (auto& f : futures) f.get();
  }

  int at_least = 0;
  for (double v : res.null_samples)
    if (v >= res.observed) ++at_least;
  res.p_value = (1.0 + at_least) / (1.0 + B);
  res.adjusted_p = res.p_value;
  return res;
}

std::vector<double> holm_adjust(const std::vector<double>& p_values) {
  for (double p : p_values)
    require(p >= 0.0 && p <= 1.0, "p-values must lie in [0,1]");
  const int m = static_cast<int>(p_values.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m, 0);
  double running = 0;
  for (int i = 0; i < m; ++i) {
    double scaled = static_cast<double>(m - i) * p_values[order[i]];
    running = std::max(running, std::min(1.0, scaled));
    adjusted[order[i]] = running;
  }
  return adjusted;
}

std::vector<TwoSampleResult> multiclass_attr_test(const Eigen::MatrixXd& X,
                                                  const std::vector<int>& codes,
                                                  const std::vector<std::string>& level_names,
                                                  const TwoSampleConfig& cfg,
                                                  std::uint64_t seed) {
  require(static_cast<Eigen::Index>(codes.size()) == X.rows(),
          "code vector length differs from X rows");
  const int levels = static_cast<int>(level_names.size());
  require(levels >= 2, "need at least two levels");
  std::vector<int> counts(levels, 0);
  for (int c : codes) {
    require(c >= 0 && c < levels, "attribute code out of range");
    counts[c] += 1;
  }
  for (int l = 0; l < levels; ++l)
    require(counts[l] > 0, "level '" + level_names[l] + "' has zero rows");

  std::vector<TwoSampleResult> results;
  Rng base(seed);
  for (int l = 0; l < levels; ++l) {
    Eigen::VectorXd indicator(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      indicator[i] = codes[static_cast<std::size_t>(i)] == l ? 1.0 : 0.0;
    TwoSampleResult r =
        two_sample_test(X, indicator, cfg, base.child("level", static_cast<std::uint64_t>(l)).seed());
    r.level = level_names[l];
    results.push_back(std::move(r));
  }
  std::vector<double> raw;
  for (const auto& r : results) raw.push_back(r.p_value);
  std::vector<double> adjusted = holm_adjust(raw);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].adjusted_p = adjusted[i];
  return results;
}

Eigen::MatrixXd attribution_matrix(const LinearFit& fit, const Eigen::MatrixXd& X) {
  require(X.cols() == fit.coefficients.size(), "feature count differs from fitted model");
  Eigen::RowVectorXd mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - mean;
  return centered.array().rowwise() * fit.coefficients.transpose().array();
}

Eigen::VectorXd linear_attribution(const LinearFit& fit, const Eigen::MatrixXd& X) {
  return attribution_matrix(fit, X).cwiseAbs().colwise().mean();
}

const char* coef_block_name(CoefBlock b) {
  switch (b) {
    case CoefBlock::intercept: return "intercept";
    case CoefBlock::feature: return "feature";
    case CoefBlock::predicted_label: return "predicted_label";
    case CoefBlock::demographic: return "demographic";
  }
  return "unknown";
}

namespace {

DecompositionFit decompose(const Eigen::VectorXd& bias, const Eigen::MatrixXd& design,
                           const std::vector<std::string>& names,
                           const std::vector<CoefBlock>& blocks, Eigen::Index p,
                           Eigen::Index k) {
  DecompositionFit d;
  d.ols = fit_ols(design, bias, names);
  d.alpha = d.ols.intercept;
  d.beta = d.ols.coefficients.head(p);
  d.gamma = d.ols.coefficients.segment(p, k);
  d.delta = d.ols.coefficients.tail(d.ols.coefficients.size() - p - k);
  d.residuals = bias - predict_linear(d.ols, design);
  d.standard_errors = d.ols.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  d.column_names.push_back("intercept");
  d.column_names.insert(d.column_names.end(), names.begin(), names.end());
  d.column_blocks.push_back(CoefBlock::intercept);
  d.column_blocks.insert(d.column_blocks.end(), blocks.begin(), blocks.end());
  return d;
}

}  // namespace

DecompositionFit bias_decomposition(const Eigen::VectorXd& bias, const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& yhat, const DesignBlock& demographics,
                                    const std::vector<std::string>& feature_names,
                                    const std::vector<std::string>& label_names) {
  require(bias.size() == X.rows(), "bias length differs from X rows");
  require(yhat.rows() == X.rows(), "model outputs row count differs from X");
  require(demographics.columns.rows() == X.rows(), "demographic rows differ from X");
  require(demographics.columns.cols() == static_cast<Eigen::Index>(demographics.names.size()),
          "demographic names differ from columns");

  const Eigen::Index p = X.cols(), k = yhat.cols(), r = demographics.columns.cols();
  Eigen::MatrixXd design(X.rows(), p + k + r);
  design.leftCols(p) = X;
  design.middleCols(p, k) = yhat;
  design.rightCols(r) = demographics.columns;

  std::vector<std::string> names;
  std::vector<CoefBlock> blocks;
  for (Eigen::Index j = 0; j < p; ++j) {
    names.push_back(static_cast<std::size_t>(j) < feature_names.size()
                        ? feature_names[static_cast<std::size_t>(j)]
                        : "x" + std::to_string(j + 1));
    blocks.push_back(CoefBlock::feature);
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    names.push_back(static_cast<std::size_t>(j) < label_names.size()
                        ? "yhat:" + label_names[static_cast<std::size_t>(j)]
                        : "yhat_" + std::to_string(j + 1));
    blocks.push_back(CoefBlock::predicted_label);
  }
  for (const auto& n : demographics.names) {
    names.push_back(n);
    blocks.push_back(CoefBlock::demographic);
  }
  return decompose(bias, design, names, blocks, p, k);
}

DecompositionFit residual_regression(const Eigen::VectorXd& y_true,
                                     const Eigen::VectorXd& y_pred,
                                     const DesignBlock& demographics) {
  require(y_true.size() == y_pred.size(), "prediction length differs from targets");
  require(demographics.columns.rows() == y_true.size(), "demographic rows differ from targets");
  Eigen::VectorXd bias = y_true - y_pred;
  std::vector<CoefBlock> blocks(demographics.names.size(), CoefBlock::demographic);
  return decompose(bias, demographics.columns, demographics.names, blocks, 0, 0);
}

VcovReport coef_vcov_report(const DecompositionFit& fit, double threshold) {
  require(threshold > 0, "correlation threshold must be positive");
  VcovReport rep;
  rep.threshold = threshold;
  rep.column_names = fit.column_names;
  rep.vcov = fit.ols.vcov;
  const Eigen::Index m = rep.vcov.rows();
  rep.correlation.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      double denom = std::sqrt(rep.vcov(i, i) * rep.vcov(j, j));
      rep.correlation(i, j) = denom > 0 ? rep.vcov(i, j) / denom : 0.0;
    }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      if (std::abs(rep.correlation(i, j)) > threshold)
        rep.flagged.push_back({static_cast<int>(i), static_cast<int>(j), rep.correlation(i, j)});
  return rep;
}

std::string TwoSampleResult::to_json_text(const std::vector<std::string>& column_names) const {
  json j;
  j["statistic"] = test_statistic_name(statistic_id);
  j["observed"] = observed;
  j["p_value"] = p_value;
  j["adjusted_p"] = adjusted_p;
  j["n_permutations"] = n_permutations;
  j["seed"] = seed;
  if (!level.empty()) j["level"] = level;
  j["classifier"] = {{"converged", classifier.converged},
                     {"iterations", classifier.iterations},
                     {"l2", classifier.lambda}};
  json attr = json::array();
  for (Eigen::Index i = 0; i < attribution.size(); ++i) {
    json item;
    item["column"] = static_cast<std::size_t>(i) < column_names.size()
                         ? column_names[static_cast<std::size_t>(i)]
                         : "x" + std::to_string(i + 1);
    item["mean_abs_contribution"] = attribution[i];
    attr.push_back(item);
  }
  j["attribution"] = attr;
  j["null_samples"] = null_samples;
  return j.dump(2);
}

std::string DecompositionFit::to_json_text() const {
  json j;
  json cols = json::array();
  Eigen::VectorXd all(column_names.size());
  all[0] = alpha;
  all.tail(ols.coefficients.size()) = ols.coefficients;
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    json c;
    c["name"] = column_names[i];
    c["block"] = coef_block_name(column_blocks[i]);
    c["coefficient"] = all[static_cast<Eigen::Index>(i)];
    c["standard_error"] = standard_errors[static_cast<Eigen::Index>(i)];
    cols.push_back(c);
  }
  j["columns"] = cols;
  j["residual_variance"] = ols.residual_variance;
  return j.dump(2);
}

std::string VcovReport::to_json_text() const {
  json j;
  j["columns"] = column_names;
  json rows = json::array();
  for (Eigen::Index i = 0; i < vcov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < vcov.cols(); ++c) row.push_back(vcov(i, c));
    rows.push_back(row);
  }
  j["vcov"] = rows;
  json flags = json::array();
  for (const auto& f : flagged)
    flags.push_back({{"i", column_names[static_cast<std::size_t>(f.i)]},
                     {"j", column_names[static_cast<std::size_t>(f.j)]},
                     {"correlation", f.correlation}});
  j["flagged_pairs"] = flags;
  j["threshold"] = threshold;
  return j.dump(2);
}

}  // namespace fairaudit

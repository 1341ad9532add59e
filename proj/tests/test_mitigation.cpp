#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "fairaudit/learners.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/mitigation.hpp"
#include "fairaudit/rng.hpp"

using namespace fairaudit;

namespace {

IntersectionIndex two_group_index(const std::vector<int>& codes, int min_support = 0) {
  IntersectionIndex idx;
  idx.attribute_names = {"g"};
  idx.attribute_columns = {0};
  idx.attribute_levels = {{"g0", "g1"}};
  idx.min_support = min_support;
  idx.members.resize(2);
  for (std::size_t r = 0; r < codes.size(); ++r) idx.members[codes[r]].push_back(static_cast<int>(r));
  for (int g = 0; g < 2; ++g) {
    idx.groups.push_back(GroupKey{{g}});
    idx.below_support.push_back(static_cast<int>(idx.members[g].size()) < min_support);
  }
  return idx;
}

double selection_rate(const Eigen::ArrayXd& scores, const std::vector<int>& rows, double t) {
  int sel = 0;
  for (int r : rows) sel += scores(r) >= t ? 1 : 0;
  return rows.empty() ? 0.0 : static_cast<double>(sel) / static_cast<double>(rows.size());
}

}  // namespace

TEST_CASE("shifted score distributions get shifted thresholds") {
  Rng rng(10);
  const int n = 400;
  Eigen::MatrixXd probas(n, 1), targets(n, 1);
  std::vector<int> codes(n);
  for (int i = 0; i < n; ++i) {
    codes[i] = i % 2;
    double base = rng.u01() * 0.6 + 0.1;          // group 0 scores in [0.1, 0.7]
    probas(i, 0) = base + (codes[i] ? 0.2 : 0.0);  // group 1 is the same + 0.2
    targets(i, 0) = probas(i, 0) > 0.45 ? 1.0 : 0.0;
  }
  auto idx = two_group_index(codes);
  auto policy = fit_thresholds(probas, targets, idx, ThresholdCriterion::equal_selection_rate,
                               /*tol=*/0.01, {"adopt"});
  REQUIRE(policy.thresholds.rows() == 1);
  REQUIRE(policy.thresholds.cols() == 2);
  const double t0 = policy.thresholds(0, 0), t1 = policy.thresholds(0, 1);
  CHECK(t1 - t0 == doctest::Approx(0.2).epsilon(0.25));
  CHECK(policy.residual_gap(0) <= 0.01 + 1e-12);

  // The achieved selection rates really do line up on the fit data.
  Eigen::ArrayXd col = probas.col(0).array();
  double r0 = selection_rate(col, idx.members[0], t0);
  double r1 = selection_rate(col, idx.members[1], t1);
  CHECK(std::abs(r0 - r1) <= 0.01 + 1e-12);
  CHECK(policy.labels == std::vector<std::string>{"adopt"});
  CHECK(policy.groups == std::vector<std::string>{"g0", "g1"});
}

TEST_CASE("a tolerance of one keeps every default threshold") {
  Rng rng(21);
  const int n = 100;
  Eigen::MatrixXd probas(n, 2), targets(n, 2);
  std::vector<int> codes(n);
  for (int i = 0; i < n; ++i) {
    codes[i] = i % 2;
    for (int k = 0; k < 2; ++k) {
      probas(i, k) = rng.u01();
      targets(i, k) = rng.u01() < 0.5 ? 1.0 : 0.0;
    }
  }
  auto policy = fit_thresholds(probas, targets, two_group_index(codes),
                               ThresholdCriterion::equal_selection_rate, /*tol=*/1.0);
  CHECK((policy.thresholds == 0.5).all());
  CHECK(policy.criterion == ThresholdCriterion::equal_selection_rate);
}

TEST_CASE("equal tpr skips groups without positives and flags them") {
  Rng rng(31);
  const int n = 300;
  Eigen::MatrixXd probas(n, 1), targets(n, 1);
  std::vector<int> codes(n);
  for (int i = 0; i < n; ++i) {
    codes[i] = i % 3 == 0 ? 1 : 0;
    probas(i, 0) = rng.u01();
    targets(i, 0) = codes[i] == 1 ? 0.0 : (rng.u01() < 0.5 ? 1.0 : 0.0);
  }
  IntersectionIndex idx;
  idx.attribute_names = {"g"};
  idx.attribute_columns = {0};
  idx.attribute_levels = {{"g0", "g1"}};
  idx.min_support = 0;
  idx.members.resize(2);
  for (int r = 0; r < n; ++r) idx.members[codes[r]].push_back(r);
  idx.groups = {GroupKey{{0}}, GroupKey{{1}}};
  idx.below_support = {false, false};

  auto policy =
      fit_thresholds(probas, targets, idx, ThresholdCriterion::equal_tpr, 0.02, {"adopt"});
  CHECK(policy.excluded[0][1]);           // no positives in group 1
  CHECK_FALSE(policy.excluded[0][0]);
  CHECK(policy.thresholds(0, 1) == 0.5);  // excluded group keeps the default
  CHECK(policy.criterion == ThresholdCriterion::equal_tpr);
}

TEST_CASE("threshold application routes rows by group and falls back to the default") {
  ThresholdPolicy policy;
  policy.criterion = ThresholdCriterion::equal_selection_rate;
  policy.labels = {"adopt"};
  policy.groups = {"g0", "g1"};
  policy.thresholds.resize(1, 2);
  policy.thresholds << 0.3, 0.7;
  policy.residual_gap = Eigen::ArrayXd::Zero(1);
  policy.excluded = {{false, false}};
  policy.default_threshold = 0.5;

  Eigen::MatrixXd probas(3, 1);
  probas << 0.4, 0.4, 0.4;
  IntersectionIndex idx = two_group_index({0, 1, 0});
  auto decisions = apply_thresholds(probas, idx, policy);
  CHECK(decisions(0, 0) == 1.0);  // 0.4 >= 0.3
  CHECK(decisions(1, 0) == 0.0);  // 0.4 < 0.7
  CHECK(decisions(2, 0) == 1.0);

  // A group the policy has never seen uses the default threshold.
  IntersectionIndex other;
  other.attribute_names = {"g"};
  other.attribute_columns = {0};
  other.attribute_levels = {{"gX"}};
  other.members = {{0, 1, 2}};
  other.groups = {GroupKey{{0}}};
  other.below_support = {false};
  auto fallback = apply_thresholds(probas, other, policy);
  CHECK(fallback(0, 0) == 0.0);  // 0.4 < 0.5

  policy.default_threshold = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(apply_thresholds(probas, other, policy), std::runtime_error);
}

TEST_CASE("threshold policies round trip through json") {
  ThresholdPolicy policy;
  policy.criterion = ThresholdCriterion::equal_tpr;
  policy.labels = {"adopt", "churn"};
  policy.groups = {"a", "b"};
  policy.thresholds.resize(2, 2);
  policy.thresholds << 0.25, 0.5, 0.75, 0.625;
  policy.residual_gap.resize(2);
  policy.residual_gap << 0.01, 0.0;
  policy.excluded = {{false, true}, {false, false}};
  policy.tol = 0.02;

  auto back = ThresholdPolicy::from_json_text(policy.to_json_text());
  CHECK(back.criterion == policy.criterion);
  CHECK(back.labels == policy.labels);
  CHECK(back.groups == policy.groups);
  CHECK((back.thresholds == policy.thresholds).all());
  CHECK((back.residual_gap == policy.residual_gap).all());
  CHECK(back.excluded == policy.excluded);
  CHECK(back.default_threshold == policy.default_threshold);
  CHECK(back.tol == policy.tol);
  CHECK(threshold_criterion_from_name("equal_selection_rate") ==
        ThresholdCriterion::equal_selection_rate);
  CHECK_THROWS_AS(threshold_criterion_from_name("equal_odds"), std::invalid_argument);
}

TEST_CASE("constraint violation is the worst group-rate deviation") {
  // decisions: group 0 selects 3/4, group 1 selects 1/4; overall 1/2.
  Eigen::VectorXd d(8), y(8);
  d << 1, 1, 1, 0, 1, 0, 0, 0;
  y << 1, 0, 1, 0, 1, 1, 0, 0;
  std::vector<int> g = {0, 0, 0, 0, 1, 1, 1, 1};
  double v = constraint_violation(d, y, g, 2, FairnessConstraint::demographic_parity);
  CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  // Equalized odds looks at both condition slices; make y==1 rates differ.
  double eo = constraint_violation(d, y, g, 2, FairnessConstraint::equalized_odds);
  // y==1 rows: group0 {1,1}, group1 {1,0} -> rates 1 and 0.5, overall 0.75.
  // y==0 rows: group0 {1,0}, group1 {0,0} -> rates 0.5 and 0, overall 0.25.
  CHECK(eo == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(fairness_constraint_from_name("demographic_parity") ==
        FairnessConstraint::demographic_parity);
  CHECK_THROWS_AS(fairness_constraint_from_name("calibration"), std::invalid_argument);
}

TEST_CASE("relaxing the constraint to one recovers the plain classifier") {
  Rng rng(8);
  const int n = 500;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) {
    g[i] = i % 2;
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal() + (g[i] ? 0.5 : 0.0);
    double z = 1.2 * X(i, 0) - 0.8 * X(i, 1);
    y(i) = rng.u01() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
  }
  EgrConfig cfg;
  cfg.epsilon = 1.0;
  cfg.max_iter = 10;
  auto mitigated = exponentiated_gradient(X, y, g, 2, FairnessConstraint::demographic_parity, cfg);
  auto plain = fit_logistic(X, y, cfg.base);
  Eigen::VectorXd mixed = mixture_scores(mitigated, X);
  Eigen::VectorXd direct = predict_proba(plain, X);
  int agree = 0;
  for (int i = 0; i < n; ++i)
    agree += ((mixed(i) >= 0.5) == (direct(i) >= 0.5)) ? 1 : 0;
  CHECK(static_cast<double>(agree) / n >= 0.99);
  CHECK(mitigated.converged);
  CHECK(mitigated.components.size() == 1);  // already feasible: first round exits

  double wsum = std::accumulate(mitigated.weights.begin(), mitigated.weights.end(), 0.0);
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  for (double w : mitigated.weights) CHECK(w >= 0.0);
}

TEST_CASE("the constrained fit trades accuracy for a smaller violation") {
  Rng rng(14);
  const int n = 800;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) {
    g[i] = i % 2;
    X(i, 0) = rng.normal() + (g[i] ? 1.5 : 0.0);  // feature leaks the group
    X(i, 1) = rng.normal();
    double z = 2.0 * X(i, 0) - 1.0;
    y(i) = rng.u01() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
  }
  auto plain = fit_logistic(X, y, LogisticConfig{100, 1e-8, 1e-3});
  Eigen::VectorXd plain_probs = predict_proba(plain, X);
  Eigen::VectorXd plain_dec = (plain_probs.array() >= 0.5).cast<double>();
  double base_viol =
      constraint_violation(plain_dec, y, g, 2, FairnessConstraint::demographic_parity);

  EgrConfig cfg;
  cfg.epsilon = 0.02;
  cfg.max_iter = 40;
  auto mitigated = exponentiated_gradient(X, y, g, 2, FairnessConstraint::demographic_parity, cfg);
  Eigen::VectorXd dec = mixture_decisions(mitigated, X);
  double viol = constraint_violation(dec, y, g, 2, FairnessConstraint::demographic_parity);
  CHECK(base_viol > 0.2);  // the plant is real
  CHECK(viol < base_viol / 2);

  // The trace is well-formed: best gap never increases.
  REQUIRE(!mitigated.trace.empty());
  for (std::size_t i = 1; i < mitigated.trace.size(); ++i)
    CHECK(mitigated.trace[i].best_gap <= mitigated.trace[i - 1].best_gap + 1e-12);
  CHECK(mitigated.trace.front().iteration == 1);

  double wsum = std::accumulate(mitigated.weights.begin(), mitigated.weights.end(), 0.0);
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));

  // Best-iterate mode concentrates the mass on one component, and the
  // returned decisions are exactly that component's own decisions.
  EgrConfig best = cfg;
  best.best_iterate = true;
  auto single = exponentiated_gradient(X, y, g, 2, FairnessConstraint::demographic_parity, best);
  int heavy = -1;
  for (int i = 0; i < single.weights.size(); ++i)
    if (single.weights(i) == 1.0) {
      REQUIRE(heavy == -1);
      heavy = i;
    }
  REQUIRE(heavy >= 0);
  Eigen::VectorXd comp =
      (predict_proba(single.components[heavy], X).array() >= 0.5).cast<double>();
  Eigen::VectorXd picked = mixture_decisions(single, X);
  CHECK((picked.array() == comp.array()).all());
}

TEST_CASE("mitigation rejects malformed inputs") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 2);
  Eigen::VectorXd y = (Eigen::VectorXd::Random(10).array() > 0).cast<double>();
  std::vector<int> g = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  EgrConfig cfg;
  cfg.epsilon = -0.1;
  CHECK_THROWS_AS(exponentiated_gradient(X, y, g, 2, FairnessConstraint::demographic_parity, cfg),
                  std::invalid_argument);
  cfg.epsilon = 0.1;
  std::vector<int> bad = g;
  bad[3] = 7;
  CHECK_THROWS_AS(exponentiated_gradient(X, y, bad, 2, FairnessConstraint::demographic_parity, cfg),
                  std::invalid_argument);
  std::vector<int> short_g(9, 0);
  CHECK_THROWS_AS(
      exponentiated_gradient(X, y, short_g, 2, FairnessConstraint::demographic_parity, cfg),
      std::invalid_argument);
}

TEST_CASE("the tradeoff sweep marks dominated points and keeps duplicate epsilons") {
  Rng rng(100);
  const int n = 600;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  std::vector<int> g(n);
  for (int i = 0; i < n; ++i) {
    g[i] = i % 2;
    X(i, 0) = rng.normal() + (g[i] ? 1.2 : 0.0);
    X(i, 1) = rng.normal();
    double z = 1.5 * X(i, 0) - 0.5;
    y(i) = rng.u01() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
  }
  EgrConfig cfg;
  cfg.max_iter = 25;
  std::vector<double> eps = {0.01, 0.05, 0.05, 0.5};
  auto points = pareto_sweep(X, y, g, 2, FairnessConstraint::demographic_parity, eps, cfg, 0.3,
                             /*seed=*/9);
  REQUIRE(points.size() == 4);
  CHECK(points[1].epsilon == points[2].epsilon);
  CHECK(points[1].seed != points[2].seed);  // same epsilon, different derived split

  for (const auto& pt : points) {
    CHECK(pt.accuracy >= 0.0);
    CHECK(pt.accuracy <= 1.0);
    CHECK(pt.violation >= 0.0);
    CHECK(pt.group_rates.size() == 2);
    // dominated means someone else is strictly better on both axes
    bool dominated = false;
    for (const auto& other : points)
      if (other.accuracy > pt.accuracy && other.violation < pt.violation) dominated = true;
    CHECK(pt.dominated == dominated);
  }

  // Deterministic under the same seed.
  auto again = pareto_sweep(X, y, g, 2, FairnessConstraint::demographic_parity, eps, cfg, 0.3, 9);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].accuracy == again[i].accuracy);
    CHECK(points[i].violation == again[i].violation);
  }
  CHECK_THROWS_AS(
      pareto_sweep(X, y, g, 2, FairnessConstraint::demographic_parity, {}, cfg, 0.3, 9),
      std::invalid_argument);
}

TEST_CASE("awareness comparison reports the seven metric differences per label") {
  SynthConfig sc;
  sc.n = 500;
  sc.p = 4;
  sc.k = 2;
  sc.seed = 19;
  sc.task = TaskKind::adoption;
  sc.attributes = {{"region", {"east", "west"}, {0.5, 0.5}, 0.0}};
  sc.label_positive_rates = {0.4, 0.5};
  sc.label_signal = PlantedDependence{0, "region", "west", 1.5};
  auto ds = generate_synthetic(sc);

  LogisticConfig lc{100, 1e-8, 1e-3};
  auto cmp = awareness_comparison(ds, lc, 0.3, /*seed=*/5, /*min_support=*/10);
  CHECK(cmp.labels == std::vector<std::string>{"label_1", "label_2"});
  REQUIRE(cmp.metrics.size() == 7);
  CHECK(cmp.metrics[0] == MetricId::selection_rate);
  CHECK(cmp.difference.rows() == 2);
  CHECK(cmp.difference.cols() == 7);
  CHECK(cmp.recall_unaware.values.size() > 0);
  CHECK(cmp.recall_aware.values.size() > 0);
  CHECK(cmp.seed == 5);

  auto again = awareness_comparison(ds, lc, 0.3, 5, 10);
  for (int i = 0; i < cmp.difference.rows(); ++i)
    for (int j = 0; j < cmp.difference.cols(); ++j) {
      CHECK(std::isnan(cmp.difference(i, j)) == std::isnan(again.difference(i, j)));
      if (!std::isnan(cmp.difference(i, j)))
        CHECK(cmp.difference(i, j) == again.difference(i, j));
    }

  auto js = cmp.to_json_text();
  CHECK(js.find("\"unaware_minus_aware\"") != std::string::npos);
  auto csv = cmp.to_csv();
  CHECK(csv.find("label,metric,unaware_minus_aware") != std::string::npos);

  Dataset no_attrs = ds;
  no_attrs.attributes.clear();
  no_attrs.protected_codes.resize(ds.rows(), 0);
  CHECK_THROWS_AS(awareness_comparison(no_attrs, lc, 0.3, 5, 10), std::invalid_argument);
}

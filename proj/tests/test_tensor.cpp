#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fairaudit/rng.hpp"
#include "fairaudit/tensor.hpp"

using namespace fairaudit;

namespace {

GValueGrid make_grid(const Eigen::ArrayXXd& values, MetricId metric = MetricId::selection_rate) {
  GValueGrid g;
  g.metric = metric;
  g.values = values;
  g.status =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(values.rows(), values.cols());
  for (int l = 0; l < values.rows(); ++l) g.group_keys.push_back("grp" + std::to_string(l));
  for (int k = 0; k < values.cols(); ++k) g.label_ids.push_back("lab" + std::to_string(k));
  return g;
}

GValueGrid random_grid(Rng& rng, int groups, int labels) {
  Eigen::ArrayXXd v(groups, labels);
  for (int l = 0; l < groups; ++l)
    for (int k = 0; k < labels; ++k) v(l, k) = rng.u01();
  return make_grid(v);
}

}  // namespace

TEST_CASE("tensor cells are pairwise metric differences") {
  Eigen::ArrayXXd v(1, 2);
  v << 0.8, 0.5;
  auto t = build_tensor(make_grid(v));
  CHECK(t.group_count() == 1);
  CHECK(t.label_count() == 2);
  CHECK(t.values[0](0, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(t.values[0](1, 0) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(t.values[0](0, 0) == 0.0);
  CHECK(t.values[0](1, 1) == 0.0);
}

TEST_CASE("tensor is antisymmetric with a zero diagonal on random grids") {
  Rng rng(314);
  for (int rep = 0; rep < 20; ++rep) {
    int groups = 1 + static_cast<int>(rng.uniform_int(0, 4));
    int labels = 2 + static_cast<int>(rng.uniform_int(0, 3));
    auto grid = random_grid(rng, groups, labels);
    auto t = build_tensor(grid);
    for (int l = 0; l < groups; ++l) {
      for (int k = 0; k < labels; ++k) CHECK(t.values[l](k, k) == 0.0);
      for (int k1 = 0; k1 < labels; ++k1)
        for (int k2 = 0; k2 < labels; ++k2) {
          CHECK(t.values[l](k1, k2) == doctest::Approx(-t.values[l](k2, k1)).epsilon(1e-15));
          CHECK(t.values[l](k1, k2) ==
                doctest::Approx(grid.values(l, k1) - grid.values(l, k2)).epsilon(1e-15));
        }
    }
  }
}

TEST_CASE("weighting follows the verbatim two-sided rule") {
  Eigen::ArrayXXd v(1, 2);
  v << 0.8, 0.5;
  auto t = build_tensor(make_grid(v));
  WeightMatrix w;
  w.values.resize(1, 2);
  w.values << 2.0, 1.0;
  auto tw = apply_weights(t, w);
  // (W[l,k1] - W[l,k2]) * T[l,k1,k2]: both off-diagonal cells land on +0.3,
  // since the weight difference flips sign together with the base value.
  CHECK(tw.values[0](0, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(tw.values[0](1, 0) == doctest::Approx(0.3).epsilon(1e-15));

  Rng rng(42);
  auto grid = random_grid(rng, 3, 4);
  auto base = build_tensor(grid);
  WeightMatrix rw;
  rw.values.resize(3, 4);
  for (int l = 0; l < 3; ++l)
    for (int k = 0; k < 4; ++k) rw.values(l, k) = rng.u01() * 2;
  auto weighted = apply_weights(base, rw);
  for (int l = 0; l < 3; ++l)
    for (int k1 = 0; k1 < 4; ++k1)
      for (int k2 = 0; k2 < 4; ++k2)
        CHECK(weighted.values[l](k1, k2) ==
              doctest::Approx((rw.values(l, k1) - rw.values(l, k2)) * base.values[l](k1, k2))
                  .epsilon(1e-12));
}

TEST_CASE("a constant weight matrix annihilates the tensor") {
  Rng rng(99);
  auto base = build_tensor(random_grid(rng, 2, 3));
  WeightMatrix w;
  w.values = Eigen::MatrixXd::Constant(2, 3, 0.7);
  auto out = apply_weights(base, w);
  for (int l = 0; l < 2; ++l) CHECK(out.values[l].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("strict policy names the undefined cells, masked skips them") {
  Eigen::ArrayXXd v(2, 2);
  v << 0.8, 0.5, 0.4, 0.2;
  auto grid = make_grid(v);
  grid.status(1, 0) = static_cast<int>(CellStatus::zero_denominator);
  CHECK_THROWS_WITH_AS(build_tensor(grid),
                       "undefined metric cells: (grp1, lab0); use the masked policy to skip them",
                       std::runtime_error);

  auto t = build_tensor(grid, UndefinedPolicy::masked);
  CHECK(t.gdefined(1, 0) == 0);
  CHECK(std::isnan(t.values[1](0, 1)));
  CHECK(std::isnan(t.values[1](1, 0)));
  CHECK(t.values[0](0, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_FALSE(t.cell_defined(1, 0, 1));
  CHECK(t.cell_defined(0, 0, 1));

  auto agg = aggregate(t, AggregateScheme::max_abs);
  CHECK(agg.cells_used == 1);
  CHECK(agg.coverage == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(agg.value == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("aggregation schemes on the two-cell tensor {0.1, 0.3}") {
  Eigen::ArrayXXd v(2, 2);
  v << 0.5, 0.4, 0.8, 0.5;  // slice cells: 0.1 and 0.3
  auto t = build_tensor(make_grid(v));

  auto mean = aggregate(t, AggregateScheme::weighted_mean);
  CHECK(mean.value == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(mean.cells_used == 2);
  CHECK(mean.coverage == doctest::Approx(1.0).epsilon(1e-15));

  auto med = aggregate(t, AggregateScheme::median);
  // Equal weights land the cumulative sum exactly on half: average with next.
  CHECK(med.value == doctest::Approx(0.2).epsilon(1e-12));

  auto harm = aggregate(t, AggregateScheme::harmonic_mean_abs);
  CHECK(harm.value == doctest::Approx(0.15).epsilon(1e-6));

  auto mx = aggregate(t, AggregateScheme::max_abs);
  CHECK(mx.value == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(mx.peak_cell == std::array<int, 3>{1, 0, 1});
  CHECK(mx.peak_value == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("slice aggregation of the grid (0.9, 0.7, 0.8)") {
  Eigen::ArrayXXd v(1, 3);
  v << 0.9, 0.7, 0.8;
  auto t = build_tensor(make_grid(v));
  // Upper triangle: 0.2, 0.1, -0.1.
  auto mx = aggregate(t, AggregateScheme::max_abs);
  CHECK(mx.value == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(mx.peak_cell == std::array<int, 3>{0, 0, 1});
  auto mean = aggregate(t, AggregateScheme::weighted_mean);
  CHECK(mean.value == doctest::Approx((0.2 + 0.1 + 0.1) / 3).epsilon(1e-12));
  auto med = aggregate(t, AggregateScheme::median);
  CHECK(med.value == doctest::Approx(0.1).epsilon(1e-12));  // signed: -0.1, 0.1, 0.2
}

TEST_CASE("peak ties go to the later cell") {
  Eigen::ArrayXXd v(2, 2);
  v << 0.7, 0.5, 0.3, 0.5;  // cells: +0.2 then -0.2
  auto t = build_tensor(make_grid(v));
  auto mx = aggregate(t, AggregateScheme::max_abs);
  CHECK(mx.value == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(mx.peak_cell == std::array<int, 3>{1, 0, 1});
  CHECK(mx.peak_value == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("zero cell weights drop cells from every scheme") {
  Eigen::ArrayXXd v(2, 2);
  v << 0.5, 0.4, 0.8, 0.5;  // cells 0.1, 0.3
  auto t = build_tensor(make_grid(v));
  std::vector<Eigen::MatrixXd> cw(2, Eigen::MatrixXd::Ones(2, 2));
  cw[1](0, 1) = 0.0;  // silence the 0.3 cell
  auto mx = aggregate(t, AggregateScheme::max_abs, &cw);
  CHECK(mx.value == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(mx.cells_used == 1);
  CHECK(mx.coverage == doctest::Approx(0.5).epsilon(1e-12));

  // Unequal weights shift the weighted mean: (1*0.1 + 3*0.3) / 4.
  cw[1](0, 1) = 3.0;
  auto mean = aggregate(t, AggregateScheme::weighted_mean, &cw);
  CHECK(mean.value == doctest::Approx(1.0 / 4.0).epsilon(1e-12));

  cw.pop_back();
  CHECK_THROWS_AS(aggregate(t, AggregateScheme::weighted_mean, &cw), std::invalid_argument);
}

TEST_CASE("aggregation refuses degenerate inputs") {
  Eigen::ArrayXXd v(2, 1);
  v << 0.5, 0.8;
  auto t = build_tensor(make_grid(v));
  CHECK_THROWS_AS(aggregate(t, AggregateScheme::max_abs), std::invalid_argument);

  Eigen::ArrayXXd v2(1, 2);
  v2 << 0.5, 0.8;
  auto grid = make_grid(v2);
  grid.status(0, 0) = static_cast<int>(CellStatus::empty_group);
  auto masked = build_tensor(grid, UndefinedPolicy::masked);
  CHECK_THROWS_AS(aggregate(masked, AggregateScheme::max_abs), std::invalid_argument);
}

TEST_CASE("aggregate scheme names round trip") {
  for (auto s : {AggregateScheme::weighted_mean, AggregateScheme::median,
                 AggregateScheme::harmonic_mean_abs, AggregateScheme::max_abs})
    CHECK(aggregate_scheme_from_name(aggregate_scheme_name(s)) == s);
  CHECK_THROWS_AS(aggregate_scheme_from_name("geometric"), std::invalid_argument);
}

TEST_CASE("pairwise group vector compares the reference against everyone else") {
  Eigen::ArrayXXd v(3, 2);
  v << 0.9, 0.2, 0.8, 0.3, 0.6, 0.4;  // label 0 column: 0.9, 0.8, 0.6
  auto grid = make_grid(v);
  auto pv = pairwise_group_vector(grid, 0, 0);
  REQUIRE(pv.values.size() == 2);
  CHECK(pv.values(0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(pv.values(1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(pv.other_groups == std::vector<std::string>{"grp1", "grp2"});
  CHECK(pv.reference_group == 0);

  grid.status(1, 0) = static_cast<int>(CellStatus::zero_denominator);
  CHECK_THROWS_AS(pairwise_group_vector(grid, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(pairwise_group_vector(make_grid(v), 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(pairwise_group_vector(make_grid(v), 0, 9), std::invalid_argument);
}

TEST_CASE("borda weights score down to one and normalize row-wise") {
  std::vector<std::string> groups = {"a", "b"}, labels = {"x", "y", "z"};
  auto w = borda_weights({"b", "a"}, {"y", "x", "z"}, groups, labels, /*normalize=*/false);
  // group scores: a = 1, b = 2; label scores: x = 2, y = 3, z = 1.
  CHECK(w.values(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(w.values(0, 1) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(w.values(0, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w.values(1, 0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(w.values(1, 1) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(w.values(1, 2) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK((w.values.array() > 0).all());  // bottom rank still scores 1, never 0

  auto wn = borda_weights({"b", "a"}, {"y", "x", "z"}, groups, labels);
  CHECK(wn.normalized);
  for (int l = 0; l < 2; ++l) CHECK(wn.values.row(l).sum() == doctest::Approx(1.0).epsilon(1e-12));
  // Normalization keeps within-row proportions.
  CHECK(wn.values(0, 1) / wn.values(0, 2) == doctest::Approx(3.0).epsilon(1e-12));

  CHECK_THROWS_AS(borda_weights({"a"}, {"x", "y", "z"}, groups, labels), std::invalid_argument);
  CHECK_THROWS_AS(borda_weights({"a", "a"}, {"x", "y", "z"}, groups, labels),
                  std::invalid_argument);
  CHECK_THROWS_AS(borda_weights({"a", "q"}, {"x", "y", "z"}, groups, labels),
                  std::invalid_argument);
}

TEST_CASE("weight matrices validate and round trip through json") {
  WeightMatrix w;
  w.values.resize(2, 2);
  w.values << 0.5, 0.5, 0.25, 0.75;
  w.normalized = true;
  w.validate();
  auto w2 = WeightMatrix::from_json_text(w.to_json_text());
  CHECK(w2.values.rows() == 2);
  CHECK((w2.values - w.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(w2.normalized == w.normalized);

  WeightMatrix bad;
  bad.values.resize(1, 2);
  bad.values << -0.1, 1.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  WeightMatrix off;
  off.values.resize(1, 2);
  off.values << 0.7, 0.7;
  off.normalized = true;
  CHECK_THROWS_AS(off.validate(), std::invalid_argument);
}

TEST_CASE("model comparison subtracts tensors and aggregates both sides") {
  Eigen::ArrayXXd va(1, 3), vb(1, 3);
  va << 0.9, 0.7, 0.8;
  vb << 0.85, 0.80, 0.80;  // second model is flatter
  auto a = build_tensor(make_grid(va));
  auto b = build_tensor(make_grid(vb));
  a.model_id = "before";
  b.model_id = "after";
  auto cmp = compare_models(a, b, AggregateScheme::max_abs);
  CHECK(cmp.aggregate_a.value == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(cmp.aggregate_b.value == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(cmp.scalar_delta == doctest::Approx(-0.15).epsilon(1e-12));
  CHECK(cmp.delta.values[0](0, 1) == doctest::Approx(0.05 - 0.2).epsilon(1e-12));
  CHECK(cmp.delta.model_id == "before -> after");

  auto c = build_tensor(make_grid(va, MetricId::accuracy));
  CHECK_THROWS_AS(compare_models(a, c, AggregateScheme::max_abs), std::invalid_argument);
  Eigen::ArrayXXd vd(2, 3);
  vd << 0.9, 0.7, 0.8, 0.9, 0.7, 0.8;
  CHECK_THROWS_AS(compare_models(a, build_tensor(make_grid(vd)), AggregateScheme::max_abs),
                  std::invalid_argument);
}

TEST_CASE("grid construction matches the transposed metric table") {
  Rng rng(55);
  const int n = 60;
  Eigen::MatrixXd y(n, 2), p(n, 2);
  std::vector<int> codes(n);
  for (int r = 0; r < n; ++r) {
    codes[r] = static_cast<int>(rng.uniform_int(0, 2));
    for (int k = 0; k < 2; ++k) {
      y(r, k) = rng.u01() < 0.5 ? 1.0 : 0.0;
      p(r, k) = rng.u01() < 0.5 ? 1.0 : 0.0;
    }
  }
  IntersectionIndex idx;
  idx.attribute_names = {"g"};
  idx.attribute_columns = {0};
  idx.attribute_levels = {{"g0", "g1", "g2"}};
  idx.members.resize(3);
  for (int r = 0; r < n; ++r) idx.members[codes[r]].push_back(r);
  for (int g = 0; g < 3; ++g) {
    idx.groups.push_back(GroupKey{{g}});
    idx.below_support.push_back(false);
  }

  auto grid = metric_by_group_and_label(y, p, idx, MetricId::selection_rate, {"l0", "l1"});
  auto table = classification_metric(confusion(y, p, idx, {"l0", "l1"}), MetricId::selection_rate);
  REQUIRE(grid.group_count() == 3);
  REQUIRE(grid.label_count() == 2);
  for (int g = 0; g < 3; ++g)
    for (int k = 0; k < 2; ++k) {
      CHECK(grid.values(g, k) == table.values(k, g));
      CHECK(grid.defined(g, k) == table.defined(k, g));
    }
  CHECK(grid.group_keys[1] == "g1");
  CHECK(grid.label_ids[0] == "l0");
}

TEST_CASE("tensor serializations cover the cells") {
  Eigen::ArrayXXd v(1, 2);
  v << 0.8, 0.5;
  auto t = build_tensor(make_grid(v));
  t.model_id = "demo";
  auto csv = t.to_csv();
  CHECK(csv.find("group,label_a,label_b,value") != std::string::npos);
  CHECK(csv.find("grp0,lab0,lab1,") != std::string::npos);
  auto js = t.to_json_text();
  CHECK(js.find("\"model_id\"") != std::string::npos);
  CHECK(js.find("\"demo\"") != std::string::npos);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fairaudit/dataset.hpp"
#include "fairaudit/learners.hpp"
#include "fairaudit/rng.hpp"

using namespace fairaudit;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int n, int p) {
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  return X;
}

Eigen::VectorXd logistic_labels(Rng& rng, const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                                double alpha) {
  Eigen::VectorXd y(X.rows());
  for (int i = 0; i < X.rows(); ++i) {
    double s = X.row(i).dot(beta) + alpha;
    double p = 1.0 / (1.0 + std::exp(-s));
    y(i) = rng.bernoulli(p) ? 1.0 : 0.0;
  }
  return y;
}

bool non_increasing(const std::vector<double>& trace, double slack = 1e-12) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1] + slack) return false;
  return true;
}

}  // namespace

TEST_CASE("logistic objective at zero is log 2 and proba matches sigmoid") {
  Rng rng(1);
  Eigen::MatrixXd X = random_matrix(rng, 50, 3);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) y(i) = i % 2;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(3);
  CHECK(logistic_objective(X, y, beta, 0.0, 0.0) == doctest::Approx(std::log(2.0)));

  LinearFit manual;
  manual.kind = FitKind::logistic;
  manual.coefficients = Eigen::VectorXd::Constant(1, std::log(3.0));
  manual.intercept = 0.0;
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  CHECK(predict_proba(manual, one)(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(predict_linear(manual, one)(0) == doctest::Approx(std::log(3.0)));
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    int n = 30 + rep * 7, p = 2 + rep % 3;
    Eigen::MatrixXd X = random_matrix(rng, n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta(j) = rng.normal() * 0.8;
    double alpha = rng.normal() * 0.5;
    double l2 = rep % 2 ? 0.3 : 0.0;
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = 0.5 + rng.u01();

    Eigen::VectorXd g = logistic_gradient(X, y, beta, alpha, l2, w);
    const double h = 1e-6;
    auto obj_at = [&](double a, const Eigen::VectorXd& b) {
      return logistic_objective(X, y, b, a, l2, w);
    };
    double fd0 = (obj_at(alpha + h, beta) - obj_at(alpha - h, beta)) / (2 * h);
    CHECK(std::abs(g(0) - fd0) / std::max(1.0, std::abs(fd0)) < 1e-5);
    for (int j = 0; j < p; ++j) {
      Eigen::VectorXd up = beta, dn = beta;
      up(j) += h;
      dn(j) -= h;
      double fd = (obj_at(alpha, up) - obj_at(alpha, dn)) / (2 * h);
      CHECK(std::abs(g(j + 1) - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
    }
  }
}

TEST_CASE("logistic fit recovers planted coefficients") {
  Rng rng(11);
  Eigen::MatrixXd X = random_matrix(rng, 6000, 2);
  Eigen::VectorXd beta(2);
  beta << 1.5, -2.0;
  Eigen::VectorXd y = logistic_labels(rng, X, beta, 0.5);

  LinearFit fit = fit_logistic(X, y);
  CHECK(fit.converged);
  CHECK(non_increasing(fit.objective_trace));
  CHECK(fit.coefficients(0) == doctest::Approx(1.5).epsilon(0.1));
  CHECK(fit.coefficients(1) == doctest::Approx(-2.0).epsilon(0.1));
  CHECK(fit.intercept == doctest::Approx(0.5).epsilon(0.25));
}

TEST_CASE("row weights equal row duplication") {
  Rng rng(13);
  Eigen::MatrixXd X = random_matrix(rng, 60, 2);
  Eigen::VectorXd beta(2);
  beta << 0.8, -0.4;
  Eigen::VectorXd y = logistic_labels(rng, X, beta, 0.0);

  // Duplicate the first 20 rows explicitly.
  Eigen::MatrixXd Xdup(80, 2);
  Eigen::VectorXd ydup(80);
  Xdup.topRows(60) = X;
  ydup.head(60) = y;
  Xdup.bottomRows(20) = X.topRows(20);
  ydup.tail(20) = y.head(20);

  Eigen::VectorXd w = Eigen::VectorXd::Ones(60);
  w.head(20).setConstant(2.0);

  LogisticConfig cfg;
  cfg.tol = 1e-12;
  LinearFit weighted = fit_logistic(X, y, cfg, w);
  LinearFit duplicated = fit_logistic(Xdup, ydup, cfg);
  CHECK((weighted.coefficients - duplicated.coefficients).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(std::abs(weighted.intercept - duplicated.intercept) < 1e-7);
}

TEST_CASE("single-class targets come back flagged, ridge makes them solvable") {
  Rng rng(17);
  Eigen::MatrixXd X = random_matrix(rng, 40, 2);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(40);

  LinearFit sat = fit_logistic(X, ones);
  CHECK_FALSE(sat.converged);
  CHECK(sat.intercept == doctest::Approx(37.0));
  CHECK(predict_proba(sat, X).minCoeff() > 0.999);

  LinearFit satneg = fit_logistic(X, Eigen::VectorXd::Zero(40));
  CHECK(satneg.intercept == doctest::Approx(-37.0));

  LogisticConfig ridge;
  ridge.l2 = 1.0;
  LinearFit reg = fit_logistic(X, ones, ridge);
  CHECK(reg.converged);
  CHECK(predict_proba(reg, X).minCoeff() > 0.5);
}

TEST_CASE("separated data never throws, ridge keeps it exact") {
  Eigen::MatrixXd X(20, 1);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    X(i, 0) = i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
    y(i) = i < 10 ? 0.0 : 1.0;
  }
  LinearFit free = fit_logistic(X, y);
  CHECK(free.coefficients.allFinite());
  CHECK(std::isfinite(free.intercept));
  CHECK(non_increasing(free.objective_trace));

  LogisticConfig ridge;
  ridge.l2 = 0.1;
  LinearFit reg = fit_logistic(X, y, ridge);
  CHECK(reg.converged);
  Eigen::VectorXd p = predict_proba(reg, X);
  for (int i = 0; i < 20; ++i) CHECK((p(i) >= 0.5) == (y(i) == 1.0));
}

TEST_CASE("ols reproduces exact linear data and its covariance formula") {
  Rng rng(19);
  Eigen::MatrixXd X = random_matrix(rng, 50, 2);
  Eigen::VectorXd y = 2.0 + 3.0 * X.col(0).array() - 1.0 * X.col(1).array();

  LinearFit fit = fit_ols(X, y);
  CHECK(fit.intercept == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(fit.coefficients(0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(fit.coefficients(1) == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(fit.residual_variance == doctest::Approx(0.0).scale(1.0).epsilon(1e-16));

  // Noisy case: residuals orthogonal to the design, vcov = s2 * (A'A)^-1.
  Eigen::VectorXd noisy = y;
  for (int i = 0; i < 50; ++i) noisy(i) += rng.normal() * 0.3;
  LinearFit nf = fit_ols(X, noisy);
  Eigen::VectorXd pred = predict_linear(nf, X);
  Eigen::VectorXd resid = noisy - pred;
  CHECK(std::abs(resid.sum()) < 1e-8);
  CHECK((X.transpose() * resid).lpNorm<Eigen::Infinity>() < 1e-8);

  Eigen::MatrixXd A(50, 3);
  A.col(0).setOnes();
  A.col(1) = X.col(0);
  A.col(2) = X.col(1);
  double s2 = resid.squaredNorm() / (50 - 3);
  CHECK(nf.residual_variance == doctest::Approx(s2).epsilon(1e-10));
  Eigen::MatrixXd vcov = s2 * (A.transpose() * A).inverse();
  CHECK((nf.vcov - vcov).lpNorm<Eigen::Infinity>() < 1e-8 * vcov.lpNorm<Eigen::Infinity>() + 1e-12);
}

TEST_CASE("rank-deficient designs name the dependent columns") {
  Rng rng(23);
  Eigen::MatrixXd X = random_matrix(rng, 30, 3);
  X.col(2) = 2.0 * X.col(0) - X.col(1);
  Eigen::VectorXd y = X.col(0);
  try {
    fit_ols(X, y, {"income", "spend", "combo"});
    FAIL("expected an exception");
  } catch (const std::exception& e) {
    std::string msg = e.what();
    CHECK(msg.find("rank deficient") != std::string::npos);
    CHECK(msg.find("combo") != std::string::npos);
  }
  Eigen::MatrixXd small = random_matrix(rng, 3, 3);
  CHECK_THROWS(fit_ols(small, Eigen::VectorXd::Zero(3)));
}

TEST_CASE("lasso path endpoints behave") {
  Rng rng(29);
  Eigen::MatrixXd X = random_matrix(rng, 120, 4);
  Eigen::VectorXd y = 1.0 + 2.0 * X.col(0).array() - 1.5 * X.col(2).array();
  for (int i = 0; i < 120; ++i) y(i) += rng.normal() * 0.2;

  double lmax = lasso_max_lambda(X, y);
  LinearFit at_max = fit_lasso(X, y, lmax * 1.0000001);
  CHECK(at_max.coefficients.lpNorm<Eigen::Infinity>() == 0.0);
  LinearFit below = fit_lasso(X, y, lmax * 0.95);
  CHECK(below.coefficients.lpNorm<Eigen::Infinity>() > 0.0);

  LinearFit at_zero = fit_lasso(X, y, 0.0);
  LinearFit ols = fit_ols(X, y);
  CHECK((at_zero.coefficients - ols.coefficients).lpNorm<Eigen::Infinity>() < 1e-4);
  CHECK(std::abs(at_zero.intercept - ols.intercept) < 1e-4);
  CHECK(non_increasing(at_zero.objective_trace, 1e-10));
}

TEST_CASE("lasso solutions satisfy the stationarity conditions") {
  Rng rng(31);
  Eigen::MatrixXd X = random_matrix(rng, 150, 5);
  Eigen::VectorXd y = 0.5 * X.col(1).array() - 0.9 * X.col(3).array() + 0.3;
  for (int i = 0; i < 150; ++i) y(i) += rng.normal() * 0.4;
  const double lambda = 0.08;
  LinearFit fit = fit_lasso(X, y, lambda);

  // Check on the standardized scale the solver works in.
  const int n = 150;
  Eigen::RowVectorXd mean = X.colwise().mean();
  Eigen::MatrixXd C = X.rowwise() - mean;
  Eigen::VectorXd sd = (C.array().square().colwise().mean()).sqrt();
  Eigen::VectorXd resid = y - predict_linear(fit, X);
  for (int j = 0; j < 5; ++j) {
    double corr = (C.col(j) / sd(j)).dot(resid) / n;
    double bj = fit.coefficients(j) * sd(j);
    if (bj == 0.0)
      CHECK(std::abs(corr) <= lambda + 1e-8);
    else
      CHECK(corr == doctest::Approx(lambda * (bj > 0 ? 1.0 : -1.0)).epsilon(1e-6));
  }

  // No single-coordinate move improves the objective.
  double base = lasso_objective(X, y, fit, lambda);
  for (int j = 0; j < 5; ++j) {
    for (double step : {0.01, -0.01}) {
      LinearFit moved = fit;
      moved.coefficients(j) += step;
      CHECK(lasso_objective(X, y, moved, lambda) >= base - 1e-12);
    }
  }
}

TEST_CASE("multitask lasso keeps one support across tasks and reduces at k=1") {
  Rng rng(37);
  Eigen::MatrixXd X = random_matrix(rng, 100, 6);
  Eigen::MatrixXd Y(100, 3);
  Y.col(0) = 1.2 * X.col(0).array() + 0.5 * X.col(4).array();
  Y.col(1) = -0.7 * X.col(0).array() + 0.9 * X.col(4).array();
  Y.col(2) = 0.4 * X.col(0).array() - 1.1 * X.col(4).array();
  for (int i = 0; i < 100; ++i)
    for (int k = 0; k < 3; ++k) Y(i, k) += rng.normal() * 0.1;

  std::vector<LinearFit> fits = fit_multitask_lasso(X, Y, 0.15);
  REQUIRE(fits.size() == 3);
  for (int j = 0; j < 6; ++j) {
    bool zero0 = fits[0].coefficients(j) == 0.0;
    for (int k = 1; k < 3; ++k) CHECK((fits[k].coefficients(j) == 0.0) == zero0);
  }
  CHECK(fits[0].coefficients(0) != 0.0);
  CHECK(fits[0].coefficients(4) != 0.0);

  Eigen::VectorXd y0 = Y.col(0);
  std::vector<LinearFit> single = fit_multitask_lasso(X, y0, 0.1);
  LinearFit plain = fit_lasso(X, y0, 0.1);
  CHECK((single[0].coefficients - plain.coefficients).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(std::abs(single[0].intercept - plain.intercept) < 1e-10);
}

TEST_CASE("one-hot encoding drops each attribute's first level") {
  Dataset ds;
  ds.task = TaskKind::adoption;
  ds.feature_names = {"x"};
  ds.label_names = {"y"};
  ds.attributes = {ProtectedAttribute{"region", {"east", "west", kUnspecified}}};
  ds.features.resize(4, 1);
  ds.features << 0, 1, 2, 3;
  ds.targets = Eigen::MatrixXd::Zero(4, 1);
  ds.protected_codes.resize(4, 1);
  ds.protected_codes << 0, 1, 2, 1;
  ds.validate();

  DesignBlock block = one_hot(ds, {"region"});
  REQUIRE(block.names == std::vector<std::string>{"region=west", "region=unspecified"});
  CHECK(block.columns(0, 0) == 0.0);
  CHECK(block.columns(1, 0) == 1.0);
  CHECK(block.columns(2, 1) == 1.0);
  CHECK(block.columns(3, 0) == 1.0);
}

TEST_CASE("multilabel model predicts per label and survives JSON") {
  SynthConfig cfg;
  cfg.n = 600;
  cfg.p = 3;
  cfg.k = 2;
  cfg.seed = 5;
  SynthAttribute a;
  a.name = "region";
  a.levels = {"east", "west"};
  a.level_probs = {0.6, 0.4};
  cfg.attributes = {a};
  cfg.label_positive_rates = {0.4, 0.5};
  cfg.feature_effects = {FeatureEffect{0, 0, 1.2}, FeatureEffect{1, 2, -0.8}};
  Dataset ds = generate_synthetic(cfg);

  LogisticConfig lc;
  lc.l2 = 1e-3;
  MultiLabelModel unaware = fit_multilabel(ds, lc, false);
  CHECK(unaware.fits.size() == 2);
  CHECK(unaware.design_names == ds.feature_names);
  MultiLabelModel aware = fit_multilabel(ds, lc, true);
  CHECK(aware.design_names.size() == ds.feature_names.size() + 2);  // west + unspecified

  Eigen::MatrixXd probas = predict_proba_all(unaware, ds);
  CHECK(probas.rows() == ds.rows());
  CHECK(probas.cols() == 2);
  CHECK(probas.minCoeff() >= 0.0);
  CHECK(probas.maxCoeff() <= 1.0);

  MultiLabelModel back = MultiLabelModel::from_json_text(aware.to_json_text());
  CHECK(back.label_names == aware.label_names);
  CHECK(back.design_names == aware.design_names);
  CHECK(back.include_protected == aware.include_protected);
  for (int k = 0; k < 2; ++k) {
    CHECK(back.fits[k].coefficients == aware.fits[k].coefficients);
    CHECK(back.fits[k].intercept == aware.fits[k].intercept);
  }
  Eigen::MatrixXd p1 = predict_proba_all(aware, ds);
  Eigen::MatrixXd p2 = predict_proba_all(back, ds);
  CHECK(p1 == p2);
}

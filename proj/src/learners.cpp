#include "fairaudit/learners.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace fairaudit {

using nlohmann::json;

const char* fit_kind_name(FitKind k) {
  switch (k) {
    case FitKind::logistic: return "logistic";
    case FitKind::ols: return "ols";
    case FitKind::lasso: return "lasso";
    case FitKind::multitask_row: return "multitask_row";
  }
  return "unknown";
}

namespace {

FitKind fit_kind_from_name(const std::string& s) {
  if (s == "logistic") return FitKind::logistic;
  if (s == "ols") return FitKind::ols;
  if (s == "lasso") return FitKind::lasso;
  if (s == "multitask_row") return FitKind::multitask_row;
  throw std::invalid_argument("unknown fit kind '" + s + "'");
}

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + exp(s)) without overflow.
double log1pexp(double s) {
  if (s > 0) return s + std::log1p(std::exp(-s));
  return std::log1p(std::exp(s));
}

void check_xy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  require(X.rows() == y.size(), "X and y row counts differ");
  require(X.rows() >= 2, "need at least 2 rows");
  require(X.cols() >= 1, "need at least one feature column");
}

Eigen::VectorXd resolve_weights(const Eigen::VectorXd& weights, Eigen::Index n) {
  if (weights.size() == 0) return Eigen::VectorXd::Ones(n);
  require(weights.size() == n, "weight vector length differs from row count");
  require((weights.array() >= 0).all(), "negative observation weight");
  require(weights.sum() > 0, "observation weights sum to zero");
  return weights;
}

}  // namespace

double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& beta, double alpha, double l2,
                          const Eigen::VectorXd& weights) {
  check_xy(X, y);
  require(beta.size() == X.cols(), "coefficient length differs from feature count");
  Eigen::VectorXd w = resolve_weights(weights, X.rows());
  Eigen::VectorXd s = (X * beta).array() + alpha;
  double total = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) total += w[i] * (log1pexp(s[i]) - y[i] * s[i]);
  return total / w.sum() + 0.5 * l2 * beta.squaredNorm();
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& beta, double alpha, double l2,
                                  const Eigen::VectorXd& weights) {
  check_xy(X, y);
  require(beta.size() == X.cols(), "coefficient length differs from feature count");
  Eigen::VectorXd w = resolve_weights(weights, X.rows());
  const double wsum = w.sum();
  Eigen::VectorXd s = (X * beta).array() + alpha;
  Eigen::VectorXd resid(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) resid[i] = w[i] * (sigmoid(s[i]) - y[i]);
  Eigen::VectorXd g(X.cols() + 1);
  g[0] = resid.sum() / wsum;
  g.tail(X.cols()) = X.transpose() * resid / wsum + l2 * beta;
  return g;
}

LinearFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const LogisticConfig& cfg, const Eigen::VectorXd& weights) {
  check_xy(X, y);
  require((y.array() == 0.0 || y.array() == 1.0).all(), "logistic targets must be 0/1");
  require(cfg.max_iter >= 1, "max_iter must be positive");
  require(cfg.tol > 0, "tol must be positive");
  require(cfg.l2 >= 0, "l2 must be nonnegative");
  Eigen::VectorXd w = resolve_weights(weights, X.rows());
  const double wsum = w.sum();
  const Eigen::Index p = X.cols();

  LinearFit fit;
  fit.kind = FitKind::logistic;
  fit.lambda = cfg.l2;
  fit.coefficients = Eigen::VectorXd::Zero(p);
  fit.intercept = 0.0;

  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (w[i] == 0) continue;
    (y[i] == 1.0 ? has_pos : has_neg) = true;
  }
  if (!(has_pos && has_neg) && cfg.l2 == 0.0) {
    // Saturated maximum: probabilities pinned to the single class. Returned
    // as a flagged fit so callers with rare labels keep going.
    fit.intercept = has_pos ? 37.0 : -37.0;
    fit.converged = false;
    fit.iterations = 0;
    fit.objective_trace.push_back(
        logistic_objective(X, y, fit.coefficients, fit.intercept, cfg.l2, w));
    return fit;
  }

  double obj = logistic_objective(X, y, fit.coefficients, fit.intercept, cfg.l2, w);
  fit.objective_trace.push_back(obj);

  int iter = 0;
  bool done = false;
  for (; iter < cfg.max_iter && !done; ++iter) {
    Eigen::VectorXd g = logistic_gradient(X, y, fit.coefficients, fit.intercept, cfg.l2, w);
    if (g.lpNorm<Eigen::Infinity>() < cfg.tol) {
      done = true;
      break;
    }

    // Newton direction on the intercept-augmented system.
    Eigen::VectorXd s = (X * fit.coefficients).array() + fit.intercept;
    Eigen::VectorXd d(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      double pi = sigmoid(s[i]);
      d[i] = w[i] * pi * (1.0 - pi) / wsum;
    }
    Eigen::MatrixXd H(p + 1, p + 1);
    H(0, 0) = d.sum();
    H.block(0, 1, 1, p) = (d.transpose() * X);
    H.block(1, 0, p, 1) = H.block(0, 1, 1, p).transpose();
    H.block(1, 1, p, p) = X.transpose() * d.asDiagonal() * X;
    H.block(1, 1, p, p).diagonal().array() += cfg.l2;

    Eigen::VectorXd step = H.ldlt().solve(-g);
    if (!step.allFinite()) step = -g;  // degenerate Hessian: damped gradient

    // Halve until the objective stops increasing.
    double t = 1.0;
    double cand_obj = 0;
    Eigen::VectorXd cand_beta;
    double cand_alpha = 0;
    bool improved = false;
    for (int halving = 0; halving < 50; ++halving) {
      cand_alpha = fit.intercept + t * step[0];
      cand_beta = fit.coefficients + t * step.tail(p);
      cand_obj = logistic_objective(X, y, cand_beta, cand_alpha, cfg.l2, w);
      if (cand_obj <= obj) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;  // stalled; flag below via gradient test
    fit.intercept = cand_alpha;
    fit.coefficients = cand_beta;
    obj = cand_obj;
    fit.objective_trace.push_back(obj);
  }

  Eigen::VectorXd g = logistic_gradient(X, y, fit.coefficients, fit.intercept, cfg.l2, w);
  fit.converged = g.lpNorm<Eigen::Infinity>() < cfg.tol;
  fit.iterations = iter;
  return fit;
}

Eigen::VectorXd predict_proba(const LinearFit& fit, const Eigen::MatrixXd& X) {
  require(X.cols() == fit.coefficients.size(), "feature count differs from fitted model");
  Eigen::VectorXd s = (X * fit.coefficients).array() + fit.intercept;
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = sigmoid(s[i]);
  return s;
}

Eigen::VectorXd predict_linear(const LinearFit& fit, const Eigen::MatrixXd& X) {
  require(X.cols() == fit.coefficients.size(), "feature count differs from fitted model");
  return ((X * fit.coefficients).array() + fit.intercept).matrix();
}

namespace {

// Sequential Gram-Schmidt rank screen; returns indices of columns that are
// (numerically) linear combinations of earlier columns of A.
std::vector<int> dependent_columns(const Eigen::MatrixXd& A) {
  std::vector<int> dependent;
  Eigen::MatrixXd basis(A.rows(), A.cols());
  int r = 0;
  for (int j = 0; j < A.cols(); ++j) {
    Eigen::VectorXd v = A.col(j);
    const double scale = std::max(v.norm(), 1.0);
    for (int pass = 0; pass < 2; ++pass)
      for (int b = 0; b < r; ++b) v -= basis.col(b).dot(v) * basis.col(b);
    if (v.norm() <= 1e-10 * scale) {
      dependent.push_back(j);
    } else {
      basis.col(r) = v / v.norm();
      ++r;
    }
  }
  return dependent;
}

}  // namespace

LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& column_names) {
  check_xy(X, y);
  const Eigen::Index n = X.rows(), p = X.cols();
  require(n > p + 1, "need n > p + 1 rows for least squares with intercept");

  Eigen::MatrixXd A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;

  std::vector<int> dep = dependent_columns(A);
  if (!dep.empty()) {
    std::string msg = "design is rank deficient; dependent column(s):";
    for (int j : dep) {
      if (j == 0) {
        msg += " intercept";
      } else if (static_cast<std::size_t>(j - 1) < column_names.size()) {
        msg += " '" + column_names[j - 1] + "'";
      } else {
        msg += " x" + std::to_string(j);  // 1-based feature position
      }
    }
    throw std::runtime_error(msg);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::VectorXd theta = qr.solve(y);
  Eigen::VectorXd resid = y - A * theta;
  double rss = resid.squaredNorm();

  LinearFit fit;
  fit.kind = FitKind::ols;
  fit.intercept = theta[0];
  fit.coefficients = theta.tail(p);
  fit.iterations = 1;
  fit.converged = true;
  fit.residual_variance = rss / static_cast<double>(n - p - 1);
  Eigen::MatrixXd gram = A.transpose() * A;
  fit.vcov = fit.residual_variance *
             gram.ldlt().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
  // Symmetrize away solve round-off.
  fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose()).eval();
  return fit;
}

namespace {

struct Standardized {
  Eigen::MatrixXd cols;     // centered, unit population sd (constant cols zeroed)
  Eigen::VectorXd mean, sd;  // original-scale stats; sd 0 marks a skipped column
};

Standardized standardize(const Eigen::MatrixXd& X) {
  Standardized s;
  s.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  s.sd = centered.array().square().colwise().mean().sqrt();
  s.cols.resize(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    s.cols.col(j) = s.sd[j] > 0 ? (centered.col(j) / s.sd[j]).eval()
                                : Eigen::VectorXd::Zero(X.rows()).eval();
  return s;
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

double lasso_max_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  check_xy(X, y);
  Standardized s = standardize(X);
  Eigen::VectorXd yc = y.array() - y.mean();
  return (s.cols.transpose() * yc).lpNorm<Eigen::Infinity>() / static_cast<double>(X.rows());
}

LinearFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                    const LassoConfig& cfg) {
  check_xy(X, y);
  require(lambda >= 0, "lambda must be nonnegative");
  require(cfg.max_sweeps >= 1, "max_sweeps must be positive");
  const Eigen::Index n = X.rows(), p = X.cols();

  Standardized s = standardize(X);
  const double ymean = y.mean();
  Eigen::VectorXd r = y.array() - ymean;  // residual with beta = 0

  LinearFit fit;
  fit.kind = FitKind::lasso;
  fit.lambda = lambda;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);

  auto objective = [&] {
    return 0.5 * r.squaredNorm() / static_cast<double>(n) + lambda * beta.lpNorm<1>();
  };
  fit.objective_trace.push_back(objective());

  int sweep = 0;
  bool converged = false;
  for (; sweep < cfg.max_sweeps; ++sweep) {
    double max_delta = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.sd[j] == 0) continue;  // constant column stays at zero
      double z = beta[j] + s.cols.col(j).dot(r) / static_cast<double>(n);
      double nb = soft_threshold(z, lambda);
      if (nb != beta[j]) {
        r -= s.cols.col(j) * (nb - beta[j]);
        max_delta = std::max(max_delta, std::abs(nb - beta[j]));
        beta[j] = nb;
      }
    }
    fit.objective_trace.push_back(objective());
    if (max_delta < cfg.tol) {
      converged = true;
      ++sweep;
      break;
    }
  }
  fit.converged = converged;
  fit.iterations = sweep;

  fit.coefficients.resize(p);
  for (Eigen::Index j = 0; j < p; ++j)
    fit.coefficients[j] = s.sd[j] > 0 ? beta[j] / s.sd[j] : 0.0;
  fit.intercept = ymean - fit.coefficients.dot(s.mean);
  return fit;
}

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const LinearFit& fit, double lambda) {
  check_xy(X, y);
  Eigen::VectorXd resid = y - predict_linear(fit, X);
  Standardized s = standardize(X);
  double penalty = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    penalty += std::abs(fit.coefficients[j] * s.sd[j]);
  return 0.5 * resid.squaredNorm() / static_cast<double>(X.rows()) + lambda * penalty;
}

std::vector<LinearFit> fit_multitask_lasso(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                           double lambda, const LassoConfig& cfg) {
  require(X.rows() == Y.rows(), "X and Y row counts differ");
  require(X.rows() >= 2, "need at least 2 rows");
  require(X.cols() >= 1 && Y.cols() >= 1, "need at least one feature and one task");
  require(lambda >= 0, "lambda must be nonnegative");
  const Eigen::Index n = X.rows(), p = X.cols(), k = Y.cols();

  Standardized s = standardize(X);
  Eigen::RowVectorXd ymean = Y.colwise().mean();
  Eigen::MatrixXd R = Y.rowwise() - ymean;  // residual with B = 0
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, k);

  std::vector<double> trace;
  auto objective = [&] {
    double penalty = 0;
    for (Eigen::Index j = 0; j < p; ++j) penalty += B.row(j).norm();
    return 0.5 * R.squaredNorm() / static_cast<double>(n) + lambda * penalty;
  };
  trace.push_back(objective());

  int sweep = 0;
  bool converged = false;
  for (; sweep < cfg.max_sweeps; ++sweep) {
    double max_delta = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.sd[j] == 0) continue;
      Eigen::RowVectorXd rho = B.row(j) + s.cols.col(j).transpose() * R / static_cast<double>(n);
      double nrm = rho.norm();
      Eigen::RowVectorXd nb = nrm > lambda ? ((1.0 - lambda / nrm) * rho).eval()
                                           : Eigen::RowVectorXd::Zero(k).eval();
      Eigen::RowVectorXd delta = nb - B.row(j);
      if (delta.lpNorm<Eigen::Infinity>() > 0) {
        R -= s.cols.col(j) * delta;
        max_delta = std::max(max_delta, delta.lpNorm<Eigen::Infinity>());
        B.row(j) = nb;
      }
    }
    trace.push_back(objective());
    if (max_delta < cfg.tol) {
      converged = true;
      ++sweep;
      break;
    }
  }

  std::vector<LinearFit> fits(k);
  for (Eigen::Index t = 0; t < k; ++t) {
    LinearFit& fit = fits[t];
    fit.kind = FitKind::multitask_row;
    fit.lambda = lambda;
    fit.converged = converged;
    fit.iterations = sweep;
    fit.objective_trace = trace;
    fit.coefficients.resize(p);
    for (Eigen::Index j = 0; j < p; ++j)
      fit.coefficients[j] = s.sd[j] > 0 ? B(j, t) / s.sd[j] : 0.0;
    fit.intercept = ymean[t] - fit.coefficients.dot(s.mean);
  }
  return fits;
}

DesignBlock one_hot(const Dataset& ds, const std::vector<std::string>& attrs) {
  DesignBlock block;
  std::vector<Eigen::VectorXd> cols;
  for (const auto& name : attrs) {
    int col = ds.attribute_column(name);
    require(col >= 0, "unknown protected attribute '" + name + "'");
    const auto& levels = ds.attributes[col].levels;
    // First declared level is the dropped reference.
    for (std::size_t lvl = 1; lvl < levels.size(); ++lvl) {
      Eigen::VectorXd v(ds.rows());
      for (int i = 0; i < ds.rows(); ++i)
        v[i] = ds.protected_codes(i, col) == static_cast<int>(lvl) ? 1.0 : 0.0;
      cols.push_back(std::move(v));
      block.names.push_back(name + "=" + levels[lvl]);
    }
  }
  block.columns.resize(ds.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) block.columns.col(j) = cols[j];
  return block;
}

Eigen::MatrixXd model_design(const MultiLabelModel& model, const Dataset& ds) {
  Eigen::MatrixXd design;
  if (model.include_protected) {
    DesignBlock block = one_hot(ds, model.encoded_attributes);
    design.resize(ds.rows(), ds.feature_count() + block.columns.cols());
    design.leftCols(ds.feature_count()) = ds.features;
    design.rightCols(block.columns.cols()) = block.columns;
  } else {
    design = ds.features;
  }
  require(design.cols() == static_cast<Eigen::Index>(model.design_names.size()),
          "dataset does not match the model's design columns");
  return design;
}

Eigen::MatrixXd predict_proba_all(const MultiLabelModel& model, const Dataset& ds) {
  Eigen::MatrixXd design = model_design(model, ds);
  Eigen::MatrixXd probas(ds.rows(), static_cast<Eigen::Index>(model.fits.size()));
  for (std::size_t k = 0; k < model.fits.size(); ++k)
    probas.col(static_cast<Eigen::Index>(k)) = predict_proba(model.fits[k], design);
  return probas;
}

MultiLabelModel fit_multilabel(const Dataset& ds, const LogisticConfig& cfg,
                               bool include_protected) {
  require(ds.task == TaskKind::adoption, "multi-label logistic training needs adoption flags");
  MultiLabelModel model;
  model.task = ds.task;
  model.include_protected = include_protected;
  model.label_names = ds.label_names;
  model.design_names = ds.feature_names;

  Eigen::MatrixXd design = ds.features;
  if (include_protected) {
    for (const auto& a : ds.attributes) model.encoded_attributes.push_back(a.name);
    DesignBlock block = one_hot(ds, model.encoded_attributes);
    Eigen::MatrixXd full(ds.rows(), design.cols() + block.columns.cols());
    full.leftCols(design.cols()) = design;
    full.rightCols(block.columns.cols()) = block.columns;
    design = std::move(full);
    model.design_names.insert(model.design_names.end(), block.names.begin(), block.names.end());
  }

  for (int k = 0; k < ds.label_count(); ++k) {
    try {
      model.fits.push_back(fit_logistic(design, ds.targets.col(k), cfg));
    } catch (const std::exception& e) {
      throw std::runtime_error("label '" + ds.label_names[k] + "': " + e.what());
    }
  }
  return model;
}

std::string MultiLabelModel::to_json_text() const {
  json j;
  j["model_version"] = 1;
  j["task"] = task_name(task);
  j["include_protected"] = include_protected;
  j["design"] = design_names;
  j["encoded_attributes"] = encoded_attributes;
  json labels = json::array();
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const LinearFit& f = fits[k];
    json lf;
    lf["name"] = label_names[k];
    lf["kind"] = fit_kind_name(f.kind);
    lf["coefficients"] = std::vector<double>(f.coefficients.data(),
                                             f.coefficients.data() + f.coefficients.size());
    lf["intercept"] = f.intercept;
    lf["converged"] = f.converged;
    lf["iterations"] = f.iterations;
    lf["lambda"] = f.lambda;
    labels.push_back(lf);
  }
  j["labels"] = labels;
  return j.dump(2);
}

MultiLabelModel MultiLabelModel::from_json_text(const std::string& text) {
  json j = json::parse(text);
  require(j.value("model_version", 0) == 1, "unsupported model_version");
  MultiLabelModel m;
  m.task = task_from_name(j.at("task").get<std::string>());
  m.include_protected = j.value("include_protected", false);
  m.design_names = j.at("design").get<std::vector<std::string>>();
  if (j.contains("encoded_attributes"))
    m.encoded_attributes = j["encoded_attributes"].get<std::vector<std::string>>();
  for (const auto& lf : j.at("labels")) {
    LinearFit f;
    f.kind = fit_kind_from_name(lf.value("kind", "logistic"));
    std::vector<double> coefs = lf.at("coefficients").get<std::vector<double>>();
    f.coefficients = Eigen::Map<Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
    f.intercept = lf.at("intercept").get<double>();
    f.converged = lf.value("converged", true);
    f.iterations = lf.value("iterations", 0);
    f.lambda = lf.value("lambda", 0.0);
    require(f.coefficients.size() == static_cast<Eigen::Index>(m.design_names.size()),
            "model coefficients do not match the design");
    m.fits.push_back(std::move(f));
    m.label_names.push_back(lf.at("name").get<std::string>());
  }
  return m;
}

}  // namespace fairaudit

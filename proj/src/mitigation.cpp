#include "fairaudit/mitigation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "fairaudit/common.hpp"
#include "fairaudit/rng.hpp"

namespace fairaudit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Share of scores at or above t.
double rate_at(const std::vector<double>& sorted_scores, double t) {
  auto it = std::lower_bound(sorted_scores.begin(), sorted_scores.end(), t);
  return static_cast<double>(sorted_scores.end() - it) / static_cast<double>(sorted_scores.size());
}

struct Outcome {
  double rate;
  double threshold;
};

// Every selection set a threshold can produce on this score list, each
// represented by the midpoint threshold between adjacent distinct scores (the
// most perturbation-tolerant choice), ordered by ascending rate.
std::vector<Outcome> achievable_outcomes(const std::vector<double>& sorted_scores) {
  std::vector<double> uniq;
  for (double s : sorted_scores)
    if (uniq.empty() || s != uniq.back()) uniq.push_back(s);
  const double n = static_cast<double>(sorted_scores.size());
  std::vector<Outcome> out;
  if (uniq.back() < 1.0)
    out.push_back({0.0, (uniq.back() + 1.0) / 2.0});
  for (std::size_t i = uniq.size(); i-- > 0;) {
    auto it = std::lower_bound(sorted_scores.begin(), sorted_scores.end(), uniq[i]);
    double rate = static_cast<double>(sorted_scores.end() - it) / n;
    double threshold = i == 0 ? uniq[0] / 2.0 : (uniq[i - 1] + uniq[i]) / 2.0;
    out.push_back({rate, threshold});
  }
  return out;
}

// Outcome with rate closest to target; ties pick the lower rate (the more
// conservative threshold).
const Outcome& nearest_outcome(const std::vector<Outcome>& outs, double target) {
  auto it = std::lower_bound(outs.begin(), outs.end(), target,
                             [](const Outcome& o, double t) { return o.rate < t; });
  if (it == outs.end()) return outs.back();
  if (it == outs.begin()) return *it;
  const Outcome& hi = *it;
  const Outcome& lo = *(it - 1);
  return (target - lo.rate) <= (hi.rate - target) ? lo : hi;
}

}  // namespace

const char* threshold_criterion_name(ThresholdCriterion c) {
  return c == ThresholdCriterion::equal_selection_rate ? "equal_selection_rate" : "equal_tpr";
}

ThresholdCriterion threshold_criterion_from_name(const std::string& name) {
  if (name == "equal_selection_rate" || name == "selection_rate")
    return ThresholdCriterion::equal_selection_rate;
  if (name == "equal_tpr" || name == "tpr") return ThresholdCriterion::equal_tpr;
  throw std::invalid_argument("unknown threshold criterion: " + name);
}

ThresholdPolicy fit_thresholds(const Eigen::MatrixXd& probas, const Eigen::MatrixXd& targets,
                               const IntersectionIndex& idx, ThresholdCriterion criterion,
                               double tol, const std::vector<std::string>& label_names) {
  const int n = static_cast<int>(probas.rows());
  const int k = static_cast<int>(probas.cols());
  const int g = idx.group_count();
  require(targets.rows() == n && targets.cols() == k, "probas and targets shapes differ");
  require(g >= 1, "no groups to equalize over");
  require(tol >= 0, "tol must be nonnegative");
  require(label_names.empty() || static_cast<int>(label_names.size()) == k,
          "label_names length must match the label count");

  ThresholdPolicy policy;
  policy.criterion = criterion;
  policy.tol = tol;
  policy.default_threshold = 0.5;
  for (int l = 0; l < k; ++l)
    policy.labels.push_back(label_names.empty() ? "label_" + std::to_string(l) : label_names[l]);
  for (int j = 0; j < g; ++j) policy.groups.push_back(idx.group_name(j));
  policy.thresholds = Eigen::ArrayXXd::Constant(k, g, policy.default_threshold);
  policy.residual_gap = Eigen::ArrayXd::Zero(k);
  policy.excluded.assign(k, std::vector<bool>(g, false));

  for (int l = 0; l < k; ++l) {
    std::vector<std::vector<double>> scores(g);
    std::vector<int> usable;
    for (int j = 0; j < g; ++j) {
      for (int row : idx.members[j]) {
        if (criterion == ThresholdCriterion::equal_tpr && targets(row, l) != 1.0) continue;
        scores[j].push_back(probas(row, l));
      }
      if (scores[j].empty()) {
        policy.excluded[l][j] = true;
        continue;
      }
      std::sort(scores[j].begin(), scores[j].end());
      usable.push_back(j);
    }
    if (usable.size() < 2) continue;

    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (int j : usable) {
      double r = rate_at(scores[j], policy.default_threshold);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      sum += r;
    }
    if (hi - lo <= tol) {
      policy.residual_gap(l) = hi - lo;
      continue;
    }
    const double anchor = sum / static_cast<double>(usable.size());

    std::vector<std::vector<Outcome>> outcomes(g);
    std::vector<double> candidates;
    for (int j : usable) {
      outcomes[j] = achievable_outcomes(scores[j]);
      for (const Outcome& o : outcomes[j]) candidates.push_back(o.rate);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    double best_range = std::numeric_limits<double>::infinity();
    double best_dist = 0, best_target = 0;
    std::vector<double> best_thresholds;
    std::vector<double> thresholds(g, policy.default_threshold);
    for (double target : candidates) {
      double rmin = 1.0, rmax = 0.0;
      for (int j : usable) {
        const Outcome& o = nearest_outcome(outcomes[j], target);
        thresholds[j] = o.threshold;
        rmin = std::min(rmin, o.rate);
        rmax = std::max(rmax, o.rate);
      }
      double range = rmax - rmin;
      double dist = std::abs(target - anchor);
      bool better = range < best_range ||
                    (range == best_range &&
                     (dist < best_dist || (dist == best_dist && target < best_target)));
      if (better) {
        best_range = range;
        best_dist = dist;
        best_target = target;
        best_thresholds = thresholds;
      }
    }
    for (int j : usable) policy.thresholds(l, j) = best_thresholds[j];
    policy.residual_gap(l) = best_range;
  }
  return policy;
}

Eigen::MatrixXd apply_thresholds(const Eigen::MatrixXd& probas, const IntersectionIndex& idx,
                                 const ThresholdPolicy& policy) {
  const int n = static_cast<int>(probas.rows());
  const int k = static_cast<int>(probas.cols());
  require(k == static_cast<int>(policy.labels.size()),
          "probas label count does not match the policy");

  std::unordered_map<std::string, int> column;
  for (std::size_t j = 0; j < policy.groups.size(); ++j)
    column[policy.groups[j]] = static_cast<int>(j);
  std::vector<int> policy_col(idx.group_count(), -1);
  for (int j = 0; j < idx.group_count(); ++j) {
    auto it = column.find(idx.group_name(j));
    if (it != column.end()) {
      policy_col[j] = it->second;
    } else if (!std::isfinite(policy.default_threshold)) {
      throw std::runtime_error("group '" + idx.group_name(j) +
                               "' is not covered by the threshold policy and no default "
                               "threshold is set");
    }
  }

  std::vector<int> gid = idx.group_of_rows(n);
  Eigen::MatrixXd preds(n, k);
  for (int i = 0; i < n; ++i) {
    int col = gid[i] >= 0 ? policy_col[gid[i]] : -1;
    for (int l = 0; l < k; ++l) {
      double t = col >= 0 ? policy.thresholds(l, col) : policy.default_threshold;
      preds(i, l) = probas(i, l) >= t ? 1.0 : 0.0;
    }
  }
  return preds;
}

std::string ThresholdPolicy::to_json_text() const {
  nlohmann::json j;
  j["policy_version"] = 1;
  j["criterion"] = threshold_criterion_name(criterion);
  j["labels"] = labels;
  j["groups"] = groups;
  j["default_threshold"] = default_threshold;
  j["tol"] = tol;
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json excl = nlohmann::json::array();
  for (int l = 0; l < thresholds.rows(); ++l) {
    nlohmann::json row = nlohmann::json::array();
    nlohmann::json erow = nlohmann::json::array();
    for (int g = 0; g < thresholds.cols(); ++g) {
      row.push_back(thresholds(l, g));
      erow.push_back(static_cast<bool>(excluded[l][g]));
    }
    rows.push_back(row);
    excl.push_back(erow);
  }
  j["thresholds"] = rows;
  j["excluded"] = excl;
  nlohmann::json gaps = nlohmann::json::array();
  for (int l = 0; l < residual_gap.size(); ++l) gaps.push_back(residual_gap(l));
  j["residual_gap"] = gaps;
  return j.dump(2);
}

ThresholdPolicy ThresholdPolicy::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ThresholdPolicy p;
  p.criterion = threshold_criterion_from_name(j.at("criterion").get<std::string>());
  p.labels = j.at("labels").get<std::vector<std::string>>();
  p.groups = j.at("groups").get<std::vector<std::string>>();
  p.default_threshold = j.at("default_threshold").get<double>();
  p.tol = j.at("tol").get<double>();
  const int k = static_cast<int>(p.labels.size());
  const int g = static_cast<int>(p.groups.size());
  p.thresholds.resize(k, g);
  p.excluded.assign(k, std::vector<bool>(g, false));
  const auto& rows = j.at("thresholds");
  const auto& excl = j.at("excluded");
  require(static_cast<int>(rows.size()) == k && static_cast<int>(excl.size()) == k,
          "threshold policy JSON has inconsistent shapes");
  for (int l = 0; l < k; ++l) {
    require(static_cast<int>(rows[l].size()) == g && static_cast<int>(excl[l].size()) == g,
            "threshold policy JSON has inconsistent shapes");
    for (int c = 0; c < g; ++c) {
      p.thresholds(l, c) = rows[l][c].get<double>();
      p.excluded[l][c] = excl[l][c].get<bool>();
    }
  }
  p.residual_gap.resize(k);
  const auto& gaps = j.at("residual_gap");
  require(static_cast<int>(gaps.size()) == k, "threshold policy JSON has inconsistent shapes");
  for (int l = 0; l < k; ++l) p.residual_gap(l) = gaps[l].get<double>();
  return p;
}

const char* fairness_constraint_name(FairnessConstraint c) {
  return c == FairnessConstraint::demographic_parity ? "demographic_parity" : "equalized_odds";
}

FairnessConstraint fairness_constraint_from_name(const std::string& name) {
  if (name == "demographic_parity" || name == "dp") return FairnessConstraint::demographic_parity;
  if (name == "equalized_odds" || name == "eo") return FairnessConstraint::equalized_odds;
  throw std::invalid_argument("unknown fairness constraint: " + name);
}

namespace {

// Signed constraint rows: row j holds m_j with gap_j(d) = m_j . d, and the
// constraint reads m_j . d <= eps. Groups come in +/- pairs so the maximum
// signed gap equals the maximum absolute deviation from the slice mean.
Eigen::MatrixXd constraint_moments(const Eigen::VectorXd& y, const std::vector<int>& group,
                                   int n_groups, FairnessConstraint constraint) {
  const int n = static_cast<int>(y.size());
  require(static_cast<int>(group.size()) == n, "group vector length does not match rows");
  require(n_groups >= 1, "need at least one group");
  for (int gi : group) require(gi >= 0 && gi < n_groups, "group code out of range");

  std::vector<Eigen::VectorXd> rows;
  auto add_pair = [&](const std::vector<int>& cell, const std::vector<int>& slice) {
    if (cell.empty() || slice.empty()) return;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    for (int i : cell) m(i) += 1.0 / static_cast<double>(cell.size());
    for (int i : slice) m(i) -= 1.0 / static_cast<double>(slice.size());
    rows.push_back(m);
    rows.push_back(-m);
  };

  if (constraint == FairnessConstraint::demographic_parity) {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    std::vector<std::vector<int>> cells(n_groups);
    for (int i = 0; i < n; ++i) cells[group[i]].push_back(i);
    for (int a = 0; a < n_groups; ++a) add_pair(cells[a], all);
  } else {
    for (int v = 0; v <= 1; ++v) {
      std::vector<int> slice;
      for (int i = 0; i < n; ++i)
        if (y(i) == static_cast<double>(v)) slice.push_back(i);
      if (slice.empty()) continue;
      std::vector<std::vector<int>> cells(n_groups);
      for (int i : slice) cells[group[i]].push_back(i);
      for (int a = 0; a < n_groups; ++a) add_pair(cells[a], slice);
    }
  }
  Eigen::MatrixXd M(static_cast<int>(rows.size()), n);
  for (std::size_t j = 0; j < rows.size(); ++j) M.row(static_cast<int>(j)) = rows[j];
  return M;
}

// Expected 0/1 error of a (possibly fractional) decision vector.
double expected_error(const Eigen::VectorXd& q, const Eigen::VectorXd& y) {
  double s = 0;
  for (int i = 0; i < q.size(); ++i) s += y(i) == 1.0 ? 1.0 - q(i) : q(i);
  return s / static_cast<double>(q.size());
}

// Cost-sensitive best response: minimizing sum_i c_i h_i over logistic
// classifiers is weighted classification with target 1{c_i < 0} and weight
// |c_i|.
LinearFit best_response(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& cost, const LogisticConfig& cfg) {
  const int n = static_cast<int>(cost.size());
  Eigen::VectorXd z(n), w(n);
  double wsum = 0;
  for (int i = 0; i < n; ++i) {
    z(i) = cost(i) < 0 ? 1.0 : 0.0;
    w(i) = std::abs(cost(i));
    wsum += w(i);
  }
  if (wsum <= 0) return fit_logistic(X, y, cfg);
  return fit_logistic(X, z, cfg, w);
}

Eigen::VectorXd decisions_of(const LinearFit& fit, const Eigen::MatrixXd& X) {
  Eigen::VectorXd p = predict_proba(fit, X);
  Eigen::VectorXd d(p.size());
  for (int i = 0; i < p.size(); ++i) d(i) = p(i) >= 0.5 ? 1.0 : 0.0;
  return d;
}

}  // namespace

double constraint_violation(const Eigen::VectorXd& decisions, const Eigen::VectorXd& y,
                            const std::vector<int>& group, int n_groups,
                            FairnessConstraint constraint) {
  Eigen::MatrixXd M = constraint_moments(y, group, n_groups, constraint);
  if (M.rows() == 0) return 0.0;
  return (M * decisions).maxCoeff();
}

Eigen::VectorXd mixture_scores(const RandomizedClassifier& rc, const Eigen::MatrixXd& X) {
  require(!rc.components.empty(), "mixture has no components");
  require(rc.weights.size() == static_cast<Eigen::Index>(rc.components.size()),
          "mixture weights do not match components");
  Eigen::VectorXd score = Eigen::VectorXd::Zero(X.rows());
  for (std::size_t t = 0; t < rc.components.size(); ++t)
    score += rc.weights(static_cast<int>(t)) * decisions_of(rc.components[t], X);
  return score;
}

Eigen::VectorXd mixture_decisions(const RandomizedClassifier& rc, const Eigen::MatrixXd& X) {
  Eigen::VectorXd s = mixture_scores(rc, X);
  Eigen::VectorXd d(s.size());
  for (int i = 0; i < s.size(); ++i) d(i) = s(i) >= 0.5 ? 1.0 : 0.0;
  return d;
}

RandomizedClassifier exponentiated_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                            const std::vector<int>& group, int n_groups,
                                            FairnessConstraint constraint, const EgrConfig& cfg) {
  const int n = static_cast<int>(X.rows());
  require(y.size() == n, "X and y row counts differ");
  require(cfg.epsilon > 0, "epsilon must be positive");
  require(cfg.max_iter >= 1, "max_iter must be at least 1");
  for (int i = 0; i < n; ++i)
    require(y(i) == 0.0 || y(i) == 1.0, "targets must be binary for constrained training");

  const Eigen::MatrixXd M = constraint_moments(y, group, n_groups, constraint);
  const int J = static_cast<int>(M.rows());
  const double B = 1.0 / cfg.epsilon;
  const double eta = cfg.learning_rate > 0
                         ? cfg.learning_rate
                         : 2.0 * std::log(static_cast<double>(std::max(J, 2))) /
                               std::sqrt(static_cast<double>(cfg.max_iter));

  Eigen::VectorXd base_cost(n);
  for (int i = 0; i < n; ++i) base_cost(i) = (1.0 - 2.0 * y(i)) / static_cast<double>(n);

  RandomizedClassifier rc;
  rc.constraint = constraint;
  rc.epsilon = cfg.epsilon;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(J);
  Eigen::VectorXd lambda_sum = Eigen::VectorXd::Zero(J);
  Eigen::VectorXd q_sum = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::VectorXd> decisions;
  double best_gap = std::numeric_limits<double>::infinity();
  double best_iterate_gap = std::numeric_limits<double>::infinity();
  int best_t = 0;

  auto lagrangian = [&](const Eigen::VectorXd& q, const Eigen::VectorXd& lam) {
    double val = expected_error(q, y);
    if (J > 0) val += lam.dot(M * q - Eigen::VectorXd::Constant(J, cfg.epsilon));
    return val;
  };

  for (int t = 1; t <= cfg.max_iter; ++t) {
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(J);
    if (t > 1 && J > 0) {
      // Multipliers live on the scaled simplex {|lambda|_1 <= B}; the extra
      // unit in the denominator is the slack coordinate.
      Eigen::ArrayXd e = theta.array().exp();
      lambda = (B * e / (1.0 + e.sum())).matrix();
    }
    Eigen::VectorXd cost = base_cost;
    if (J > 0) cost += M.transpose() * lambda;
    LinearFit fit = best_response(X, y, cost, cfg.base);
    Eigen::VectorXd d = decisions_of(fit, X);
    rc.components.push_back(std::move(fit));
    decisions.push_back(d);
    q_sum += d;
    lambda_sum += lambda;

    if (J > 0) theta += eta * (M * d - Eigen::VectorXd::Constant(J, cfg.epsilon));

    Eigen::VectorXd q_bar = q_sum / static_cast<double>(t);
    Eigen::VectorXd lam_bar = lambda_sum / static_cast<double>(t);
    double viol = J > 0 ? (M * q_bar).maxCoeff() : 0.0;

    // Lagrangian gap of (q_bar, lam_bar): how far each player is from its
    // best response to the other.
    double l_cur = lagrangian(q_bar, lam_bar);
    double l_max = expected_error(q_bar, y) + (J > 0 ? B * std::max(0.0, viol - cfg.epsilon) : 0.0);
    Eigen::VectorXd cost_bar = base_cost;
    if (J > 0) cost_bar += M.transpose() * lam_bar;
    double l_min = lagrangian(decisions_of(best_response(X, y, cost_bar, cfg.base), X), lam_bar);
    double gap = std::max(l_max - l_cur, l_cur - l_min);

    // Per-round Lagrangian gap of (d, lambda): d already best-responds to
    // lambda, so only the dual player's shortfall remains.
    double primal = expected_error(d, y) +
                    (J > 0 ? B * std::max(0.0, (M * d).maxCoeff() - cfg.epsilon) : 0.0);
    double iterate_gap = primal - lagrangian(d, lambda);
    if (iterate_gap < best_iterate_gap) {
      best_iterate_gap = iterate_gap;
      best_t = t - 1;
    }
    best_gap = std::min(best_gap, gap);
    rc.trace.push_back({t, viol, gap, best_gap});
    if (gap <= cfg.nu_tol) {
      rc.converged = true;
      break;
    }
  }
  if (!rc.trace.empty() && rc.trace.back().gap <= cfg.nu_tol) rc.converged = true;

  const int T = static_cast<int>(rc.components.size());
  if (cfg.best_iterate) {
    rc.weights = Eigen::VectorXd::Zero(T);
    rc.weights(best_t) = 1.0;
  } else {
    rc.weights = Eigen::VectorXd::Constant(T, 1.0 / static_cast<double>(T));
  }
  return rc;
}

std::vector<TradeoffPoint> pareto_sweep(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const std::vector<int>& group, int n_groups,
                                        FairnessConstraint constraint,
                                        const std::vector<double>& epsilons,
                                        const EgrConfig& cfg, double holdout_fraction,
                                        std::uint64_t seed) {
  const int n = static_cast<int>(X.rows());
  require(y.size() == n && static_cast<int>(group.size()) == n, "row counts differ");
  require(holdout_fraction > 0 && holdout_fraction < 1, "holdout_fraction must be in (0, 1)");
  require(!epsilons.empty(), "no epsilon values given");

  const Rng root(seed);
  std::vector<TradeoffPoint> points;
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    Rng point_rng = root.child("pareto.point", e);
    TradeoffPoint pt;
    pt.epsilon = epsilons[e];
    pt.seed = point_rng.seed();

    std::vector<std::vector<int>> strata(2);
    for (int i = 0; i < n; ++i) strata[y(i) == 1.0 ? 1 : 0].push_back(i);
    strata.erase(std::remove_if(strata.begin(), strata.end(),
                                [](const std::vector<int>& s) { return s.empty(); }),
                 strata.end());
    std::vector<int> quota = detail::stratified_allocation(strata, holdout_fraction);
    std::vector<int> stratum_of(n, 0);
    for (std::size_t s = 0; s < strata.size(); ++s)
      for (int i : strata[s]) stratum_of[i] = static_cast<int>(s);
    std::vector<int> perm = point_rng.permutation(n);
    std::vector<bool> in_holdout(n, false);
    for (int i : perm) {
      int s = stratum_of[i];
      if (quota[s] > 0) {
        in_holdout[i] = true;
        --quota[s];
      }
    }
    std::vector<int> train_rows, hold_rows;
    for (int i = 0; i < n; ++i) (in_holdout[i] ? hold_rows : train_rows).push_back(i);
    require(!train_rows.empty() && !hold_rows.empty(), "split produced an empty part");

    auto take = [&](const std::vector<int>& rows, Eigen::MatrixXd& Xs, Eigen::VectorXd& ys,
                    std::vector<int>& gs) {
      Xs.resize(static_cast<int>(rows.size()), X.cols());
      ys.resize(static_cast<int>(rows.size()));
      gs.resize(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Xs.row(static_cast<int>(r)) = X.row(rows[r]);
        ys(static_cast<int>(r)) = y(rows[r]);
        gs[r] = group[rows[r]];
      }
    };
    Eigen::MatrixXd Xtr, Xte;
    Eigen::VectorXd ytr, yte;
    std::vector<int> gtr, gte;
    take(train_rows, Xtr, ytr, gtr);
    take(hold_rows, Xte, yte, gte);

    EgrConfig point_cfg = cfg;
    point_cfg.epsilon = epsilons[e];
    RandomizedClassifier rc = exponentiated_gradient(Xtr, ytr, gtr, n_groups, constraint,
                                                     point_cfg);
    Eigen::VectorXd d = mixture_decisions(rc, Xte);
    pt.accuracy = (d.array() == yte.array()).cast<double>().mean();
    pt.violation = constraint_violation(d, yte, gte, n_groups, constraint);
    pt.converged = rc.converged;

    pt.group_rates = Eigen::VectorXd::Constant(n_groups, kNaN);
    for (int a = 0; a < n_groups; ++a) {
      double num = 0, den = 0;
      for (std::size_t i = 0; i < gte.size(); ++i) {
        if (gte[i] != a) continue;
        if (constraint == FairnessConstraint::equalized_odds && yte(static_cast<int>(i)) != 1.0)
          continue;
        den += 1;
        num += d(static_cast<int>(i));
      }
      if (den > 0) pt.group_rates(a) = num / den;
    }
    points.push_back(std::move(pt));
  }

  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < points.size(); ++j)
      if (points[j].accuracy > points[i].accuracy && points[j].violation < points[i].violation)
        points[i].dominated = true;
  return points;
}

AwarenessComparison awareness_comparison(const Dataset& ds, const LogisticConfig& cfg,
                                         double holdout_fraction, std::uint64_t seed,
                                         int min_support) {
  require(ds.task == TaskKind::adoption, "awareness comparison needs binary adoption labels");
  require(ds.attribute_count() > 0, "awareness comparison needs protected attributes");
  auto [train, hold] = split(ds, holdout_fraction, seed);

  MultiLabelModel unaware = fit_multilabel(train, cfg, false);
  MultiLabelModel aware = fit_multilabel(train, cfg, true);
  Eigen::MatrixXd pred_un = (predict_proba_all(unaware, hold).array() >= 0.5).cast<double>();
  Eigen::MatrixXd pred_aw = (predict_proba_all(aware, hold).array() >= 0.5).cast<double>();

  IntersectionIndex all = derive_intersections(hold, {}, min_support);
  ConfusionCounts counts_un = confusion(hold.targets, pred_un, all, ds.label_names);
  ConfusionCounts counts_aw = confusion(hold.targets, pred_aw, all, ds.label_names);

  AwarenessComparison cmp;
  cmp.labels = ds.label_names;
  cmp.metrics = standard_classification_metrics();
  cmp.seed = seed;
  const int k = ds.label_count();
  const int m = static_cast<int>(cmp.metrics.size());
  cmp.difference = Eigen::MatrixXd::Constant(k, m, kNaN);
  for (int c = 0; c < m; ++c) {
    MetricTable tu = classification_metric(counts_un, cmp.metrics[c]);
    MetricTable ta = classification_metric(counts_aw, cmp.metrics[c]);
    for (int l = 0; l < k; ++l)
      if (tu.defined(l, 0) && ta.defined(l, 0))
        cmp.difference(l, c) = tu.values(l, 0) - ta.values(l, 0);
  }

  std::vector<std::string> attr_names;
  for (const auto& a : ds.attributes) attr_names.push_back(a.name);
  IntersectionIndex by_group = derive_intersections(hold, attr_names, min_support);
  cmp.recall_unaware = classification_metric(confusion(hold.targets, pred_un, by_group,
                                                       ds.label_names),
                                             MetricId::recall_tpr);
  cmp.recall_aware = classification_metric(confusion(hold.targets, pred_aw, by_group,
                                                     ds.label_names),
                                           MetricId::recall_tpr);
  return cmp;
}

std::string AwarenessComparison::to_json_text() const {
  nlohmann::json j;
  j["comparison_version"] = 1;
  j["seed"] = seed;
  j["labels"] = labels;
  nlohmann::json ms = nlohmann::json::array();
  for (MetricId m : metrics) ms.push_back(metric_name(m));
  j["metrics"] = ms;
  nlohmann::json rows = nlohmann::json::array();
  for (int l = 0; l < difference.rows(); ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < difference.cols(); ++c) {
      if (std::isnan(difference(l, c)))
        row.push_back(nullptr);
      else
        row.push_back(difference(l, c));
    }
    rows.push_back(row);
  }
  j["unaware_minus_aware"] = rows;
  j["recall_unaware"] = nlohmann::json::parse(recall_unaware.to_json_text());
  j["recall_aware"] = nlohmann::json::parse(recall_aware.to_json_text());
  return j.dump(2);
}

std::string AwarenessComparison::to_csv() const {
  std::string out = "label,metric,unaware_minus_aware\n";
  for (int l = 0; l < difference.rows(); ++l)
    for (int c = 0; c < difference.cols(); ++c) {
      out += labels[l];
      out += ',';
      out += metric_name(metrics[c]);
      out += ',';
      if (std::isnan(difference(l, c)))
        out += "NA";
      else
        out += std::to_string(difference(l, c));
      out += '\n';
    }
  return out;
}

}  // namespace fairaudit

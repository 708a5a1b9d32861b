#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "exitnet/csv.hpp"
#include "exitnet/dataset.hpp"
#include "exitnet/errors.hpp"
#include "exitnet/model.hpp"

namespace exitnet {

/// Highest softmax probability per row at unit temperature. For the argmax
/// logit m, the value reduces to 1 / sum_j exp(l_j - m).
inline std::vector<double> confidence_scores(const Tensor& logits) {
  if (logits.rank() != 2)
    throw std::invalid_argument("confidence_scores: rank-2 logits required");
  int n = logits.dim(0), c = logits.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n));
  const double* v = logits.data();
  for (int r = 0; r < n; ++r) {
    const double* row = v + static_cast<long>(r) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    out[static_cast<std::size_t>(r)] = 1.0 / denom;
  }
  return out;
}

struct ThresholdSchedule {
  std::vector<double> thresholds;  // length k; exit k always accepts
  double q = 0.0;                  // calibrated exit fraction
  double budget = 0.0;             // target average cost in MACs

  void validate(int k) const {
    if (static_cast<int>(thresholds.size()) != k)
      throw ConfigError("ThresholdSchedule: need one threshold per exit");
    if (thresholds.back() != 0.0)
      throw ConfigError("ThresholdSchedule: last threshold must be 0");
  }
};

struct AdaptivePrediction {
  int label = 0;
  int exit_index = 0;  // 1-based
  long long cost = 0;
};

inline IscMode inference_isc_mode(const MultiExitModel& model) {
  return model.config().isc_enabled ? IscMode::infer : IscMode::off;
}

namespace detail {

inline Tensor row_copy(const Tensor& x, int r) {
  int d = x.dim(1);
  Tensor out({1, d});
  const double* src = x.data() + static_cast<long>(r) * d;
  std::copy(src, src + d, out.data());
  return out;
}

}  // namespace detail

/// Sequential early-exit protocol: blocks are evaluated incrementally, every
/// head along the way is scored, and the first exit whose confidence clears
/// its threshold (ties exit) answers. Exit k always answers.
inline std::vector<AdaptivePrediction> predict_adaptive(
    const MultiExitModel& model, const Tensor& x,
    const ThresholdSchedule& sched) {
  const ModelConfig& cfg = model.config();
  sched.validate(cfg.k);
  if (x.rank() != 2 || x.dim(1) != cfg.input_dim)
    throw std::invalid_argument("predict_adaptive: input must be batch x input_dim");
  bool isc = cfg.isc_enabled;
  std::vector<AdaptivePrediction> out;
  out.reserve(static_cast<std::size_t>(x.dim(0)));
  for (int r = 0; r < x.dim(0); ++r) {
    Tensor h = detail::row_copy(x, r);
    Tensor prev_logits;
    AdaptivePrediction pred;
    for (int i = 0; i < cfg.k; ++i) {
      h = model.apply_block(i, h);
      Tensor lg = model.apply_head(i, h);
      if (isc && i > 0)
        lg = ops::add(lg, model.apply_isc_transform(i - 1, prev_logits));
      prev_logits = lg;
      double conf = confidence_scores(lg)[0];
      if (conf >= sched.thresholds[static_cast<std::size_t>(i)] || i + 1 == cfg.k) {
        pred.label = ops::argmax_rows(lg)[0];
        pred.exit_index = i + 1;
        pred.cost = model.cost_prefix()[static_cast<std::size_t>(i)];
        break;
      }
    }
    out.push_back(pred);
  }
  return out;
}

/// Reference implementation: run every exit for every sample, then scan for
/// the first confident exit. Same contract as predict_adaptive.
inline std::vector<AdaptivePrediction> predict_adaptive_oracle(
    const MultiExitModel& model, const Tensor& x,
    const ThresholdSchedule& sched) {
  const ModelConfig& cfg = model.config();
  sched.validate(cfg.k);
  ForwardOutputs fw = model.forward_all(x, inference_isc_mode(model));
  std::vector<std::vector<double>> conf;
  std::vector<std::vector<int>> pred;
  for (int i = 0; i < cfg.k; ++i) {
    conf.push_back(confidence_scores(fw.logits[static_cast<std::size_t>(i)]));
    pred.push_back(ops::argmax_rows(fw.logits[static_cast<std::size_t>(i)]));
  }
  std::vector<AdaptivePrediction> out(static_cast<std::size_t>(x.dim(0)));
  for (int r = 0; r < x.dim(0); ++r) {
    for (int i = 0; i < cfg.k; ++i) {
      if (conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] >=
              sched.thresholds[static_cast<std::size_t>(i)] ||
          i + 1 == cfg.k) {
        out[static_cast<std::size_t>(r)] = {pred[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)],
                                            i + 1,
                                            model.cost_prefix()[static_cast<std::size_t>(i)]};
        break;
      }
    }
  }
  return out;
}

namespace detail {

/// Confidence of every validation sample at every exit, computed once.
struct ValConfidences {
  std::vector<std::vector<double>> conf;  // [exit][sample]
  int n = 0;
  int k = 0;
};

inline ValConfidences collect_confidences(const MultiExitModel& model,
                                          const Dataset& val) {
  ValConfidences vc;
  vc.n = val.n();
  vc.k = model.config().k;
  ForwardOutputs fw = model.forward_all(val.x, inference_isc_mode(model));
  for (int i = 0; i < vc.k; ++i)
    vc.conf.push_back(confidence_scores(fw.logits[static_cast<std::size_t>(i)]));
  return vc;
}

/// Sequential quantile thresholds for exit fraction q: at each exit, the
/// samples still alive exit if their confidence is at or above the
/// (1-q)-quantile of the alive group's confidences.
inline std::vector<double> thresholds_for_q(const ValConfidences& vc, double q) {
  std::vector<double> th(static_cast<std::size_t>(vc.k), 0.0);
  std::vector<int> alive(static_cast<std::size_t>(vc.n));
  std::iota(alive.begin(), alive.end(), 0);
  for (int i = 0; i + 1 < vc.k; ++i) {
    if (alive.empty()) {
      th[static_cast<std::size_t>(i)] = 0.0;
      continue;
    }
    std::vector<double> cs;
    cs.reserve(alive.size());
    for (int r : alive) cs.push_back(vc.conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)]);
    std::sort(cs.begin(), cs.end());
    auto m = static_cast<long>(cs.size());
    long idx = static_cast<long>(std::floor((1.0 - q) * static_cast<double>(m)));
    idx = std::clamp(idx, 0l, m - 1);
    double t = cs[static_cast<std::size_t>(idx)];
    th[static_cast<std::size_t>(i)] = t;
    std::vector<int> next;
    for (int r : alive)
      if (vc.conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] < t) next.push_back(r);
    alive.swap(next);
  }
  return th;
}

inline double realized_cost(const ValConfidences& vc,
                            const std::vector<double>& th,
                            const std::vector<long long>& cost_prefix) {
  double total = 0.0;
  for (int r = 0; r < vc.n; ++r) {
    for (int i = 0; i < vc.k; ++i) {
      if (vc.conf[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] >= th[static_cast<std::size_t>(i)] ||
          i + 1 == vc.k) {
        total += static_cast<double>(cost_prefix[static_cast<std::size_t>(i)]);
        break;
      }
    }
  }
  return total / vc.n;
}

/// Geometric exit model: a fraction q of the remaining samples leaves at each
/// exit; probabilities renormalized over the k exits.
inline double modeled_cost(double q, const std::vector<long long>& cost_prefix) {
  int k = static_cast<int>(cost_prefix.size());
  double z = 0.0, c = 0.0, stay = 1.0;
  for (int i = 0; i < k; ++i) {
    double p = q * stay;
    z += p;
    c += p * static_cast<double>(cost_prefix[static_cast<std::size_t>(i)]);
    stay *= 1.0 - q;
  }
  if (z <= 0.0) {
    // q -> 0 limit: mass spreads uniformly over the exits.
    double m = 0.0;
    for (long long v : cost_prefix) m += static_cast<double>(v);
    return m / k;
  }
  return c / z;
}

}  // namespace detail

/// Budget-driven threshold calibration. Bisection on the geometric exit model
/// picks the smallest admissible exit fraction q; a second bisection against
/// the realized validation cost tightens q until the budget holds on the
/// validation split itself.
inline ThresholdSchedule calibrate_thresholds(
    const MultiExitModel& model, const Dataset& val, double budget,
    const std::vector<long long>& cost_prefix) {
  if (val.n() < 1) throw ConfigError("calibrate_thresholds: empty validation set");
  if (cost_prefix.empty() ||
      static_cast<int>(cost_prefix.size()) != model.config().k)
    throw ConfigError("calibrate_thresholds: cost prefix size mismatch");
  if (budget < static_cast<double>(cost_prefix[0]))
    throw InfeasibleBudgetError(
        "budget " + fmt_double(budget) + " is below the cheapest exit cost " +
        std::to_string(cost_prefix[0]));

  // Modeled cost decreases from the exit-cost mean (q -> 0) to the first exit
  // cost (q = 1); pick the smallest q whose modeled cost fits the budget.
  double q;
  if (detail::modeled_cost(0.0, cost_prefix) <= budget) {
    q = 0.0;
  } else {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      if (detail::modeled_cost(mid, cost_prefix) <= budget)
        hi = mid;
      else
        lo = mid;
    }
    q = hi;
  }

  detail::ValConfidences vc = detail::collect_confidences(model, val);
  std::vector<double> th = detail::thresholds_for_q(vc, q);
  if (detail::realized_cost(vc, th, cost_prefix) > budget) {
    // The geometric model undershot on this split; raise q against the
    // realized validation cost, which q = 1 always satisfies.
    double lo = q, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      if (detail::realized_cost(vc, detail::thresholds_for_q(vc, mid),
                                cost_prefix) <= budget)
        hi = mid;
      else
        lo = mid;
    }
    q = hi;
    th = detail::thresholds_for_q(vc, q);
    if (detail::realized_cost(vc, th, cost_prefix) > budget) {
      q = 1.0;
      th = detail::thresholds_for_q(vc, q);
    }
  }
  ThresholdSchedule sched;
  sched.thresholds = th;
  sched.q = q;
  sched.budget = budget;
  return sched;
}

struct BudgetPoint {
  double budget = 0.0;
  double avg_cost = 0.0;
  double accuracy = 0.0;
  std::vector<long long> exit_histogram;
};

struct BudgetReport {
  int k = 0;
  std::vector<BudgetPoint> points;

  void write_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot open for write: " + path);
    os << "budget,avg_cost,accuracy";
    for (int i = 1; i <= k; ++i) os << ",n_exit_" << i;
    os << "\n";
    for (const auto& p : points) {
      os << fmt_double(p.budget) << "," << fmt_double(p.avg_cost) << ","
         << fmt_double(p.accuracy);
      for (long long h : p.exit_histogram) os << "," << h;
      os << "\n";
    }
    if (!os) throw FormatError("write failed: " + path);
  }

  /// Two-column plain text, one point per line, for plotting cost vs
  /// accuracy.
  void write_curve(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot open for write: " + path);
    os << "# avg_cost accuracy\n";
    for (const auto& p : points)
      os << fmt_double(p.avg_cost) << " " << fmt_double(p.accuracy) << "\n";
    if (!os) throw FormatError("write failed: " + path);
  }
};

/// For each budget: calibrate on the validation split, then run the adaptive
/// predictor over the test split.
inline BudgetReport budgeted_batch_eval(const MultiExitModel& model,
                                        const Dataset& val,
                                        const Dataset& test,
                                        const std::vector<double>& budgets) {
  for (std::size_t i = 1; i < budgets.size(); ++i)
    if (budgets[i] < budgets[i - 1])
      throw ConfigError("budgeted_batch_eval: budgets must be ascending");
  int k = model.config().k;
  BudgetReport rep;
  rep.k = k;
  for (double budget : budgets) {
    ThresholdSchedule sched =
        calibrate_thresholds(model, val, budget, model.cost_prefix());
    std::vector<AdaptivePrediction> preds =
        predict_adaptive(model, test.x, sched);
    BudgetPoint pt;
    pt.budget = budget;
    pt.exit_histogram.assign(static_cast<std::size_t>(k), 0);
    long long correct = 0;
    double cost = 0.0;
    for (int r = 0; r < test.n(); ++r) {
      const AdaptivePrediction& p = preds[static_cast<std::size_t>(r)];
      if (p.label == test.y[static_cast<std::size_t>(r)]) ++correct;
      cost += static_cast<double>(p.cost);
      ++pt.exit_histogram[static_cast<std::size_t>(p.exit_index) - 1];
    }
    pt.accuracy = static_cast<double>(correct) / test.n();
    pt.avg_cost = cost / test.n();
    rep.points.push_back(pt);
  }
  return rep;
}

struct AnytimeRow {
  int exit_index = 0;
  long long cost = 0;
  double accuracy = 0.0;
  double mean_ce = 0.0;
};

/// Static per-exit evaluation: every exit scored on every sample.
inline std::vector<AnytimeRow> anytime_eval(const MultiExitModel& model,
                                            const Dataset& test) {
  int k = model.config().k;
  std::vector<AnytimeRow> rows(static_cast<std::size_t>(k));
  std::vector<long long> correct(static_cast<std::size_t>(k), 0);
  std::vector<double> ce_sum(static_cast<std::size_t>(k), 0.0);
  const int batch = 256;
  for (int start = 0; start < test.n(); start += batch) {
    int stop = std::min(test.n(), start + batch);
    std::vector<int> idx(static_cast<std::size_t>(stop - start));
    std::iota(idx.begin(), idx.end(), start);
    Dataset b = test.slice(idx);
    ForwardOutputs fw = model.forward_all(b.x, inference_isc_mode(model));
    for (int e = 0; e < k; ++e) {
      std::vector<int> pred = ops::argmax_rows(fw.logits[static_cast<std::size_t>(e)]);
      for (int r = 0; r < b.n(); ++r)
        if (pred[static_cast<std::size_t>(r)] == b.y[static_cast<std::size_t>(r)])
          ++correct[static_cast<std::size_t>(e)];
      ce_sum[static_cast<std::size_t>(e)] +=
          ops::cross_entropy_loss(fw.logits[static_cast<std::size_t>(e)], b.y).item() * b.n();
    }
  }
  for (int e = 0; e < k; ++e) {
    rows[static_cast<std::size_t>(e)].exit_index = e + 1;
    rows[static_cast<std::size_t>(e)].cost = model.cost_prefix()[static_cast<std::size_t>(e)];
    rows[static_cast<std::size_t>(e)].accuracy =
        test.n() > 0 ? static_cast<double>(correct[static_cast<std::size_t>(e)]) / test.n() : 0.0;
    rows[static_cast<std::size_t>(e)].mean_ce =
        test.n() > 0 ? ce_sum[static_cast<std::size_t>(e)] / test.n() : 0.0;
  }
  return rows;
}

inline void write_anytime_csv(const std::vector<AnytimeRow>& rows,
                              const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for write: " + path);
  os << "exit_index,cost,accuracy,mean_ce\n";
  for (const auto& r : rows)
    os << r.exit_index << "," << r.cost << "," << fmt_double(r.accuracy) << ","
       << fmt_double(r.mean_ce) << "\n";
  if (!os) throw FormatError("write failed: " + path);
}

}  // namespace exitnet

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "exitnet/csv.hpp"
#include "exitnet/dataset.hpp"
#include "exitnet/errors.hpp"
#include "exitnet/model.hpp"
#include "exitnet/ops.hpp"
#include "exitnet/tape.hpp"

namespace exitnet {

struct TrainConfig {
  std::vector<double> lambda;  // empty = all ones
  double alpha = 0.5;
  double temperature = 2.0;
  bool ge_enabled = true;
  bool isc_enabled = false;
  bool ofa_enabled = true;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int phase1_epochs = 0;
  int phase2_epochs = 0;
  std::vector<double> lr_drop_points = {0.5, 0.75};
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate(int k) const {
    if (alpha < 0.0 || alpha > 1.0)
      throw ConfigError("TrainConfig: alpha must be in [0,1]");
    if (!(temperature > 0.0))
      throw ConfigError("TrainConfig: temperature must be positive");
    if (!lambda.empty()) {
      if (static_cast<int>(lambda.size()) != k)
        throw ConfigError("TrainConfig: lambda must have k entries");
      for (double l : lambda)
        if (!(l > 0.0)) throw ConfigError("TrainConfig: lambda_i must be > 0");
    }
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (phase1_epochs < 0 || phase2_epochs < 0)
      throw ConfigError("TrainConfig: epoch counts must be >= 0");
    for (double d : lr_drop_points)
      if (d <= 0.0 || d >= 1.0)
        throw ConfigError("TrainConfig: lr drop points must be in (0,1)");
  }

  std::vector<double> lambdas(int k) const {
    if (!lambda.empty()) return lambda;
    return std::vector<double>(static_cast<std::size_t>(k), 1.0);
  }
};

/// Backward rescale factors at stage i of k (1-based): the branch into head i
/// and the branch into block i+1. Their telescoped product leaves each loss
/// contributing gradient 1/(k-i+1) of its plain value at block i.
struct GeFactors {
  double head;
  double pass;
};

inline GeFactors ge_factors(int k, int i) {
  if (k < 1 || i < 1 || i > k)
    throw std::invalid_argument("ge_factors: need 1 <= i <= k");
  double denom = static_cast<double>(k - i + 1);
  return {1.0 / denom, static_cast<double>(k - i) / denom};
}

/// A recorded multi-exit loss tied to its tape: total plus the per-exit
/// cross-entropy terms and the intermediate tensors they were built from.
struct LossGraph {
  Tensor loss;
  std::vector<Tensor> ce;      // unweighted per-exit cross entropy
  std::vector<Tensor> logits;
  std::vector<Tensor> features;
};

inline Tensor weighted_ce_sum(const std::vector<Tensor>& ce,
                              const std::vector<double>& lambdas, Tape* tape) {
  Tensor total;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    Tensor term = lambdas[i] == 1.0 ? ce[i] : ops::scale(ce[i], lambdas[i], tape);
    total = i == 0 ? term : ops::add(total, term, tape);
  }
  return total;
}

namespace detail {

/// Shared builder for the joint cross-entropy objective. `ge` inserts the
/// backward-rescale pair at every branch point; forward values are identical
/// with and without it.
inline LossGraph build_ce_loss(const MultiExitModel& model, const Tensor& x,
                               const std::vector<int>& y,
                               const std::vector<double>& lambdas, bool ge,
                               IscMode isc, Tape* tape) {
  const ModelConfig& cfg = model.config();
  LossGraph g;
  Tensor h = x;
  Tensor prev_logits;
  for (int i = 0; i < cfg.k; ++i) {
    h = model.apply_block(i, h, tape);
    g.features.push_back(h);
    GeFactors f = ge_factors(cfg.k, i + 1);
    Tensor head_in = ge ? ops::rescale_gradient(h, f.head, tape) : h;
    Tensor lg = model.apply_head(i, head_in, tape);
    if (cfg.isc_enabled && isc != IscMode::off && i > 0) {
      Tensor t = prev_logits;
      if (isc == IscMode::train) t = ops::stop_gradient(t, tape);
      t = model.apply_isc_transform(i - 1, t, tape);
      lg = ops::add(lg, t, tape);
    }
    g.logits.push_back(lg);
    prev_logits = lg;
    if (i + 1 < cfg.k && ge) h = ops::rescale_gradient(h, f.pass, tape);
  }
  for (int i = 0; i < cfg.k; ++i)
    g.ce.push_back(ops::cross_entropy_loss(g.logits[static_cast<std::size_t>(i)], y, tape));
  g.loss = weighted_ce_sum(g.ce, lambdas, tape);
  return g;
}

}  // namespace detail

inline LossGraph plain_sum_loss(const MultiExitModel& model, const Tensor& x,
                                const std::vector<int>& y,
                                const TrainConfig& cfg, IscMode isc,
                                Tape* tape) {
  cfg.validate(model.config().k);
  return detail::build_ce_loss(model, x, y, cfg.lambdas(model.config().k),
                               false, isc, tape);
}

inline LossGraph ge_forward_loss(const MultiExitModel& model, const Tensor& x,
                                 const std::vector<int>& y,
                                 const TrainConfig& cfg, IscMode isc,
                                 Tape* tape) {
  cfg.validate(model.config().k);
  if (!cfg.ge_enabled)
    throw ConfigError("ge_forward_loss: ge_enabled is false");
  return detail::build_ce_loss(model, x, y, cfg.lambdas(model.config().k),
                               true, isc, tape);
}

/// Per-exit distillation objective: alpha * CE(student, y) plus
/// (1 - alpha) * KL(teacher || student) at temperature T. Exact alpha of 1 or
/// 0 drops the unused term from the graph entirely.
inline Tensor ofa_exit_loss(const Tensor& teacher_logits,
                            const Tensor& student_logits,
                            const std::vector<int>& y, double alpha, double T,
                            Tape* tape) {
  if (alpha < 0.0 || alpha > 1.0)
    throw ConfigError("ofa_exit_loss: alpha must be in [0,1]");
  if (alpha == 1.0) return ops::cross_entropy_loss(student_logits, y, tape);
  Tensor kld = ops::kl_divergence_loss(teacher_logits, student_logits, T, tape);
  if (alpha == 0.0) return kld;
  Tensor ce = ops::cross_entropy_loss(student_logits, y, tape);
  return ops::add(ops::scale(ce, alpha, tape), ops::scale(kld, 1.0 - alpha, tape),
                  tape);
}

/// Head fine-tuning objective: every exit below k distills from the
/// gradient-stopped exit-k logits; exit k keeps plain cross entropy. With
/// distillation disabled the exits reduce to per-exit cross entropy.
inline LossGraph build_phase2_loss(const MultiExitModel& model, const Tensor& x,
                                   const std::vector<int>& y,
                                   const TrainConfig& cfg, Tape* tape) {
  const ModelConfig& mc = model.config();
  cfg.validate(mc.k);
  IscMode isc = cfg.isc_enabled ? IscMode::train : IscMode::off;
  if (cfg.isc_enabled && !mc.isc_enabled)
    throw ConfigError("build_phase2_loss: model was built without transfer paths");
  LossGraph g;
  ForwardOutputs fw = model.forward_all(x, isc, tape);
  g.logits = fw.logits;
  g.features = fw.features;
  double alpha = cfg.ofa_enabled ? cfg.alpha : 1.0;
  Tensor teacher = ops::stop_gradient(g.logits[static_cast<std::size_t>(mc.k) - 1], tape);
  Tensor total;
  for (int i = 0; i + 1 < mc.k; ++i) {
    Tensor li = ofa_exit_loss(teacher, g.logits[static_cast<std::size_t>(i)], y,
                              alpha, cfg.temperature, tape);
    total = i == 0 ? li : ops::add(total, li, tape);
  }
  Tensor ce_k = ops::cross_entropy_loss(g.logits[static_cast<std::size_t>(mc.k) - 1], y, tape);
  g.loss = mc.k > 1 ? ops::add(total, ce_k, tape) : ce_k;
  for (int i = 0; i < mc.k; ++i)
    g.ce.push_back(i + 1 == mc.k
                       ? ce_k
                       : ops::cross_entropy_loss(g.logits[static_cast<std::size_t>(i)], y, tape));
  return g;
}

/// SGD with Nesterov momentum and decoupled-from-nothing weight decay: decay
/// augments the gradient before the momentum update, matching the usual
/// convnet recipe.
class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Tensor> params, double momentum, double weight_decay)
      : params_(std::move(params)), momentum_(momentum), wd_(weight_decay) {
    velocity_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
      velocity_[i].assign(static_cast<std::size_t>(params_[i].size()), 0.0);
  }

  void step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      if (!p.has_grad()) continue;
      double* pv = p.data();
      const std::vector<double>& gv = p.grad();
      double* vv = velocity_[i].data();
      int n = p.size();
      for (int j = 0; j < n; ++j) {
        double g = gv[j] + wd_ * pv[j];
        if (momentum_ != 0.0) {
          vv[j] = momentum_ * vv[j] + g;
          pv[j] -= lr * (g + momentum_ * vv[j]);
        } else {
          pv[j] -= lr * g;
        }
      }
    }
    zero_grad();
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double momentum_;
  double wd_;
};

/// Step schedule: lr0 divided by 10 each time the epoch passes a drop point,
/// with drop epochs at floor(fraction * phase_epochs).
inline double lr_at_epoch(const TrainConfig& cfg, int epoch, int phase) {
  int total = phase == 1 ? cfg.phase1_epochs : cfg.phase2_epochs;
  if (epoch < 0 || epoch >= total)
    throw std::invalid_argument("lr_at_epoch: epoch outside phase");
  int passed = 0;
  for (double d : cfg.lr_drop_points)
    if (epoch >= static_cast<int>(d * total)) ++passed;
  return cfg.lr0 * std::pow(10.0, -passed);
}

struct ExitEval {
  double accuracy = 0.0;
  double ce = 0.0;
};

/// Per-exit accuracy and mean cross entropy over a whole split, batched.
inline std::vector<ExitEval> evaluate_exits(const MultiExitModel& model,
                                            const Dataset& data, IscMode isc,
                                            int batch_size = 256) {
  int k = model.config().k;
  std::vector<ExitEval> out(static_cast<std::size_t>(k));
  if (data.n() == 0) return out;
  std::vector<long long> correct(static_cast<std::size_t>(k), 0);
  std::vector<double> ce_sum(static_cast<std::size_t>(k), 0.0);
  int n = data.n();
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int start = 0; start < n; start += batch_size) {
    int stop = std::min(n, start + batch_size);
    std::vector<int> batch_idx(idx.begin() + start, idx.begin() + stop);
    Dataset b = data.slice(batch_idx);
    ForwardOutputs fw = model.forward_all(b.x, isc, nullptr);
    for (int e = 0; e < k; ++e) {
      const Tensor& lg = fw.logits[static_cast<std::size_t>(e)];
      std::vector<int> pred = ops::argmax_rows(lg);
      for (int r = 0; r < b.n(); ++r)
        if (pred[static_cast<std::size_t>(r)] == b.y[static_cast<std::size_t>(r)]) ++correct[static_cast<std::size_t>(e)];
      Tensor ce = ops::cross_entropy_loss(lg, b.y, nullptr);
      ce_sum[static_cast<std::size_t>(e)] += ce.item() * b.n();
    }
  }
  for (int e = 0; e < k; ++e) {
    out[static_cast<std::size_t>(e)].accuracy = double(correct[static_cast<std::size_t>(e)]) / n;
    out[static_cast<std::size_t>(e)].ce = ce_sum[static_cast<std::size_t>(e)] / n;
  }
  return out;
}

struct LogRow {
  int epoch = 0;
  int phase = 0;
  int exit_index = 0;  // 1-based
  std::string split;
  double accuracy = 0.0;
  double loss = 0.0;
  double grad_var_block1 = 0.0;
};

struct TrainingLog {
  std::vector<LogRow> rows;

  void write_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot open for write: " + path);
    os << "epoch,phase,exit_index,split,accuracy,loss,grad_var_block1\n";
    for (const auto& r : rows)
      os << r.epoch << "," << r.phase << "," << r.exit_index << "," << r.split
         << "," << fmt_double(r.accuracy) << "," << fmt_double(r.loss) << ","
         << fmt_double(r.grad_var_block1) << "\n";
    if (!os) throw FormatError("write failed: " + path);
  }
};

namespace detail {

inline double grad_l2_norm(const Tensor& t) {
  if (!t.has_grad()) return 0.0;
  const std::vector<double>& g = t.grad();
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

inline double population_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return acc / xs.size();
}

inline void append_epoch_rows(TrainingLog& log, const MultiExitModel& model,
                              const Dataset& train, const Dataset& val,
                              IscMode isc, int epoch, int phase,
                              double grad_var) {
  auto tr = evaluate_exits(model, train, isc);
  auto va = evaluate_exits(model, val, isc);
  int k = model.config().k;
  for (int e = 0; e < k; ++e) {
    log.rows.push_back({epoch, phase, e + 1, "train", tr[static_cast<std::size_t>(e)].accuracy,
                        tr[static_cast<std::size_t>(e)].ce, grad_var});
    log.rows.push_back({epoch, phase, e + 1, "val", va[static_cast<std::size_t>(e)].accuracy,
                        va[static_cast<std::size_t>(e)].ce, grad_var});
  }
}

inline std::vector<std::vector<int>> epoch_batches(int n, int batch_size,
                                                   std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    int stop = std::min(n, start + batch_size);
    batches.emplace_back(idx.begin() + start, idx.begin() + stop);
  }
  return batches;
}

}  // namespace detail

/// Joint training of the whole network from its current parameters. When
/// transfer paths are configured they are live in this phase too, with
/// gradients along them discarded, so every head trains against the same
/// logit stream it sees at inference.
inline TrainingLog train_phase1(MultiExitModel& model, const DataSplits& data,
                                const TrainConfig& cfg) {
  const ModelConfig& mc = model.config();
  cfg.validate(mc.k);
  if (cfg.isc_enabled && !mc.isc_enabled)
    throw ConfigError("train_phase1: model was built without transfer paths");
  IscMode loss_isc = cfg.isc_enabled ? IscMode::train : IscMode::off;
  IscMode eval_isc = cfg.isc_enabled ? IscMode::infer : IscMode::off;
  TrainingLog log;
  std::vector<Tensor> params;
  for (const auto& p : model.params()) params.push_back(p.tensor);
  SgdOptimizer opt(params, cfg.momentum, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed);
  Tensor block1_weight = model.param("block1.weight");
  for (int epoch = 0; epoch < cfg.phase1_epochs; ++epoch) {
    double lr = lr_at_epoch(cfg, epoch, 1);
    auto batches = detail::epoch_batches(data.train.n(), cfg.batch_size, rng);
    std::vector<double> block1_norms;
    int step = 0;
    for (const auto& bidx : batches) {
      Dataset b = data.train.slice(bidx);
      Tape tape;
      LossGraph g = cfg.ge_enabled
                        ? ge_forward_loss(model, b.x, b.y, cfg, loss_isc, &tape)
                        : plain_sum_loss(model, b.x, b.y, cfg, loss_isc, &tape);
      double lv = g.loss.item();
      if (!std::isfinite(lv))
        throw DivergenceError("phase 1 epoch " + std::to_string(epoch) +
                              " step " + std::to_string(step) +
                              ": loss is non-finite");
      tape.backward(g.loss);
      block1_norms.push_back(detail::grad_l2_norm(block1_weight));
      opt.step(lr);
      ++step;
    }
    double gv = detail::population_variance(block1_norms);
    detail::append_epoch_rows(log, model, data.train, data.val, eval_isc,
                              epoch, 1, gv);
  }
  return log;
}

/// Head fine-tuning: only the final affine stage of each classifier receives
/// updates; everything else is untouched by construction (the optimizer never
/// sees it and gradients on frozen tensors are cleared before stepping).
inline TrainingLog train_phase2(MultiExitModel& model, const DataSplits& data,
                                const TrainConfig& cfg) {
  const ModelConfig& mc = model.config();
  cfg.validate(mc.k);
  TrainingLog log;
  std::vector<Tensor> params;
  for (const auto& name : model.last_layer_params())
    params.push_back(model.param(name));
  SgdOptimizer opt(params, cfg.momentum, cfg.weight_decay);
  std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull);
  IscMode eval_isc = cfg.isc_enabled ? IscMode::infer : IscMode::off;
  Tensor block1_weight = model.param("block1.weight");
  for (int epoch = 0; epoch < cfg.phase2_epochs; ++epoch) {
    double lr = lr_at_epoch(cfg, epoch, 2);
    auto batches = detail::epoch_batches(data.train.n(), cfg.batch_size, rng);
    std::vector<double> block1_norms;
    int step = 0;
    for (const auto& bidx : batches) {
      Dataset b = data.train.slice(bidx);
      Tape tape;
      LossGraph g = build_phase2_loss(model, b.x, b.y, cfg, &tape);
      double lv = g.loss.item();
      if (!std::isfinite(lv))
        throw DivergenceError("phase 2 epoch " + std::to_string(epoch) +
                              " step " + std::to_string(step) +
                              ": loss is non-finite");
      tape.backward(g.loss);
      block1_norms.push_back(detail::grad_l2_norm(block1_weight));
      opt.step(lr);
      model.zero_grad();  // drop gradients accumulated on frozen parameters
      ++step;
    }
    double gv = detail::population_variance(block1_norms);
    detail::append_epoch_rows(log, model, data.train, data.val, eval_isc, epoch,
                              2, gv);
  }
  return log;
}

// ---- Gradient variance measurement ----

struct GradVarianceRow {
  int block = 0;          // 1-based
  double var_plain = 0.0; // per-coordinate variance of the total gradient
  double var_ge = 0.0;
  double expected_ratio = 0.0;  // 1/(k-i+1)^2
  double max_perloss_var = 0.0; // largest per-loss plain-gradient variance
};

struct GradVarianceReport {
  int n_steps = 0;
  std::vector<GradVarianceRow> rows;

  void write_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot open for write: " + path);
    os << "# gradient variance across " << n_steps
       << " resampled batches at fixed parameters\n";
    os << "# metric: population variance of each gradient coordinate across "
          "steps, averaged over the coordinates of the block's parameters\n";
    os << "block,var_plain,var_ge,measured_ratio,expected_ratio,max_perloss_var\n";
    for (const auto& r : rows) {
      double ratio = r.var_plain > 0.0 ? r.var_ge / r.var_plain : 0.0;
      os << r.block << "," << fmt_double(r.var_plain) << ","
         << fmt_double(r.var_ge) << "," << fmt_double(ratio) << ","
         << fmt_double(r.expected_ratio) << ","
         << fmt_double(r.max_perloss_var) << "\n";
    }
    if (!os) throw FormatError("write failed: " + path);
  }
};

namespace detail {

inline void collect_block_grads(const MultiExitModel& model, Tape& tape,
                                std::vector<std::vector<double>>& out) {
  int k = model.config().k;
  out.clear();
  for (int i = 0; i < k; ++i) {
    const DenseLayer& b = model.blocks()[static_cast<std::size_t>(i)];
    std::vector<double> g;
    for (const Tensor* t : {&b.weight, &b.bias}) {
      std::vector<double> gr = tape.grad_of(*t);
      g.insert(g.end(), gr.begin(), gr.end());
    }
    out.push_back(std::move(g));
  }
}

/// Mean over coordinates of the per-coordinate variance across steps.
/// samples[step][coord].
inline double coordwise_variance(const std::vector<std::vector<double>>& samples) {
  if (samples.empty() || samples[0].empty()) return 0.0;
  std::size_t n = samples.size(), d = samples[0].size();
  double acc = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t s = 0; s < n; ++s) mean += samples[s][c];
    mean /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double dx = samples[s][c] - mean;
      v += dx * dx;
    }
    acc += v / static_cast<double>(n);
  }
  return acc / static_cast<double>(d);
}

}  // namespace detail

/// Runs n_steps forward/backward passes at fixed parameters with resampled
/// batches, recording block-parameter gradients for the plain and rescaled
/// graphs on identical batches, plus per-loss plain gradients for the
/// variance bound.
inline GradVarianceReport measure_grad_variance(const MultiExitModel& model,
                                                const Dataset& data,
                                                const TrainConfig& cfg,
                                                int n_steps) {
  const ModelConfig& mc = model.config();
  cfg.validate(mc.k);
  if (n_steps < 30)
    throw ConfigError("measure_grad_variance: need at least 30 steps");
  int k = mc.k;
  std::mt19937_64 rng(cfg.seed);
  // grads[graph][block][step] = flattened gradient
  std::vector<std::vector<std::vector<double>>> plain_grads(static_cast<std::size_t>(k));
  std::vector<std::vector<std::vector<double>>> ge_grads(static_cast<std::size_t>(k));
  // perloss[j][block][step]
  std::vector<std::vector<std::vector<std::vector<double>>>> perloss(
      static_cast<std::size_t>(k),
      std::vector<std::vector<std::vector<double>>>(static_cast<std::size_t>(k)));
  std::uniform_int_distribution<int> pick(0, data.n() - 1);
  for (int s = 0; s < n_steps; ++s) {
    std::vector<int> bidx(static_cast<std::size_t>(std::min(cfg.batch_size, data.n())));
    for (int& v : bidx) v = pick(rng);
    Dataset b = data.slice(bidx);
    std::vector<std::vector<double>> blocks;

    Tape plain_tape;
    LossGraph pg = detail::build_ce_loss(model, b.x, b.y, cfg.lambdas(k), false,
                                         IscMode::off, &plain_tape);
    plain_tape.backward(pg.loss);
    detail::collect_block_grads(model, plain_tape, blocks);
    for (int i = 0; i < k; ++i) plain_grads[static_cast<std::size_t>(i)].push_back(blocks[static_cast<std::size_t>(i)]);
    for (int j = 0; j < k; ++j) {
      plain_tape.reset_grads();
      plain_tape.backward(pg.ce[static_cast<std::size_t>(j)]);
      detail::collect_block_grads(model, plain_tape, blocks);
      for (int i = 0; i < k; ++i) perloss[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)].push_back(blocks[static_cast<std::size_t>(i)]);
    }
    model.zero_grad();

    Tape ge_tape;
    LossGraph gg = detail::build_ce_loss(model, b.x, b.y, cfg.lambdas(k), true,
                                         IscMode::off, &ge_tape);
    ge_tape.backward(gg.loss);
    detail::collect_block_grads(model, ge_tape, blocks);
    for (int i = 0; i < k; ++i) ge_grads[static_cast<std::size_t>(i)].push_back(blocks[static_cast<std::size_t>(i)]);
    model.zero_grad();
  }
  GradVarianceReport rep;
  rep.n_steps = n_steps;
  for (int i = 0; i < k; ++i) {
    GradVarianceRow row;
    row.block = i + 1;
    row.var_plain = detail::coordwise_variance(plain_grads[static_cast<std::size_t>(i)]);
    row.var_ge = detail::coordwise_variance(ge_grads[static_cast<std::size_t>(i)]);
    double denom = static_cast<double>(k - i);  // k - (i+1) + 1
    row.expected_ratio = 1.0 / (denom * denom);
    double mx = 0.0;
    for (int j = 0; j < k; ++j)
      mx = std::max(mx, detail::coordwise_variance(perloss[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]));
    row.max_perloss_var = mx;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace exitnet

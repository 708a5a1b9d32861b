// Acceptance checks for the adaptive multi-exit engine. Each check prints one
// PASS/FAIL line; the process exits nonzero if any check fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "exitnet/exitnet.hpp"

using namespace exitnet;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " " << idx << " " << name;
  if (!detail.empty()) std::cout << " [" << detail << "]";
  std::cout << "\n";
  if (!ok) ++g_failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

Tensor randn(std::vector<int> shape, std::mt19937_64& rng, bool rg,
             double sd = 0.7) {
  Tensor t(std::move(shape), rg);
  std::normal_distribution<double> d(0.0, sd);
  for (int i = 0; i < t.size(); ++i) t.data()[i] = d(rng);
  return t;
}

std::vector<int> random_labels(int n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int& v : y) v = d(rng);
  return y;
}

ModelConfig small_model(int k, int input_dim = 6, int classes = 4,
                        int width = 8) {
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.num_classes = classes;
  cfg.k = k;
  cfg.block_widths.assign(static_cast<std::size_t>(k), width);
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// 1. Rescale-node contract: gradient-scaling nodes leave the forward pass
//    bit-identical and multiply upstream gradients by exactly s.
// ---------------------------------------------------------------------------
void criterion1() {
  double t0 = now_seconds();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim_d(2, 6), len_d(1, 4);
  std::uniform_real_distribution<double> s_d(0.25, 4.0);
  bool ok = true;
  std::string detail;

  for (int trial = 0; trial < 1000 && ok; ++trial) {
    int n = dim_d(rng);
    int T = len_d(rng);
    int pos = std::uniform_int_distribution<int>(0, T)(rng);
    double s = s_d(rng);
    std::uint64_t graph_seed = rng();

    // One pass with the rescale node at `pos`, one without; leaf values are
    // regenerated identically from graph_seed.
    struct Run {
      Tensor loss;
      std::vector<Tensor> leaves;     // leaves[0] is the chain input
      std::vector<int> leaf_step;     // step at which each leaf joined; -1 for x
    };
    auto build = [&](bool with_r) {
      std::mt19937_64 grng(graph_seed);
      Run run;
      Tape tape;
      Tensor x = randn({n}, grng, true);
      run.leaves.push_back(x);
      run.leaf_step.push_back(-1);
      Tensor h = ops::scale(x, 1.0, &tape);
      for (int t = 0; t <= T; ++t) {
        if (t == pos && with_r) h = ops::rescale_gradient(h, s, &tape);
        if (t == T) break;
        int kind = std::uniform_int_distribution<int>(0, 3)(grng);
        if (kind == 0) {
          h = ops::relu(h, &tape);
        } else if (kind == 1) {
          Tensor c = randn({n}, grng, true);
          run.leaves.push_back(c);
          run.leaf_step.push_back(t);
          h = ops::add(h, c, &tape);
        } else if (kind == 2) {
          h = ops::mul(h, h, &tape);
        } else {
          h = ops::scale(h, 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(grng), &tape);
        }
      }
      run.loss = ops::sum(h, &tape);
      tape.backward(run.loss);
      return run;
    };

    Run with_r = build(true);
    Run without = build(false);

    if (with_r.loss.item() != without.loss.item()) {
      ok = false;
      detail = "forward drifted on trial " + std::to_string(trial);
      break;
    }
    for (std::size_t li = 0; li < with_r.leaves.size(); ++li) {
      // A leaf joining at step t crosses the rescale node iff t < pos.
      bool upstream = with_r.leaf_step[li] < pos;
      double factor = upstream ? s : 1.0;
      const std::vector<double>& ga = with_r.leaves[li].grad();
      const std::vector<double>& gb = without.leaves[li].grad();
      for (std::size_t c = 0; c < ga.size(); ++c) {
        double expect = factor * gb[c];
        double denom = std::max({std::fabs(expect), std::fabs(ga[c]), 1e-300});
        if (std::fabs(ga[c] - expect) / denom > 1e-12) {
          ok = false;
          detail = "gradient off at trial " + std::to_string(trial) + " leaf " +
                   std::to_string(li);
          break;
        }
      }
      if (!ok) break;
    }
  }
  double elapsed = now_seconds() - t0;
  if (ok && elapsed >= 10.0) {
    ok = false;
    detail = "took " + fmt_double(elapsed) + "s, limit 10s";
  }
  if (ok)
    detail = "1000 graphs, " + fmt_double(elapsed) + "s";
  report(1, "rescale nodes: identity forward, exact gradient scaling", ok, detail);
}

// ---------------------------------------------------------------------------
// 2. Telescoping: with equilibrium scaling, every loss j >= i reaches block i
//    multiplied by exactly 1/(k-i+1) relative to the unscaled graph.
// ---------------------------------------------------------------------------
void criterion2() {
  bool ok = true;
  std::string detail;
  double worst = 0.0;
  for (int k = 2; k <= 5 && ok; ++k) {
    MultiExitModel m = MultiExitModel::build(small_model(k), 200 + static_cast<std::uint64_t>(k));
    std::mt19937_64 rng(300 + static_cast<std::uint64_t>(k));
    Tensor x = randn({10, 6}, rng, false, 1.0);
    std::vector<int> y = random_labels(10, 4, rng);
    TrainConfig tc;
    Tape pt, gt;
    LossGraph plain = plain_sum_loss(m, x, y, tc, IscMode::off, &pt);
    LossGraph ge = ge_forward_loss(m, x, y, tc, IscMode::off, &gt);
    for (int j = 0; j < k && ok; ++j) {
      pt.reset_grads();
      pt.backward(plain.ce[static_cast<std::size_t>(j)]);
      gt.reset_grads();
      gt.backward(ge.ce[static_cast<std::size_t>(j)]);
      for (int i = 0; i <= j && ok; ++i) {
        Tensor w = m.param("block" + std::to_string(i + 1) + ".weight");
        std::vector<double> gp = pt.grad_of(w);
        std::vector<double> gg = gt.grad_of(w);
        double factor = 1.0 / static_cast<double>(k - i);
        for (std::size_t c = 0; c < gp.size(); ++c) {
          double expect = gp[c] * factor;
          double denom = std::max({std::fabs(expect), std::fabs(gg[c]), 1e-300});
          double rel = std::fabs(gg[c] - expect) / denom;
          worst = std::max(worst, rel);
          if (rel > 1e-10) {
            ok = false;
            detail = "k=" + std::to_string(k) + " exit " + std::to_string(j + 1) +
                     " block " + std::to_string(i + 1);
            break;
          }
        }
      }
    }
  }
  if (ok) detail = "k in {2..5}, worst rel err " + fmt_double(worst);
  report(2, "per-loss gradients telescope to 1/(k-i+1) at every block", ok, detail);
}

// ---------------------------------------------------------------------------
// 3. Variance: across >= 100 resampled batches, the equilibrium total-gradient
//    variance obeys the 2x per-loss bound and the exact 1/(k-i+1)^2 law.
// ---------------------------------------------------------------------------
void criterion3() {
  DatasetSpec ds;
  ds.kind = DatasetKind::synthetic_easy_hard;
  ds.n_train = 1200;
  ds.n_val = 100;
  ds.n_test = 100;
  ds.input_dim = 6;
  ds.classes = 4;
  ds.difficulty_mix = 0.3;
  ds.seed = 31;
  DataSplits data = generate_synthetic(ds);
  MultiExitModel m = MultiExitModel::build(small_model(4), 301);
  TrainConfig tc;
  tc.batch_size = 24;
  tc.seed = 9;
  GradVarianceReport rep = measure_grad_variance(m, data.train, tc, 100);
  bool ok = rep.rows.size() == 4;
  std::string detail;
  double worst = 0.0;
  for (const auto& row : rep.rows) {
    if (row.var_ge > 2.0 * row.max_perloss_var + 1e-12) {
      ok = false;
      detail = "bound broken at block " + std::to_string(row.block);
      break;
    }
    double expect = row.var_plain * row.expected_ratio;
    double denom = std::max({std::fabs(expect), std::fabs(row.var_ge), 1e-300});
    double rel = std::fabs(row.var_ge - expect) / denom;
    worst = std::max(worst, rel);
    if (rel > 1e-8) {
      ok = false;
      detail = "scaling law off at block " + std::to_string(row.block) +
               " rel " + fmt_double(rel);
      break;
    }
  }
  if (ok)
    detail = "100 batches, 4 blocks, worst scaling rel err " + fmt_double(worst);
  report(3, "gradient variance bounded by 2x max per-loss variance", ok, detail);
}

// ---------------------------------------------------------------------------
// 4. Finite differences: every differentiable op, separately and composed
//    under one loss, within 1e-5 relative at eps 1e-4.
// ---------------------------------------------------------------------------
void criterion4() {
  std::mt19937_64 rng(401);
  Tensor x = randn({3, 4}, rng, false);
  Tensor w1 = randn({4, 4}, rng, true);
  Tensor b1 = randn({4}, rng, true);
  Tensor w2 = randn({4, 3}, rng, true);
  Tensor b2 = randn({3}, rng, true);
  Tensor mixer = randn({3, 3}, rng, true);
  Tensor teacher = randn({3, 3}, rng, false);
  std::vector<int> y = {0, 2, 1};
  GradCheckReport rep = check_gradients(
      [&](Tape* tape) {
        Tensor h = ops::relu(ops::add_bias(ops::matmul(x, w1, tape), b1, tape), tape);
        Tensor logits = ops::add_bias(ops::matmul(h, w2, tape), b2, tape);
        Tensor mixed = ops::add(logits, ops::matmul(logits, mixer, tape), tape);
        Tensor p = ops::softmax_with_temperature(mixed, 2.0, tape);
        Tensor ce = ops::cross_entropy_loss(mixed, y, tape);
        Tensor kl = ops::kl_divergence_loss(teacher, mixed, 2.0, tape);
        Tensor extra = ops::mean(ops::mul(p, p, tape), tape);
        Tensor lg = ops::mean(ops::log(ops::scale(p, 2.0, tape), tape), tape);
        Tensor a = ops::add(ce, ops::scale(kl, 0.7, tape), tape);
        return ops::add(a, ops::add(ops::scale(extra, 0.3, tape),
                                    ops::scale(lg, 0.1, tape), tape),
                        tape);
      },
      {w1, b1, w2, b2, mixer}, 1e-4);
  bool ok = rep.max_rel_err < 1e-5 && rep.n_params_skipped == 0 &&
            rep.n_params_checked == 44;
  report(4, "all differentiable ops pass central finite differences",
         ok, "max rel err " + fmt_double(rep.max_rel_err) + " over 44 coordinates");
}

// ---------------------------------------------------------------------------
// 5. Distillation identities: alpha=1 is bitwise cross-entropy, perfect
//    student costs zero, teacher logits receive no gradient at all.
// ---------------------------------------------------------------------------
void criterion5() {
  bool ok = true;
  std::string detail;
  MultiExitModel m = MultiExitModel::build(small_model(3), 501);
  std::mt19937_64 rng(502);
  Tensor x = randn({10, 6}, rng, false, 1.0);
  std::vector<int> y = random_labels(10, 4, rng);

  ForwardOutputs fw = m.forward_all(x, IscMode::off);
  Tensor pure_ce = ofa_exit_loss(fw.logits[2], fw.logits[0], y, 1.0, 2.0, nullptr);
  if (pure_ce.item() != ops::cross_entropy_loss(fw.logits[0], y).item()) {
    ok = false;
    detail = "alpha=1 is not bitwise CE";
  }

  if (ok) {
    Tensor t = Tensor::from({2, 3}, {1.0, 0.0, -1.0, 0.3, 0.2, 0.1});
    Tensor self = ofa_exit_loss(t, t.clone(), {0, 1}, 0.0, 3.0, nullptr);
    if (std::fabs(self.item()) > 1e-12) {
      ok = false;
      detail = "self distillation loss " + fmt_double(self.item());
    }
  }

  if (ok) {
    // Pure distillation terms: nothing may flow back into the teacher exit.
    Tape tape;
    ForwardOutputs fwt = m.forward_all(x, IscMode::off, &tape);
    Tensor teacher = ops::stop_gradient(fwt.logits[2], &tape);
    Tensor loss = ops::add(
        ofa_exit_loss(teacher, fwt.logits[0], y, 0.0, 2.0, &tape),
        ofa_exit_loss(teacher, fwt.logits[1], y, 0.0, 2.0, &tape), &tape);
    tape.backward(loss);
    for (const std::string& name :
         {"head3.out.weight", "head3.out.bias", "block3.weight", "block3.bias"}) {
      for (double g : tape.grad_of(m.param(name)))
        if (g != 0.0) {
          ok = false;
          detail = std::string("teacher-side gradient on ") + name;
          break;
        }
      if (!ok) break;
    }
  }
  report(5, "distillation identities hold (alpha=1, self-teaching, frozen teacher)",
         ok, detail);
}

// ---------------------------------------------------------------------------
// 6. Transfer isolation: stopping the inter-exit logits makes every parameter
//    gradient identical to a graph where the transfer arrives as a constant,
//    and merged logits equal own-plus-transferred exactly.
// ---------------------------------------------------------------------------
void criterion6() {
  bool ok = true;
  std::string detail;
  ModelConfig cfg = small_model(3);
  cfg.isc_enabled = true;
  cfg.isc_transform = IscTransform::linear;
  MultiExitModel m = MultiExitModel::build(cfg, 601);
  std::mt19937_64 rng(602);
  for (const auto& p : m.params())
    if (p.name.find(".isc.") != std::string::npos) {
      Tensor t = p.tensor;
      std::normal_distribution<double> d(0.0, 0.4);
      for (int i = 0; i < t.size(); ++i) t.data()[i] = d(rng);
    }
  Tensor x = randn({8, 6}, rng, false, 1.0);
  std::vector<int> y = random_labels(8, 4, rng);

  // Live graph: gradient-stopped transfer.
  Tape ta;
  ForwardOutputs fa = m.forward_all(x, IscMode::train, &ta);
  Tensor loss_a = ops::cross_entropy_loss(fa.logits[0], y, &ta);
  for (int i = 1; i < 3; ++i)
    loss_a = ops::add(loss_a,
                      ops::cross_entropy_loss(fa.logits[static_cast<std::size_t>(i)], y, &ta),
                      &ta);
  ta.backward(loss_a);

  // Severed graph: the transferred logits arrive as plain constants.
  Tape tb;
  Tensor h = x;
  std::vector<Tensor> merged;
  for (int i = 0; i < 3; ++i) {
    h = m.apply_block(i, h, &tb);
    Tensor lg = m.apply_head(i, h, &tb);
    if (i > 0) {
      Tensor prev_const = merged[static_cast<std::size_t>(i - 1)].clone();
      Tensor t = m.apply_isc_transform(i - 1, prev_const, &tb);
      lg = ops::add(lg, t, &tb);
    }
    merged.push_back(lg);
  }
  Tensor loss_b = ops::cross_entropy_loss(merged[0], y, &tb);
  for (int i = 1; i < 3; ++i)
    loss_b = ops::add(loss_b,
                      ops::cross_entropy_loss(merged[static_cast<std::size_t>(i)], y, &tb),
                      &tb);
  tb.backward(loss_b);

  for (int i = 0; i < 3 && ok; ++i)
    if (fa.logits[static_cast<std::size_t>(i)].values() !=
        merged[static_cast<std::size_t>(i)].values()) {
      ok = false;
      detail = "severed forward drifted at exit " + std::to_string(i + 1);
    }

  if (ok) {
    for (const auto& p : m.params()) {
      std::vector<double> ga = ta.grad_of(p.tensor);
      std::vector<double> gb = tb.grad_of(p.tensor);
      for (std::size_t c = 0; c < ga.size(); ++c)
        if (std::fabs(ga[c] - gb[c]) > 1e-12) {
          ok = false;
          detail = "gradient differs on " + p.name;
          break;
        }
      if (!ok) break;
    }
  }

  if (ok) {
    // Merged logits are exactly own-plus-transferred, recomputed pointwise.
    ForwardOutputs own = m.forward_all(x, IscMode::off);
    for (int i = 1; i < 3 && ok; ++i) {
      Tensor t = m.apply_isc_transform(i - 1, fa.logits[static_cast<std::size_t>(i - 1)]);
      Tensor sum = ops::add(own.logits[static_cast<std::size_t>(i)], t);
      if (sum.values() != fa.logits[static_cast<std::size_t>(i)].values()) {
        ok = false;
        detail = "merged logits not own+transfer at exit " + std::to_string(i + 1);
      }
    }
  }
  report(6, "stopped transfer gradients match constant injection exactly", ok, detail);
}

// ---------------------------------------------------------------------------
// 7. Early-exit protocol: the incremental path agrees with the all-exits
//    oracle sample by sample; degenerate schedules pin to the first and last
//    exits.
// ---------------------------------------------------------------------------
void criterion7() {
  bool ok = true;
  std::string detail;
  DatasetSpec ds;
  ds.kind = DatasetKind::synthetic_easy_hard;
  ds.n_train = 1500;
  ds.n_val = 500;
  ds.n_test = 1000;
  ds.input_dim = 6;
  ds.classes = 4;
  ds.difficulty_mix = 0.3;
  ds.seed = 71;
  DataSplits data = generate_synthetic(ds);
  MultiExitModel m = MultiExitModel::build(small_model(4, 6, 4, 16), 701);
  TrainConfig tc;
  tc.phase1_epochs = 4;
  tc.phase2_epochs = 0;
  tc.lr0 = 0.05;
  tc.seed = 702;
  train_phase1(m, data, tc);

  std::mt19937_64 rng(703);
  std::uniform_real_distribution<double> td(0.3, 0.95);
  for (int trial = 0; trial < 5 && ok; ++trial) {
    ThresholdSchedule s;
    s.thresholds = {td(rng), td(rng), td(rng), 0.0};
    std::vector<AdaptivePrediction> a = predict_adaptive(m, data.test.x, s);
    std::vector<AdaptivePrediction> b = predict_adaptive_oracle(m, data.test.x, s);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].label != b[i].label || a[i].exit_index != b[i].exit_index ||
          a[i].cost != b[i].cost) {
        ok = false;
        detail = "mismatch vs oracle at sample " + std::to_string(i);
        break;
      }
  }

  if (ok) {
    ThresholdSchedule zero;
    zero.thresholds = {0.0, 0.0, 0.0, 0.0};
    for (const auto& p : predict_adaptive(m, data.test.x, zero))
      if (p.exit_index != 1) {
        ok = false;
        detail = "zero thresholds did not exit first";
        break;
      }
  }
  if (ok) {
    ThresholdSchedule never;
    never.thresholds = {1.0 + 1e-9, 1.0 + 1e-9, 1.0 + 1e-9, 0.0};
    for (const auto& p : predict_adaptive(m, data.test.x, never))
      if (p.exit_index != 4) {
        ok = false;
        detail = "impossible thresholds did not fall through";
        break;
      }
  }
  if (ok) detail = "1000 samples, 5 schedules, both boundaries";
  report(7, "incremental early-exit path matches the oracle scan", ok, detail);
}

// ---------------------------------------------------------------------------
// 8. Budgeted evaluation on the 70/30 easy/hard mixture: realized test cost
//    meets every budget within 10%, the cost-accuracy curve is monotone
//    within half a point, and the mid budget keeps >= 99% of full accuracy
//    at <= 60% of full cost.
// ---------------------------------------------------------------------------
void criterion8() {
  bool ok = true;
  std::string detail;
  DatasetSpec ds;
  ds.kind = DatasetKind::synthetic_easy_hard;
  ds.n_train = 4000;
  ds.n_val = 800;
  ds.n_test = 800;
  ds.input_dim = 12;
  ds.classes = 6;
  ds.difficulty_mix = 0.3;
  ds.seed = 81;
  DataSplits data = generate_synthetic(ds);

  ModelConfig mc = small_model(5, 12, 6, 32);
  MultiExitModel m = MultiExitModel::build(mc, 801);
  TrainConfig tc;
  tc.phase1_epochs = 8;
  tc.phase2_epochs = 4;
  tc.lr0 = 0.05;
  tc.seed = 802;
  train_phase1(m, data, tc);
  train_phase2(m, data, tc);

  double c1 = static_cast<double>(m.cost_prefix().front());
  double ck = static_cast<double>(m.cost_prefix().back());
  std::vector<double> budgets;
  for (int i = 0; i < 5; ++i) budgets.push_back(c1 + (ck - c1) * i / 4.0);
  BudgetReport rep = budgeted_batch_eval(m, data.val, data.test, budgets);

  double full_acc = anytime_eval(m, data.test).back().accuracy;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const BudgetPoint& p = rep.points[i];
    if (p.avg_cost > 1.10 * p.budget) {
      ok = false;
      detail = "test cost " + fmt_double(p.avg_cost) + " over budget " +
               fmt_double(p.budget);
      break;
    }
    if (i > 0 && p.accuracy < rep.points[i - 1].accuracy - 0.005) {
      ok = false;
      detail = "curve dipped at budget " + fmt_double(p.budget);
      break;
    }
  }
  if (ok) {
    const BudgetPoint& mid = rep.points[2];
    if (mid.accuracy < 0.99 * full_acc) {
      ok = false;
      detail = "mid accuracy " + fmt_double(mid.accuracy) + " vs full " +
               fmt_double(full_acc);
    } else if (mid.avg_cost > 0.60 * ck) {
      ok = false;
      detail = "mid cost " + fmt_double(mid.avg_cost) + " above 60% of " +
               fmt_double(ck);
    } else {
      detail = "mid budget: " + fmt_double(mid.accuracy) + " acc (full " +
               fmt_double(full_acc) + ") at " +
               fmt_double(100.0 * mid.avg_cost / ck) + "% of full cost";
    }
  }
  report(8, "budgeted batch evaluation meets budgets and keeps accuracy", ok, detail);
}

// ---------------------------------------------------------------------------
// 9. Technique grid over 5 seeds: the full combination does not lose to the
//    baseline, equilibrium scaling lowers block-1 gradient variance in most
//    seeds, and the whole grid stays under 30 minutes.
// ---------------------------------------------------------------------------
void criterion9() {
  double t0 = now_seconds();
  bool ok = true;
  std::string detail;

  RunConfig base;
  base.dataset = DatasetKind::synthetic_easy_hard;
  base.n_train = 4000;
  base.n_val = 800;
  base.n_test = 2000;
  base.input_dim = 10;
  base.classes = 6;
  base.difficulty_mix = 0.5;
  base.k = 4;
  base.block_widths = {8, 16, 24, 32};
  base.phase1_epochs = 10;
  base.phase2_epochs = 5;
  base.lr0 = 0.05;
  base.batch_size = 64;

  int ge_lower = 0;
  double full_minus_base_worst = 1.0;
  for (std::uint64_t seed = 1; seed <= 5 && ok; ++seed) {
    RunConfig cfg = base;
    cfg.seed = seed * 977;
    cfg.data_seed = seed * 131;
    std::vector<AblationCell> cells = run_ablation_grid(cfg);
    if (cells.size() != 8) {
      ok = false;
      detail = "grid size " + std::to_string(cells.size());
      break;
    }
    double baseline = cells[0].mean_acc;  // ge=0 isc=0 ofa=0
    double full = cells[7].mean_acc;      // ge=1 isc=1 ofa=1
    full_minus_base_worst = std::min(full_minus_base_worst, full - baseline);
    if (full < baseline - 0.002) {
      ok = false;
      detail = "seed " + std::to_string(seed) + ": full " + fmt_double(full) +
               " vs baseline " + fmt_double(baseline);
      break;
    }

    // Same data, same init: variance of the block-1 gradient across batches.
    DataSplits data = load_dataset(cfg.dataset_spec());
    MultiExitModel m = MultiExitModel::build(cfg.model_config(), cfg.seed);
    TrainConfig tc = cfg.train_config();
    GradVarianceReport rep = measure_grad_variance(m, data.train, tc, 40);
    if (rep.rows.front().var_ge < rep.rows.front().var_plain) ++ge_lower;
  }
  double elapsed = now_seconds() - t0;
  if (ok && ge_lower < 4) {
    ok = false;
    detail = "equilibrium lowered variance in only " + std::to_string(ge_lower) +
             "/5 seeds";
  }
  if (ok && elapsed >= 1800.0) {
    ok = false;
    detail = "grid took " + fmt_double(elapsed) + "s";
  }
  if (ok)
    detail = "worst full-vs-baseline gap " + fmt_double(full_minus_base_worst) +
             ", variance lower in " + std::to_string(ge_lower) + "/5 seeds, " +
             fmt_double(elapsed) + "s";
  report(9, "technique grid: full >= baseline - 0.2pt, variance drops", ok, detail);
}

// ---------------------------------------------------------------------------
// 10. Determinism and persistence: identical config+seed gives byte-identical
//     artifacts; checkpoints survive a save/load/save loop bit-exactly.
// ---------------------------------------------------------------------------
void criterion10() {
  bool ok = true;
  std::string detail;
  std::string root = (std::filesystem::temp_directory_path() / "exitnet_acceptance").string();
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);
  std::string cfg_path = root + "/run.cfg";
  {
    std::ofstream os(cfg_path);
    os << "dataset=synthetic_easy_hard\nn_train=600\nn_val=150\nn_test=150\n"
          "input_dim=6\nclasses=4\ndifficulty_mix=0.3\ndata_seed=5\n"
          "k=3\nblock_widths=10,10,10\nphase1_epochs=2\nphase2_epochs=1\n"
          "lr0=0.05\nbatch_size=64\nseed=17\n";
  }
  auto run_train = [&](const std::string& out) {
    std::vector<const char*> argv = {"exitnet", "train",      "--config",
                                     cfg_path.c_str(), "--out", out.c_str()};
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };
  std::string a = root + "/a", b = root + "/b";
  if (run_train(a) != 0 || run_train(b) != 0) {
    ok = false;
    detail = "training run failed";
  }
  if (ok && slurp(a + "/checkpoint.bin") != slurp(b + "/checkpoint.bin")) {
    ok = false;
    detail = "checkpoints differ between identical runs";
  }
  if (ok && slurp(a + "/train_log.csv") != slurp(b + "/train_log.csv")) {
    ok = false;
    detail = "training logs differ between identical runs";
  }
  if (ok) {
    MultiExitModel m = load_checkpoint(a + "/checkpoint.bin");
    save_checkpoint(m, root + "/resaved.bin");
    if (slurp(a + "/checkpoint.bin") != slurp(root + "/resaved.bin")) {
      ok = false;
      detail = "save/load/save changed bytes";
    }
  }
  if (ok) {
    MultiExitModel m = load_checkpoint(a + "/checkpoint.bin");
    MultiExitModel n = load_checkpoint(a + "/checkpoint.bin");
    for (std::size_t i = 0; i < m.params().size(); ++i)
      if (m.params()[i].tensor.values() != n.params()[i].tensor.values()) {
        ok = false;
        detail = "reloaded parameters differ";
        break;
      }
  }
  std::filesystem::remove_all(root);
  if (ok) detail = "bit-identical artifacts and round-trip";
  report(10, "same config and seed reproduce every byte", ok, detail);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  if (g_failures == 0) {
    std::cout << "all acceptance checks passed\n";
    return 0;
  }
  std::cout << g_failures << " acceptance check(s) failed\n";
  return 1;
}

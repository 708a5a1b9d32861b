#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exitnet/checkpoint.hpp"
#include "exitnet/config.hpp"
#include "exitnet/dataset.hpp"
#include "exitnet/inference.hpp"
#include "exitnet/manifest.hpp"
#include "exitnet/model.hpp"
#include "exitnet/train.hpp"

namespace exitnet {

namespace detail {

inline RunConfig effective_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
  RunConfig cfg = load_config_file(config_path);
  for (const std::string& s : overrides) apply_config_assignment(cfg, s);
  cfg.validate();
  return cfg;
}

inline std::string normalize_dir(std::string out) {
  while (!out.empty() && out.back() == '/') out.pop_back();
  if (out.empty()) throw ConfigError("output directory must be nonempty");
  std::filesystem::create_directories(out);
  return out;
}

inline void echo_config(const RunConfig& cfg, const std::string& dir,
                        RunManifest& manifest) {
  std::string text = serialize_config(cfg);
  std::ofstream os(dir + "/config.cfg", std::ios::trunc);
  if (!os) throw FormatError("cannot open for write: " + dir + "/config.cfg");
  os << text;
  os.flush();
  manifest.config_text = text;
  manifest.add_artifact("config", "config.cfg", dir);
}

inline std::vector<double> parse_budget_list(const std::string& s) {
  std::vector<double> budgets = parse_double_list(s);
  if (budgets.empty()) throw ConfigError("budgets list is empty");
  return budgets;
}

}  // namespace detail

inline int cmd_train(const RunConfig& cfg, const std::string& out) {
  std::string dir = detail::normalize_dir(out);
  DataSplits data = load_dataset(cfg.dataset_spec());
  MultiExitModel model = MultiExitModel::build(cfg.model_config(), cfg.seed);
  TrainConfig tc = cfg.train_config();
  TrainingLog log = train_phase1(model, data, tc);
  TrainingLog log2 = train_phase2(model, data, tc);
  log.rows.insert(log.rows.end(), log2.rows.begin(), log2.rows.end());
  save_checkpoint(model, dir + "/checkpoint.bin");
  log.write_csv(dir + "/train_log.csv");
  RunManifest manifest;
  manifest.dataset_seed = cfg.data_seed;
  detail::echo_config(cfg, dir, manifest);
  manifest.add_artifact("checkpoint", "checkpoint.bin", dir);
  manifest.add_artifact("train_log", "train_log.csv", dir);
  manifest.write(dir + "/manifest.json");
  std::cout << "trained " << cfg.phase1_epochs << "+" << cfg.phase2_epochs
            << " epochs; artifacts in " << dir << "\n";
  return 0;
}

inline int cmd_eval_anytime(const RunConfig& cfg, const std::string& ckpt,
                            const std::string& out) {
  std::string dir = detail::normalize_dir(out);
  MultiExitModel model = load_checkpoint(ckpt);
  DataSplits data = load_dataset(cfg.dataset_spec());
  std::vector<AnytimeRow> rows = anytime_eval(model, data.test);
  write_anytime_csv(rows, dir + "/anytime.csv");
  RunManifest manifest;
  manifest.dataset_seed = cfg.data_seed;
  detail::echo_config(cfg, dir, manifest);
  manifest.add_artifact("anytime", "anytime.csv", dir);
  manifest.write(dir + "/manifest.json");
  for (const auto& r : rows)
    std::cout << "exit " << r.exit_index << ": cost " << r.cost << " accuracy "
              << r.accuracy << "\n";
  return 0;
}

inline int cmd_calibrate(const RunConfig& cfg, const std::string& ckpt,
                         double budget, const std::string& out) {
  std::string dir = detail::normalize_dir(out);
  MultiExitModel model = load_checkpoint(ckpt);
  DataSplits data = load_dataset(cfg.dataset_spec());
  ThresholdSchedule sched =
      calibrate_thresholds(model, data.val, budget, model.cost_prefix());
  std::ofstream os(dir + "/thresholds.csv", std::ios::trunc);
  if (!os) throw FormatError("cannot open for write: " + dir + "/thresholds.csv");
  os << "# q=" << fmt_double(sched.q) << "\n";
  os << "# budget=" << fmt_double(sched.budget) << "\n";
  os << "exit_index,threshold\n";
  for (std::size_t i = 0; i < sched.thresholds.size(); ++i)
    os << (i + 1) << "," << fmt_double(sched.thresholds[i]) << "\n";
  os.flush();
  if (!os) throw FormatError("write failed: " + dir + "/thresholds.csv");
  RunManifest manifest;
  manifest.dataset_seed = cfg.data_seed;
  detail::echo_config(cfg, dir, manifest);
  manifest.add_artifact("thresholds", "thresholds.csv", dir);
  manifest.write(dir + "/manifest.json");
  std::cout << "calibrated q=" << sched.q << " for budget " << budget << "\n";
  return 0;
}

inline int cmd_eval_budget(const RunConfig& cfg, const std::string& ckpt,
                           const std::vector<double>& budgets,
                           const std::string& out) {
  std::string dir = detail::normalize_dir(out);
  MultiExitModel model = load_checkpoint(ckpt);
  DataSplits data = load_dataset(cfg.dataset_spec());
  BudgetReport rep = budgeted_batch_eval(model, data.val, data.test, budgets);
  rep.write_csv(dir + "/budget_report.csv");
  rep.write_curve(dir + "/budget_curve.txt");
  RunManifest manifest;
  manifest.dataset_seed = cfg.data_seed;
  detail::echo_config(cfg, dir, manifest);
  manifest.add_artifact("budget_report", "budget_report.csv", dir);
  manifest.add_artifact("budget_curve", "budget_curve.txt", dir);
  manifest.write(dir + "/manifest.json");
  for (const auto& p : rep.points)
    std::cout << "budget " << p.budget << ": avg_cost " << p.avg_cost
              << " accuracy " << p.accuracy << "\n";
  return 0;
}

inline int cmd_grad_variance(const RunConfig& cfg, const std::string& ckpt,
                             int steps, const std::string& out) {
  std::string dir = detail::normalize_dir(out);
  MultiExitModel model = ckpt.empty()
                             ? MultiExitModel::build(cfg.model_config(), cfg.seed)
                             : load_checkpoint(ckpt);
  DataSplits data = load_dataset(cfg.dataset_spec());
  GradVarianceReport rep =
      measure_grad_variance(model, data.train, cfg.train_config(), steps);
  rep.write_csv(dir + "/grad_variance.csv");
  RunManifest manifest;
  manifest.dataset_seed = cfg.data_seed;
  detail::echo_config(cfg, dir, manifest);
  manifest.add_artifact("grad_variance", "grad_variance.csv", dir);
  manifest.write(dir + "/manifest.json");
  for (const auto& r : rep.rows)
    std::cout << "block " << r.block << ": var_plain " << r.var_plain
              << " var_ge " << r.var_ge << "\n";
  return 0;
}

struct AblationCell {
  bool ge = false;
  bool isc = false;
  bool ofa = false;
  std::vector<double> exit_acc;
  double mean_acc = 0.0;
};

/// One cell of the technique grid: fresh model, both phases, test accuracy
/// per exit.
inline AblationCell run_ablation_cell(const RunConfig& base,
                                      const DataSplits& data, bool ge,
                                      bool isc, bool ofa) {
  RunConfig cfg = base;
  cfg.ge = ge;
  cfg.isc = isc;
  cfg.ofa = ofa;
  MultiExitModel model = MultiExitModel::build(cfg.model_config(), cfg.seed);
  TrainConfig tc = cfg.train_config();
  train_phase1(model, data, tc);
  train_phase2(model, data, tc);
  IscMode mode = isc ? IscMode::infer : IscMode::off;
  std::vector<ExitEval> ev = evaluate_exits(model, data.test, mode);
  AblationCell cell;
  cell.ge = ge;
  cell.isc = isc;
  cell.ofa = ofa;
  double acc_sum = 0.0;
  for (const auto& e : ev) {
    cell.exit_acc.push_back(e.accuracy);
    acc_sum += e.accuracy;
  }
  cell.mean_acc = acc_sum / static_cast<double>(ev.size());
  return cell;
}

/// The full 2x2x2 grid over the three techniques, one row per combination.
inline std::vector<AblationCell> run_ablation_grid(const RunConfig& base) {
  DataSplits data = load_dataset(base.dataset_spec());
  std::vector<AblationCell> cells;
  for (int ge = 0; ge <= 1; ++ge)
    for (int isc = 0; isc <= 1; ++isc)
      for (int ofa = 0; ofa <= 1; ++ofa)
        cells.push_back(run_ablation_cell(base, data, ge != 0, isc != 0, ofa != 0));
  return cells;
}

inline void write_ablation_csv(const std::vector<AblationCell>& cells, int k,
                               const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for write: " + path);
  os << "ge,isc,ofa";
  for (int i = 1; i <= k; ++i) os << ",acc_exit_" << i;
  os << ",acc_mean\n";
  for (const auto& c : cells) {
    os << (c.ge ? 1 : 0) << "," << (c.isc ? 1 : 0) << "," << (c.ofa ? 1 : 0);
    for (double a : c.exit_acc) os << "," << fmt_double(a);
    os << "," << fmt_double(c.mean_acc) << "\n";
  }
  if (!os) throw FormatError("write failed: " + path);
}

inline int cmd_ablate(const RunConfig& cfg, const std::string& out) {
  std::string dir = detail::normalize_dir(out);
  std::vector<AblationCell> cells = run_ablation_grid(cfg);
  write_ablation_csv(cells, cfg.k, dir + "/ablation.csv");
  RunManifest manifest;
  manifest.dataset_seed = cfg.data_seed;
  detail::echo_config(cfg, dir, manifest);
  manifest.add_artifact("ablation", "ablation.csv", dir);
  manifest.write(dir + "/manifest.json");
  for (const auto& c : cells)
    std::cout << "ge=" << c.ge << " isc=" << c.isc << " ofa=" << c.ofa
              << " mean_acc=" << c.mean_acc << "\n";
  return 0;
}

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"multi-exit network trainer and adaptive-inference evaluator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ckpt_path, budgets_str;
  std::vector<std::string> overrides;
  double budget = 0.0;
  int steps = 100;

  auto add_common = [&](CLI::App* sub, bool needs_ckpt) {
    sub->add_option("--config", config_path, "key=value config file")->required();
    sub->add_option("--set", overrides, "override: key=value (repeatable)");
    sub->add_option("--out", out_dir, "output directory")->required();
    if (needs_ckpt)
      sub->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  };

  CLI::App* train = app.add_subcommand("train", "two-phase training run");
  add_common(train, false);

  CLI::App* anytime = app.add_subcommand("eval-anytime", "per-exit accuracy on the test split");
  add_common(anytime, true);

  CLI::App* calib = app.add_subcommand("calibrate", "budget-driven threshold calibration");
  add_common(calib, true);
  calib->add_option("--budget", budget, "average cost budget in MACs")->required();

  CLI::App* evalb = app.add_subcommand("eval-budget", "budgeted batch evaluation");
  add_common(evalb, true);
  evalb->add_option("--budgets", budgets_str, "comma list of ascending budgets")->required();

  CLI::App* gvar = app.add_subcommand("grad-variance", "gradient variance report");
  gvar->add_option("--config", config_path, "key=value config file")->required();
  gvar->add_option("--set", overrides, "override: key=value (repeatable)");
  gvar->add_option("--out", out_dir, "output directory")->required();
  gvar->add_option("--checkpoint", ckpt_path, "optional checkpoint file");
  gvar->add_option("--steps", steps, "number of resampled batches");

  CLI::App* ablate = app.add_subcommand("ablate", "2x2x2 technique grid");
  add_common(ablate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig cfg = detail::effective_config(config_path, overrides);
    if (train->parsed()) return cmd_train(cfg, out_dir);
    if (anytime->parsed()) return cmd_eval_anytime(cfg, ckpt_path, out_dir);
    if (calib->parsed()) return cmd_calibrate(cfg, ckpt_path, budget, out_dir);
    if (evalb->parsed())
      return cmd_eval_budget(cfg, ckpt_path,
                             detail::parse_budget_list(budgets_str), out_dir);
    if (gvar->parsed()) return cmd_grad_variance(cfg, ckpt_path, steps, out_dir);
    if (ablate->parsed()) return cmd_ablate(cfg, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace exitnet

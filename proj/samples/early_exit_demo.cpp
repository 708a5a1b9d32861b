// Calibrates confidence thresholds for a compute budget and shows where
// samples exit.
#include <iostream>

#include "exitnet/exitnet.hpp"

int main() {
  using namespace exitnet;

  DatasetSpec ds;
  ds.kind = DatasetKind::synthetic_easy_hard;
  ds.n_train = 3000;
  ds.n_val = 600;
  ds.n_test = 600;
  ds.input_dim = 12;
  ds.classes = 4;
  ds.difficulty_mix = 0.3;
  ds.seed = 11;
  DataSplits data = generate_synthetic(ds);

  ModelConfig mc;
  mc.input_dim = ds.input_dim;
  mc.num_classes = ds.classes;
  mc.k = 4;
  mc.block_widths = {32, 32, 32, 32};
  mc.isc_enabled = true;
  MultiExitModel model = MultiExitModel::build(mc, 2);

  TrainConfig tc;
  tc.phase1_epochs = 10;
  tc.phase2_epochs = 4;
  tc.isc_enabled = true;
  tc.lr0 = 0.05;
  tc.seed = 2;
  train_phase1(model, data, tc);
  train_phase2(model, data, tc);

  double full_cost = static_cast<double>(model.cost_prefix().back());
  double budget = 0.5 * full_cost;
  ThresholdSchedule sched =
      calibrate_thresholds(model, data.val, budget, model.cost_prefix());
  std::cout << "budget " << budget << " MACs (full network costs " << full_cost
            << "), calibrated q=" << sched.q << "\n";

  std::vector<AdaptivePrediction> preds =
      predict_adaptive(model, data.test.x, sched);
  std::vector<int> hist(static_cast<std::size_t>(mc.k), 0);
  long long correct = 0;
  double cost = 0.0;
  for (int r = 0; r < data.test.n(); ++r) {
    ++hist[static_cast<std::size_t>(preds[static_cast<std::size_t>(r)].exit_index) - 1];
    cost += static_cast<double>(preds[static_cast<std::size_t>(r)].cost);
    if (preds[static_cast<std::size_t>(r)].label == data.test.y[static_cast<std::size_t>(r)]) ++correct;
  }
  std::cout << "accuracy " << double(correct) / data.test.n() << " at avg cost "
            << cost / data.test.n() << "\n";
  for (int i = 0; i < mc.k; ++i)
    std::cout << "exit " << (i + 1) << ": " << hist[static_cast<std::size_t>(i)]
              << " samples\n";
  return 0;
}

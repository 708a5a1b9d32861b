// Trains a 3-exit network on synthetic clusters and prints per-exit accuracy.
#include <iostream>

#include "exitnet/exitnet.hpp"

int main() {
  using namespace exitnet;

  DatasetSpec ds;
  ds.kind = DatasetKind::synthetic_blobs;
  ds.n_train = 2000;
  ds.n_val = 400;
  ds.n_test = 400;
  ds.input_dim = 12;
  ds.classes = 4;
  ds.seed = 3;
  DataSplits data = generate_synthetic(ds);

  ModelConfig mc;
  mc.input_dim = ds.input_dim;
  mc.num_classes = ds.classes;
  mc.k = 3;
  mc.block_widths = {32, 32, 32};
  MultiExitModel model = MultiExitModel::build(mc, 1);

  TrainConfig tc;
  tc.phase1_epochs = 8;
  tc.phase2_epochs = 4;
  tc.batch_size = 64;
  tc.lr0 = 0.05;
  tc.seed = 1;
  train_phase1(model, data, tc);
  train_phase2(model, data, tc);

  for (const AnytimeRow& r : anytime_eval(model, data.test))
    std::cout << "exit " << r.exit_index << ": cost " << r.cost
              << " MACs, accuracy " << r.accuracy << "\n";
  return 0;
}

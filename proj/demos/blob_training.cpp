// Trains TeLU and ReLU MLPs on synthetic blobs with three seeds each and
// prints the summary cells.
#include <cstdio>

#include "telu_lab/harness.hpp"

int main() {
  using namespace telu_lab;
  const Splits data = load_splits(DatasetConfig{});

  TrainConfig cfg;
  cfg.layers = {LayerSpec::dense(32, 32), LayerSpec::act(), LayerSpec::dense(32, 10)};
  cfg.optimizer.kind = OptimizerKind::Momentum;
  cfg.optimizer.lr = 0.03;
  cfg.optimizer.weight_decay = 0.003;
  cfg.schedule.gamma = 0.2;
  cfg.schedule.milestones = scale_milestones({60, 120, 160}, 200, 20);
  cfg.epochs = 20;

  for (const auto& act : {ActivationKind::telu(), ActivationKind::relu()}) {
    cfg.activation = act;
    std::vector<TrialResult> trials;
    const TrialSummary s = replicate(cfg, {0, 1, 2}, data, 1, &trials);
    std::printf("%s %s: %s (conc %.2f)\n", s.activation.c_str(), to_string(s.optimizer), s.cell().c_str(), s.mean_conc);
  }
}

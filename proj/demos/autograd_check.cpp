// Builds a small conv net, runs one forward/backward pass and compares the
// gradients with central finite differences.
#include <cstdio>

#include "telu_lab/model.hpp"
#include "telu_lab/rng.hpp"

int main() {
  using namespace telu_lab;
  Model m({1, 8, 8},
          {LayerSpec::conv2d(1, 4, 3), LayerSpec::act(), LayerSpec::maxpool2(), LayerSpec::flatten(),
           LayerSpec::dense(36, 3)},
          ActivationKind::telu());
  m.init(42);

  Tensor x({4, 1, 8, 8});
  CounterRng rng(7);
  for (double& v : x.vec()) v = rng.normal();
  const std::vector<int> y{0, 1, 2, 1};

  const auto [loss, grads] = loss_and_gradients(m, x, y);
  std::printf("parameters: %zu\nloss: %.12f\n", m.parameter_count(), loss);
  for (std::size_t i = 0; i < grads.size(); ++i) std::printf("grad[%zu] %s\n", i, shape_str(grads[i].shape()).c_str());
  std::printf("worst relative gradient error vs finite differences: %.3e\n", finite_difference_check(m, x, y));
}

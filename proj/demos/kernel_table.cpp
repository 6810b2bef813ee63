// Prints f, f' and f'' for a few activations at a handful of points.
#include <cstdio>

#include "telu_lab/activation.hpp"

int main() {
  using namespace telu_lab;
  const ActivationKind kinds[] = {ActivationKind::telu(), ActivationKind::relu(), ActivationKind::gelu(),
                                  ActivationKind::mish()};
  std::printf("%-6s %6s %12s %12s %12s\n", "kind", "x", "f", "f'", "f''");
  for (const auto& k : kinds)
    for (double x : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
      const ScalarEval e = evaluate(k, x);
      std::printf("%-6s %6.2f %12.8f %12.8f %12.8f\n", to_string(k).c_str(), x, e.value, e.first, e.second);
    }
}

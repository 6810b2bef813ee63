#pragma once

#include "telu_lab/activation.hpp"
#include "telu_lab/autograd.hpp"
#include "telu_lab/config.hpp"
#include "telu_lab/data.hpp"
#include "telu_lab/errors.hpp"
#include "telu_lab/harness.hpp"
#include "telu_lab/io.hpp"
#include "telu_lab/model.hpp"
#include "telu_lab/optim.hpp"
#include "telu_lab/property_lab.hpp"
#include "telu_lab/quadrature.hpp"
#include "telu_lab/rng.hpp"
#include "telu_lab/tensor.hpp"

namespace telu_lab {
inline constexpr const char* kVersion = "0.1.0";
}

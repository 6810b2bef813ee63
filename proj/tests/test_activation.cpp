#include <cmath>
#include <limits>
#include <stdexcept>

#include <gtest/gtest.h>

#include "telu_lab/activation.hpp"

using namespace telu_lab;

namespace {

std::vector<ActivationKind> all_kinds() {
  std::vector<ActivationKind> out;
  for (auto tag : kAllActivationTags) out.emplace_back(tag);
  out.push_back(ActivationKind::elu(2.0));
  return out;
}

// Reference values computed at 40 significant digits.
constexpr double kTeluAt1 = 0.99132891580059984;
constexpr double kTeluAtMinus1 = -0.35213549054658698;
constexpr double kTeluAtMinus2 = -0.26903008257898038;
constexpr double kTanh1 = 0.76159415595576489;
constexpr double kTeluSecondAt0 = 0.83994868322805214;
constexpr double kTeluFirstAtMinus1 = 0.029872880714807;
constexpr double kTeluFirstAtMinus12 = -0.038125160598828;

}  // namespace

TEST(Telu, ReferenceValues) {
  EXPECT_EQ(eval(ActivationKind::telu(), 0.0), 0.0);
  EXPECT_NEAR(eval(ActivationKind::telu(), 1.0), kTeluAt1, 1e-15);
  EXPECT_NEAR(eval(ActivationKind::telu(), -1.0), kTeluAtMinus1, 1e-15);
  EXPECT_NEAR(eval(ActivationKind::telu(), -2.0), kTeluAtMinus2, 1e-15);
  EXPECT_GT(eval(ActivationKind::telu(), -2.0), eval(ActivationKind::telu(), -1.0));
}

TEST(Telu, Derivatives) {
  EXPECT_NEAR(derivative(ActivationKind::telu(), 0.0), kTanh1, 1e-15);
  EXPECT_NEAR(second_derivative(ActivationKind::telu(), 0.0), kTeluSecondAt0, 1e-14);
  EXPECT_NEAR(derivative(ActivationKind::telu(), -1.0), kTeluFirstAtMinus1, 1e-14);
  EXPECT_NEAR(derivative(ActivationKind::telu(), -1.2), kTeluFirstAtMinus12, 1e-14);
}

TEST(Telu, AsymptoticBranches) {
  const auto k = ActivationKind::telu();
  EXPECT_EQ(eval(k, 25.0), 25.0);
  EXPECT_EQ(derivative(k, 25.0), 1.0);
  EXPECT_EQ(second_derivative(k, 25.0), 0.0);
  const double x = -30.0;
  EXPECT_NEAR(eval(k, x) / (x * std::exp(x)), 1.0, 1e-12);
  EXPECT_NEAR(second_derivative(k, x), -2.62e-12, 1e-14);
  // branches meet the closed form smoothly
  for (double edge : {-20.0, 20.0}) {
    EXPECT_NEAR(eval(k, std::nextafter(edge, 0.0)), eval(k, edge), 1e-12);
    EXPECT_NEAR(derivative(k, std::nextafter(edge, 0.0)), derivative(k, edge), 1e-12);
  }
}

TEST(Activation, ZeroAtOrigin) {
  for (const auto& k : all_kinds()) EXPECT_EQ(eval(k, 0.0), 0.0) << to_string(k);
}

TEST(Activation, ReluExact) {
  const auto k = ActivationKind::relu();
  for (double x : {-3.0, -0.5, 0.25, 7.0}) EXPECT_EQ(eval(k, x), std::max(0.0, x));
  EXPECT_TRUE(evaluate(k, 0.0).nonsmooth);
  EXPECT_FALSE(evaluate(k, 0.1).nonsmooth);
}

TEST(Activation, NonFiniteInputRejected) {
  for (const auto& k : all_kinds()) {
    EXPECT_THROW(evaluate(k, std::numeric_limits<double>::quiet_NaN()), std::domain_error);
    EXPECT_THROW(evaluate(k, std::numeric_limits<double>::infinity()), std::domain_error);
  }
}

TEST(Activation, FiniteAcrossWideRange) {
  for (const auto& k : all_kinds())
    for (double x = -700.0; x <= 700.0; x += 0.37) {
      const auto e = evaluate(k, x);
      ASSERT_TRUE(std::isfinite(e.value) && std::isfinite(e.first) && std::isfinite(e.second)) << to_string(k) << " at " << x;
    }
}

TEST(Activation, NamesRoundTrip) {
  for (const auto& k : all_kinds()) {
    auto parsed = parse_activation(to_string(k));
    ASSERT_TRUE(parsed) << to_string(k);
    EXPECT_EQ(*parsed, k);
  }
  EXPECT_EQ(to_string(ActivationKind::elu(2.0)), "elu:2");
  EXPECT_TRUE(parse_activation("TeLU"));
  EXPECT_FALSE(parse_activation("nosuch"));
  EXPECT_FALSE(parse_activation("relu:2"));
  EXPECT_FALSE(parse_activation("elu:-1"));
  EXPECT_FALSE(parse_activation("elu:abc"));
}

TEST(Activation, KinkFlags) {
  EXPECT_TRUE(ActivationKind::relu().has_kink());
  EXPECT_TRUE(ActivationKind::elu(0.5).has_kink());
  EXPECT_FALSE(ActivationKind::elu(1.0).has_kink());
  EXPECT_FALSE(ActivationKind::telu().has_kink());
}

TEST(Activation, EluAlphaValidated) { EXPECT_THROW(ActivationKind::elu(0.0), std::invalid_argument); }

TEST(Activation, KnownClosedForms) {
  // SiLU(1) = 1 / (1 + e^-1); Mish(1) = tanh(ln(1 + e))
  EXPECT_NEAR(eval(ActivationKind::silu(), 1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(eval(ActivationKind::mish(), 1.0), std::tanh(std::log1p(std::exp(1.0))), 1e-15);
  EXPECT_NEAR(eval(ActivationKind::elu(2.0), -1.0), 2.0 * (std::exp(-1.0) - 1.0), 1e-15);
  EXPECT_NEAR(eval(ActivationKind::logish(), 1.0), std::log1p(1.0 / (1.0 + std::exp(-1.0))), 1e-15);
}

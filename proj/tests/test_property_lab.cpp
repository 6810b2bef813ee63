#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "telu_lab/property_lab.hpp"

using namespace telu_lab;

namespace {

const PropertyReport& find(const std::vector<PropertyReport>& reps, const std::string& id) {
  for (const auto& r : reps)
    if (r.claim_id == id) return r;
  throw std::runtime_error("missing claim " + id);
}

std::vector<ActivationKind> all_kinds() {
  std::vector<ActivationKind> out;
  for (auto tag : kAllActivationTags) out.emplace_back(tag);
  out.push_back(ActivationKind::elu(2.0));
  return out;
}

}  // namespace

TEST(Interval, Validation) {
  EXPECT_THROW(Interval(1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Interval(0.0, 1.0, 1), std::invalid_argument);
  const Interval iv(-5.0, 5.0, 1001);
  EXPECT_DOUBLE_EQ(iv.step(), 0.01);
  EXPECT_EQ(iv.grid().size(), 1001u);
}

TEST(PropertyLab, DerivativeConsistencyAllKinds) {
  const Interval iv(-5.0, 5.0, 1001);
  for (const auto& k : all_kinds()) {
    const auto g = grad_consistency(k, iv);
    EXPECT_LT(g.measured, 1e-5) << to_string(k);
    EXPECT_NE(g.verdict, Verdict::fails) << to_string(k);
    const auto c = curvature_consistency(k, iv);
    EXPECT_LT(c.measured, 1e-4) << to_string(k);
    EXPECT_NE(c.verdict, Verdict::fails) << to_string(k);
  }
  EXPECT_EQ(grad_consistency(ActivationKind::relu(), iv).verdict, Verdict::holds_with_caveat);
  EXPECT_EQ(grad_consistency(ActivationKind::telu(), iv).verdict, Verdict::holds);
}

TEST(PropertyLab, DerivativeRoots) {
  const auto telu = ActivationKind::telu();
  EXPECT_TRUE(find_derivative_roots(telu, Interval(0.0, 50.0)).empty());
  const auto roots = find_derivative_roots(telu, Interval(-1.2, -1.0));
  ASSERT_EQ(roots.size(), 1u);
  EXPECT_NEAR(roots[0], -1.0788600584646241, 1e-9);
  EXPECT_EQ(find_derivative_roots(telu, Interval(-50.0, 50.0)).size(), 1u);
}

TEST(PropertyLab, Lipschitz) {
  const auto est = lipschitz_estimate(ActivationKind::telu());
  EXPECT_NEAR(est.value, 1.0619753087179160, 1e-12);
  EXPECT_NEAR(est.argmax, 0.69656396039517238, 1e-6);
  EXPECT_LT(std::abs(est.value - est.grid_value), 1e-3);
  EXPECT_DOUBLE_EQ(lipschitz_estimate(ActivationKind::relu()).value, 1.0);
}

TEST(PropertyLab, BoundedOutput) {
  for (auto k : {ActivationKind::telu(), ActivationKind::relu(), ActivationKind::gelu(), ActivationKind::mish()}) {
    EXPECT_EQ(bounded_output_scan(k, Interval(-50.0, 50.0, 10000)).verdict, Verdict::holds) << to_string(k);
  }
}

TEST(PropertyLab, Saturation) {
  const auto s = saturation_profile(ActivationKind::telu());
  EXPECT_LT(s.pos_gap, 1e-8);
  EXPECT_LT(s.neg_limit, 1e-3);
}

TEST(PropertyLab, IntervalMeans) {
  for (double a : {1.0, 4.0, 8.0, 100.0}) EXPECT_NEAR(interval_mean(ActivationKind::relu(), a) / (a / 4.0), 1.0, 1e-12);
  const double expected[][2] = {{2.0, 0.35267277034563761}, {8.0, 1.9380215178030202},
                                {32.0, 7.9844582050192590}, {128.0, 31.996114551254813}};
  for (const auto& [a, m] : expected) EXPECT_NEAR(interval_mean(ActivationKind::telu(), a), m, 1e-12 * std::max(1.0, m));
}

TEST(PropertyLab, GaussianMeans) {
  const double telu_ref[][2] = {{0.5, 0.0867556048851631}, {1.0, 0.262131725039046308},
                                {2.0, 0.67317175276707031}, {4.0, 1.51105861786331818}};
  for (const auto& [s, m] : telu_ref) {
    EXPECT_NEAR(gaussian_mean(ActivationKind::telu(), s), m, 1e-12);
    EXPECT_NEAR(gaussian_mean(ActivationKind::relu(), s), s / std::sqrt(2.0 * std::numbers::pi), 1e-12);
  }
  // Hermite cross-check agrees only loosely
  EXPECT_NEAR(gauss_hermite_mean(ActivationKind::telu(), 1.0), 0.262131725039046308, 1e-5);
}

TEST(PropertyLab, MeanValuePoint) {
  const auto telu = ActivationKind::telu();
  const auto c = mean_value_point(telu, 0.0, 2.0);
  ASSERT_TRUE(c);
  EXPECT_GT(*c, 0.0);
  EXPECT_LT(*c, 2.0);
  EXPECT_NEAR(derivative(telu, *c), (eval(telu, 2.0) - eval(telu, 0.0)) / 2.0, 1e-8);
}

TEST(PropertyLab, SensitivityRankingSorted) {
  const auto rows = sensitivity_ranking(all_kinds(), Interval(-10.0, 10.0));
  ASSERT_EQ(rows.size(), all_kinds().size());
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i - 1].sup_abs_derivative, rows[i].sup_abs_derivative);
  EXPECT_GT(max_derivative_jump(ActivationKind::relu(), Interval(-1.0, 1.0)), 0.99);
  EXPECT_LT(max_derivative_jump(ActivationKind::telu(), Interval(-1.0, 1.0, 10001)), 1e-3);
}

TEST(PropertyLab, TeluClaimVerdicts) {
  const auto reps = verify_activation(ActivationKind::telu());
  EXPECT_EQ(find(reps, "telu.thm4_bounded_output").verdict, Verdict::holds);
  EXPECT_EQ(find(reps, "telu.thm6_lipschitz").verdict, Verdict::holds_with_caveat);
  EXPECT_EQ(find(reps, "telu.thm1_nonvanishing_nonnegative_axis").verdict, Verdict::holds);
  const auto& everywhere = find(reps, "telu.thm1_nonvanishing_everywhere");
  EXPECT_EQ(everywhere.verdict, Verdict::fails);
  ASSERT_TRUE(everywhere.witness);
  EXPECT_NEAR(everywhere.witness->first, -1.0788600584646241, 1e-9);
  EXPECT_EQ(find(reps, "telu.thm3_gaussian_mean_shift").verdict, Verdict::holds);
  EXPECT_EQ(find(reps, "telu.thm2_controlled_growth").verdict, Verdict::holds);
  EXPECT_EQ(find(reps, "telu.thm2_negative_saturation").verdict, Verdict::holds);
  EXPECT_EQ(find(reps, "telu.continuity_ivt_mvt").verdict, Verdict::holds);
}

TEST(PropertyLab, ReluVerdicts) {
  const auto reps = verify_activation(ActivationKind::relu());
  EXPECT_EQ(find(reps, "relu.relu_interval_mean").verdict, Verdict::holds);
  for (const auto& r : reps) EXPECT_NE(r.verdict, Verdict::fails) << r.claim_id;
}

TEST(PropertyLab, JsonShape) {
  const auto j = to_json(verify_activation(ActivationKind::telu()));
  ASSERT_TRUE(j.is_array());
  for (const auto& r : j) {
    EXPECT_TRUE(r.contains("claim_id"));
    EXPECT_TRUE(r.contains("verdict"));
    EXPECT_TRUE(r.contains("witness"));
    EXPECT_TRUE(r.contains("measured"));
    EXPECT_TRUE(r.contains("tolerance"));
  }
}

#include <cmath>

#include <gtest/gtest.h>

#include "telu_lab/harness.hpp"

using namespace telu_lab;

namespace {

// 2000 blobs in 32 dims: 1800 train / 200 valid, plus 500 test.
const Splits& blobs() {
  static const Splits s = [] {
    DatasetConfig d;
    return load_splits(d);
  }();
  return s;
}

TrainConfig base_config() {
  TrainConfig c;
  c.layers = {LayerSpec::dense(32, 32), LayerSpec::act(), LayerSpec::dense(32, 10)};
  c.optimizer.lr = 0.1;
  c.optimizer.weight_decay = 0.003;
  c.schedule.gamma = 0.2;
  c.schedule.milestones = {6, 12, 16};
  c.epochs = 20;
  c.batch = 128;
  return c;
}

TrialResult fake_trial(std::vector<double> valid, double test, bool diverged = false) {
  TrialResult t;
  t.activation = "telu";
  t.valid_acc = std::move(valid);
  t.final_test_acc = test;
  t.diverged = diverged;
  return t;
}

bool same_result(const TrialResult& a, const TrialResult& b) {
  return a.train_acc == b.train_acc && a.train_loss == b.train_loss && a.valid_acc == b.valid_acc &&
         a.valid_loss == b.valid_loss && a.final_test_acc == b.final_test_acc && a.best_valid_acc == b.best_valid_acc &&
         a.best_valid_epoch == b.best_valid_epoch && a.diverged == b.diverged && a.divergence_epoch == b.divergence_epoch;
}

}  // namespace

TEST(Splits, DefaultBlobs) {
  EXPECT_EQ(blobs().train.size(), 1800u);
  EXPECT_EQ(blobs().valid.size(), 200u);
  EXPECT_EQ(blobs().test.size(), 500u);
  DatasetConfig bad;
  bad.name = "imagenet";
  EXPECT_THROW(load_splits(bad), ConfigError);
  DatasetConfig nopath;
  nopath.name = "cifar10";
  EXPECT_THROW(load_splits(nopath), ConfigError);
}

TEST(RunTrial, LearnsBlobs) {
  const auto r = run_trial(base_config(), blobs());
  ASSERT_FALSE(r.diverged);
  ASSERT_EQ(r.train_acc.size(), 20u);
  ASSERT_EQ(r.valid_acc.size(), 20u);
  EXPECT_GT(r.train_acc.back(), 90.0);
  EXPECT_LE(conc_metric(r), r.best_valid_acc);
  for (double a : r.valid_acc) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 100.0);
  }
  EXPECT_TRUE(same_result(r, run_trial(base_config(), blobs())));
}

TEST(RunTrial, HugeLearningRateDiverges) {
  TrainConfig c = base_config();
  c.optimizer.lr = 1e10;
  const auto r = run_trial(c, blobs());
  EXPECT_TRUE(r.diverged);
  ASSERT_TRUE(r.divergence_epoch);
  EXPECT_LE(*r.divergence_epoch, 2u);
  EXPECT_EQ(r.valid_acc.size(), *r.divergence_epoch);
}

TEST(RunTrial, InvalidConfig) {
  TrainConfig c = base_config();
  c.epochs = 0;
  EXPECT_THROW(run_trial(c, blobs()), ConfigError);
  c = base_config();
  c.layers.back() = LayerSpec::dense(32, 7);
  EXPECT_THROW(run_trial(c, blobs()), ConfigError);
}

TEST(Conc, Definition) {
  EXPECT_EQ(conc_metric(fake_trial({80, 80, 80}, 0)), 80.0);
  EXPECT_EQ(conc_metric(fake_trial({20, 35, 12}, 0, true)), 12.0);
}

TEST(Summary, Arithmetic) {
  const std::vector<double> accs{91.0, 92.5, 90.25, 93.0, 89.75};
  std::vector<TrialResult> trials;
  for (double a : accs) trials.push_back(fake_trial({a}, a));
  const auto s = summarize(trials);
  double mean = 0.0;
  for (double a : accs) mean += a;
  mean /= 5.0;
  double ss = 0.0;
  for (double a : accs) ss += (a - mean) * (a - mean);
  EXPECT_DOUBLE_EQ(s.mean_test_acc, mean);
  EXPECT_DOUBLE_EQ(s.std_test_acc, std::sqrt(ss / 4.0));
  EXPECT_EQ(s.cell(), io::fixed(mean, 2) + "±" + io::fixed(std::sqrt(ss / 4.0), 2));
  EXPECT_EQ(summarize({fake_trial({50}, 50)}).std_test_acc, 0.0);
}

TEST(Summary, DivergedTrialsCount) {
  std::vector<TrialResult> trials{fake_trial({90}, 90), fake_trial({91}, 91), fake_trial({10}, 10, true),
                                  fake_trial({92}, 92), fake_trial({10}, 10, true)};
  const auto s = summarize(trials);
  EXPECT_EQ(s.divergences, 2u);
  EXPECT_NEAR(s.mean_test_acc, 58.6, 1e-12);
  EXPECT_GT(s.std_test_acc, 40.0);
}

TEST(Replicate, DeterministicAndParallelSafe) {
  TrainConfig c = base_config();
  c.epochs = 3;
  std::vector<TrialResult> a, b;
  const auto sa = replicate(c, {0, 1, 2}, blobs(), 1, &a);
  const auto sb = replicate(c, {0, 1, 2}, blobs(), 3, &b);
  EXPECT_EQ(trials_csv(a), trials_csv(b));
  EXPECT_EQ(sa.cell(), sb.cell());
  EXPECT_EQ(sa.n, 3u);
  EXPECT_THROW(replicate(c, {1, 1}, blobs()), ConfigError);
  const auto one = replicate(c, {4}, blobs());
  EXPECT_EQ(one.std_test_acc, 0.0);
}

TEST(Grid, SelectionRules) {
  GridSpec g{{0.1}, {0.003}, {0.2}, base_config()};
  g.base.epochs = 3;
  EXPECT_EQ(grid_search(g, {0}, blobs()).best_index, 0u);

  g.lr = {1e6, 0.1};
  const auto out = grid_search(g, {0}, blobs());
  EXPECT_EQ(out.best.optimizer.lr, 0.1);
  EXPECT_EQ(out.rows.size(), 2u);
  for (const auto& r : out.rows) EXPECT_LE(r.mean_best_valid, out.rows[out.best_index].mean_best_valid);

  // without milestones gamma never applies, so both rows train identically
  g.lr = {0.1};
  g.weight_decay = {0.0};
  g.gamma = {0.5, 0.2};
  g.base.schedule.milestones = {};
  const auto tie = grid_search(g, {0}, blobs());
  ASSERT_EQ(tie.rows[0].mean_best_valid, tie.rows[1].mean_best_valid);
  EXPECT_EQ(tie.best.schedule.gamma, 0.2);
}

TEST(Landscape, CenterExactAndDeterministic) {
  Model m(blobs().train.sample_shape(), base_config().layers);
  m.init(0);
  const Dataset probe = blobs().train.head(200, "probe");
  const auto s = landscape_slice(m, probe, 5, 1.0, 3);
  ASSERT_EQ(s.loss.size(), 5u);
  EXPECT_EQ(s.loss[2][2], evaluate(m, probe).loss);
  const auto t = landscape_slice(m, probe, 5, 1.0, 3);
  EXPECT_EQ(s.loss, t.loss);
  const auto u = landscape_slice(m, probe, 5, 1.0, 4);
  EXPECT_NE(s.loss, u.loss);
  EXPECT_THROW(landscape_slice(m, probe, 4, 1.0, 3), ConfigError);
  const auto csv = io::Csv::parse(surface_csv(s));
  EXPECT_EQ(csv.header[0], "beta\\alpha");
  EXPECT_EQ(csv.rows.size(), 5u);
  EXPECT_EQ(csv.header.size(), 6u);
}

TEST(Landscape, QuadraticToy) {
  const double p0 = 0.7;
  auto loss = [&](const std::vector<Tensor>& p) { return 0.5 * (p[0][0] - p0) * (p[0][0] - p0); };
  const auto s = landscape_surface({Tensor({1}, p0)}, loss, 3, 1.0, 0);
  const double scale = p0;  // the single filter is rescaled to |p0|
  EXPECT_NEAR(s.loss[1][0], 0.5 * scale * scale, 1e-15);
  EXPECT_EQ(s.loss[1][1], 0.0);
  EXPECT_NEAR(s.loss[1][2], 0.5 * scale * scale, 1e-15);
  EXPECT_NEAR(s.loss[0][1], 0.5 * scale * scale, 1e-15);
}

TEST(Fisher, LogisticHandExample) {
  // logits (w0 x, w1 x) with w = 0 and x = 1: p(y = 1) = sigmoid((w1 - w0) x) = 1/2
  Model m({1}, {LayerSpec::dense(1, 2)});
  Dataset one{Tensor({1, 1}, 1.0), {1}, {"toy", 2, "all"}};
  const auto diag = empirical_fisher_diag(m, one, 1);
  ASSERT_EQ(diag.size(), 4u);
  EXPECT_NEAR(diag[1], 0.25, 1e-12);
  for (double v : diag) EXPECT_NEAR(v, 0.25, 1e-12);
}

TEST(Fisher, NonnegativeAndLinearInSamples) {
  Model m(blobs().train.sample_shape(), base_config().layers);
  m.init(5);
  const Dataset d = blobs().train.head(40, "f");
  const auto full = empirical_fisher_diag(m, d, 40);
  for (double v : full) EXPECT_GE(v, 0.0);
  std::vector<std::size_t> second(20);
  for (std::size_t i = 0; i < 20; ++i) second[i] = 20 + i;
  const auto a = empirical_fisher_diag(m, d, 20);
  const auto b = empirical_fisher_diag(m, d.subset(second, "b"), 20);
  for (std::size_t i = 0; i < full.size(); ++i) EXPECT_NEAR(full[i], 0.5 * (a[i] + b[i]), 1e-12);
  EXPECT_THROW(empirical_fisher_diag(m, d, 41), ConfigError);
}

TEST(Fisher, SaturatedModelIsZero) {
  // One class, so log p(y | x) = 0 for every parameter value.
  Model m({2}, {LayerSpec::dense(2, 1)});
  m.init(1);
  Dataset d{Tensor::from_rows({{1, 2}, {3, 4}}), {0, 0}, {"one", 1, "all"}};
  for (double v : empirical_fisher_diag(m, d, 2)) EXPECT_EQ(v, 0.0);
}

TEST(Csv, TrialRowsSchema) {
  const auto csv = io::Csv::parse(trials_csv({fake_trial({80}, 79.5)}));
  EXPECT_EQ(csv.header, trial_csv_header());
  EXPECT_EQ(csv.rows[0][csv.column("final_test_acc")], "79.5");
  EXPECT_EQ(csv.rows[0][csv.column("conc")], "80");
}

#pragma once
/*
 * Training protocol at desk scale: single trials, multi-seed replication,
 * grid search, summary statistics, loss-landscape slices and the empirical
 * Fisher diagonal.
 *
 * Trials are independent and may run on worker threads; results are always
 * collected in seed (and grid) order, so parallelism never changes output.
 */

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "telu_lab/activation.hpp"
#include "telu_lab/data.hpp"
#include "telu_lab/errors.hpp"
#include "telu_lab/io.hpp"
#include "telu_lab/model.hpp"
#include "telu_lab/optim.hpp"
#include "telu_lab/rng.hpp"

namespace telu_lab {

inline constexpr const char* kConcDefinition =
    "conc = validation accuracy (%) at the final recorded epoch; for a diverged trial, the last recorded "
    "validation accuracy";
inline constexpr const char* kStdDefinition = "sample standard deviation (n - 1 denominator); 0 when n = 1";

struct DatasetConfig {
  std::string name = "blobs";  // blobs | cifar10 | cifar100
  std::string path;            // cifar: directory or batch file
  // blobs
  std::size_t n = 2000;
  std::size_t classes = 10;
  std::size_t dim = 32;
  double spread = 0.2;
  std::size_t test_n = 500;
  std::uint64_t seed = 0;
  // cifar
  std::size_t limit = 5000;
  std::size_t test_limit = 10000;
  bool standardize = false;
  std::optional<SplitSpec> split;  // default: 90% / 10% of the source, seed 0
};

struct TrainConfig {
  std::vector<LayerSpec> layers;
  ActivationKind activation = ActivationKind::telu();
  OptimizerConfig optimizer;
  LrSchedule schedule;  // initial_lr is taken from optimizer.lr
  std::size_t epochs = 20;
  std::size_t batch = 128;
  DatasetConfig dataset;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (layers.empty()) throw ConfigError("model.layers must not be empty");
    optimizer.validate();
    LrSchedule s = schedule;
    s.initial_lr = optimizer.lr;
    s.validate();
  }

  LrSchedule effective_schedule() const {
    LrSchedule s = schedule;
    s.initial_lr = optimizer.lr;
    return s;
  }
};

struct Splits {
  Dataset train;
  Dataset valid;
  Dataset test;
  std::string note;
};

inline Splits load_splits(const DatasetConfig& dc) {
  Dataset pool, test;
  if (dc.name == "blobs") {
    Dataset all = synthetic_blobs(dc.n + dc.test_n, dc.classes, dc.dim, dc.spread, dc.seed);
    std::vector<std::size_t> a(dc.n), b(dc.test_n);
    for (std::size_t i = 0; i < dc.n; ++i) a[i] = i;
    for (std::size_t i = 0; i < dc.test_n; ++i) b[i] = dc.n + i;
    pool = all.subset(a, "pool");
    test = all.subset(b, "test");
  } else if (dc.name == "cifar10" || dc.name == "cifar100") {
    if (dc.path.empty()) throw ConfigError("dataset.path is required for " + dc.name);
    const bool c100 = dc.name == "cifar100";
    Dataset full = c100 ? load_cifar100(dc.path, false) : load_cifar10(dc.path, false);
    Dataset full_test = c100 ? load_cifar100(dc.path, true) : load_cifar10(dc.path, true);
    pool = dc.limit > 0 ? full.head(dc.limit, "pool") : full;
    test = dc.test_limit > 0 ? full_test.head(dc.test_limit, "test") : full_test;
  } else {
    throw ConfigError("dataset.name: unknown dataset '" + dc.name + "' (blobs, cifar10, cifar100)");
  }
  SplitSpec spec;
  if (dc.split) {
    spec = *dc.split;
  } else {
    spec.valid = std::max<std::size_t>(1, pool.size() / 10);
    spec.train = pool.size() - spec.valid;
  }
  auto [train, valid] = split(pool, spec);
  if (dc.standardize) standardize({&train, &valid, &test}, train);
  return Splits{std::move(train), std::move(valid), std::move(test), "unstratified seeded split"};
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  double accuracy = 0.0;  // percent
  double loss = 0.0;      // mean cross-entropy; may be non-finite for a diverged model
};

// Index of the largest logit; NaN never wins, ties go to the lower class.
inline std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (std::isnan(row[j])) continue;
    if (!any || row[j] > best_v) {
      best = j;
      best_v = row[j];
      any = true;
    }
  }
  return best;
}

inline EvalResult evaluate(const Model& model, const Dataset& ds, std::size_t chunk = 512) {
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (const auto& idx : batch_indices(ds.size(), chunk, false, 0, 0)) {
    const Batch b = make_batch(ds, idx);
    const ForwardPass fp = forward(model, b.images, false, false);
    const std::size_t c = fp.logits.dim(1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (argmax_row(fp.logits.data().subspan(i * c, c)) == static_cast<std::size_t>(b.labels[i])) ++correct;
    loss_sum += softmax_cross_entropy(fp.logits, b.labels).loss * static_cast<double>(idx.size());
  }
  return {100.0 * static_cast<double>(correct) / static_cast<double>(ds.size()),
          loss_sum / static_cast<double>(ds.size())};
}

// ---------------------------------------------------------------------------
// Trials

struct TrialResult {
  std::string activation;
  OptimizerKind optimizer = OptimizerKind::SGD;
  std::uint64_t seed = 0;
  double lr = 0.0, weight_decay = 0.0, gamma = 1.0;

  std::vector<double> train_acc, train_loss, valid_acc, valid_loss;
  double final_test_acc = 0.0;
  double best_valid_acc = 0.0;
  std::size_t best_valid_epoch = 0;  // 1-based
  bool diverged = false;
  std::optional<std::size_t> divergence_epoch;  // 1-based
  double wall_time = 0.0;                       // seconds
};

inline double conc_metric(const TrialResult& r) { return r.valid_acc.empty() ? 0.0 : r.valid_acc.back(); }

// Trains from scratch with cfg.seed driving initialization and shuffling.
// A divergence ends the trial early and is recorded, not thrown.
inline TrialResult run_trial(const TrainConfig& cfg, const Splits& data) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TrialResult res;
  res.activation = to_string(cfg.activation);
  res.optimizer = cfg.optimizer.kind;
  res.seed = cfg.seed;
  res.lr = cfg.optimizer.lr;
  res.weight_decay = cfg.optimizer.weight_decay;
  res.gamma = cfg.schedule.gamma;

  Model model(data.train.sample_shape(), cfg.layers, cfg.activation);
  if (model.num_classes() != data.train.meta.num_classes) {
    throw ConfigError("model.layers: output width " + std::to_string(model.num_classes()) + " but dataset has " +
                      std::to_string(data.train.meta.num_classes) + " classes");
  }
  model.init(cfg.seed);
  OptimizerState state;
  const LrSchedule sched = cfg.effective_schedule();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(sched, epoch);
    try {
      for (const auto& idx : batch_indices(data.train.size(), cfg.batch, true, cfg.seed, epoch)) {
        const Batch b = make_batch(data.train, idx);
        auto [loss, grads] = loss_and_gradients(model, b.images, b.labels);
        (void)loss;
        step(state, model.params(), grads, cfg.optimizer, lr);
      }
    } catch (const DivergenceError&) {
      res.diverged = true;
      res.divergence_epoch = epoch + 1;
    }
    const EvalResult tr = evaluate(model, data.train);
    const EvalResult va = evaluate(model, data.valid);
    res.train_acc.push_back(tr.accuracy);
    res.train_loss.push_back(tr.loss);
    res.valid_acc.push_back(va.accuracy);
    res.valid_loss.push_back(va.loss);
    if (va.accuracy > res.best_valid_acc || res.valid_acc.size() == 1) {
      res.best_valid_acc = va.accuracy;
      res.best_valid_epoch = epoch + 1;
    }
    if (res.diverged) break;
  }
  res.final_test_acc = evaluate(model, data.test).accuracy;
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is
// rethrown after all workers stop.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::vector<TrialResult> run_trials(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                           const Splits& data, std::size_t jobs = 1) {
  std::vector<TrialResult> out(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.seed = seeds[i];
    out[i] = run_trial(c, data);
  });
  return out;
}

struct TrialSummary {
  std::string activation;
  OptimizerKind optimizer = OptimizerKind::SGD;
  std::size_t n = 0;
  double mean_test_acc = 0.0;
  double std_test_acc = 0.0;
  double mean_conc = 0.0;
  std::size_t divergences = 0;
  std::vector<double> test_accs;

  // Table cell "mean±std", two decimals.
  std::string cell() const { return io::fixed(mean_test_acc, 2) + "±" + io::fixed(std_test_acc, 2); }
};

inline std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline TrialSummary summarize(const std::vector<TrialResult>& trials) {
  if (trials.empty()) throw ConfigError("summary of zero trials");
  TrialSummary s;
  s.activation = trials.front().activation;
  s.optimizer = trials.front().optimizer;
  s.n = trials.size();
  std::vector<double> concs;
  for (const auto& t : trials) {
    s.test_accs.push_back(t.final_test_acc);
    concs.push_back(conc_metric(t));
    if (t.diverged) ++s.divergences;
  }
  std::tie(s.mean_test_acc, s.std_test_acc) = mean_and_sample_std(s.test_accs);
  s.mean_conc = mean_and_sample_std(concs).first;
  return s;
}

inline TrialSummary replicate(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds, const Splits& data,
                              std::size_t jobs = 1, std::vector<TrialResult>* trials_out = nullptr) {
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw ConfigError("seeds must be distinct");
  auto trials = run_trials(cfg, seeds, data, jobs);
  TrialSummary s = summarize(trials);
  if (trials_out) *trials_out = std::move(trials);
  return s;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridSpec {
  std::vector<double> lr;
  std::vector<double> weight_decay;
  std::vector<double> gamma;
  TrainConfig base;

  std::size_t size() const { return lr.size() * weight_decay.size() * gamma.size(); }

  void validate() const {
    if (lr.empty() || weight_decay.empty() || gamma.empty()) throw ConfigError("grid: lr, weight_decay and gamma lists must be non-empty");
  }

  // Cartesian product, lr outermost.
  std::vector<TrainConfig> configs() const {
    std::vector<TrainConfig> out;
    for (double a : lr)
      for (double w : weight_decay)
        for (double g : gamma) {
          TrainConfig c = base;
          c.optimizer.lr = a;
          c.optimizer.weight_decay = w;
          c.schedule.gamma = g;
          out.push_back(c);
        }
    return out;
  }
};

struct GridRow {
  TrainConfig config;
  std::vector<TrialResult> trials;
  double mean_best_valid = 0.0;
};

struct GridOutcome {
  TrainConfig best;
  std::size_t best_index = 0;
  std::vector<GridRow> rows;
};

// Selects the configuration with the highest mean best-validation accuracy;
// exact ties go to the lower lr, then lower weight decay, then lower gamma.
inline GridOutcome grid_search(const GridSpec& grid, const std::vector<std::uint64_t>& seeds, const Splits& data,
                               std::size_t jobs = 1) {
  grid.validate();
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  const auto cfgs = grid.configs();
  for (const auto& c : cfgs) c.validate();
  std::vector<TrialResult> flat(cfgs.size() * seeds.size());
  parallel_for(flat.size(), jobs, [&](std::size_t k) {
    TrainConfig c = cfgs[k / seeds.size()];
    c.seed = seeds[k % seeds.size()];
    flat[k] = run_trial(c, data);
  });
  GridOutcome out;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    GridRow row{cfgs[i], {flat.begin() + i * seeds.size(), flat.begin() + (i + 1) * seeds.size()}, 0.0};
    std::vector<double> bv;
    for (const auto& t : row.trials) bv.push_back(t.best_valid_acc);
    row.mean_best_valid = mean_and_sample_std(bv).first;
    out.rows.push_back(std::move(row));
  }
  auto key = [](const GridRow& r) {
    return std::make_tuple(r.config.optimizer.lr, r.config.optimizer.weight_decay, r.config.schedule.gamma);
  };
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const GridRow& cand = out.rows[i];
    const GridRow& best = out.rows[out.best_index];
    if (cand.mean_best_valid > best.mean_best_valid ||
        (cand.mean_best_valid == best.mean_best_valid && key(cand) < key(best))) {
      out.best_index = i;
    }
  }
  out.best = out.rows[out.best_index].config;
  return out;
}

// ---------------------------------------------------------------------------
// Result files

inline const std::vector<std::string>& trial_csv_header() {
  static const std::vector<std::string> h{"activation", "optimizer",      "seed",           "lr",   "wd",
                                          "gamma",      "final_test_acc", "best_valid_acc", "conc", "diverged"};
  return h;
}

inline std::vector<std::string> trial_csv_row(const TrialResult& t) {
  return {t.activation,          to_string(t.optimizer),        std::to_string(t.seed),
          io::num(t.lr),         io::num(t.weight_decay),       io::num(t.gamma),
          io::num(t.final_test_acc), io::num(t.best_valid_acc), io::num(conc_metric(t)),
          t.diverged ? "1" : "0"};
}

inline std::string trials_csv(const std::vector<TrialResult>& trials) {
  io::Csv csv{trial_csv_header(), {}};
  for (const auto& t : trials) csv.rows.push_back(trial_csv_row(t));
  return csv.str();
}

// Wall-clock times are kept apart from trials.csv so that file stays
// byte-reproducible.
inline std::string timings_csv(const std::vector<TrialResult>& trials) {
  io::Csv csv{{"activation", "optimizer", "seed", "lr", "wd", "gamma", "wall_time"}, {}};
  for (const auto& t : trials)
    csv.rows.push_back({t.activation, to_string(t.optimizer), std::to_string(t.seed), io::num(t.lr),
                        io::num(t.weight_decay), io::num(t.gamma), io::num(t.wall_time)});
  return csv.str();
}

inline nlohmann::json to_json(const TrialSummary& s) {
  return {{"activation", s.activation},
          {"optimizer", to_string(s.optimizer)},
          {"n", s.n},
          {"mean_test_acc", s.mean_test_acc},
          {"std_test_acc", s.std_test_acc},
          {"mean_conc", s.mean_conc},
          {"divergences", s.divergences},
          {"test_accs", s.test_accs},
          {"cell", s.cell()},
          {"std_definition", kStdDefinition},
          {"conc_definition", kConcDefinition}};
}

inline nlohmann::json to_json(const TrialResult& t) {
  auto clean = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return a;
  };
  return {{"activation", t.activation},
          {"optimizer", to_string(t.optimizer)},
          {"seed", t.seed},
          {"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"gamma", t.gamma},
          {"train_acc", clean(t.train_acc)},
          {"train_loss", clean(t.train_loss)},
          {"valid_acc", clean(t.valid_acc)},
          {"valid_loss", clean(t.valid_loss)},
          {"final_test_acc", t.final_test_acc},
          {"best_valid_acc", t.best_valid_acc},
          {"best_valid_epoch", t.best_valid_epoch},
          {"conc", conc_metric(t)},
          {"diverged", t.diverged},
          {"divergence_epoch", t.divergence_epoch ? nlohmann::json(*t.divergence_epoch) : nlohmann::json(nullptr)},
          {"wall_time", t.wall_time}};
}

// ---------------------------------------------------------------------------
// Loss landscape

struct Surface {
  std::vector<double> alphas;  // column coordinates
  std::vector<double> betas;   // row coordinates
  std::vector<std::vector<double>> loss;  // loss[row][col] at theta + alpha d1 + beta d2
  double center_loss = 0.0;
};

// A random direction shaped like `params`, rescaled filter by filter: each
// leading-axis slice of a rank >= 2 tensor gets the norm of the matching
// slice of `params`. A rank-1 tensor is one filter, or a zero direction when
// zero_rank1 is set (model biases).
inline std::vector<Tensor> filter_normalized_direction(const std::vector<Tensor>& params, CounterRng& rng,
                                                       bool zero_rank1) {
  std::vector<Tensor> dir;
  for (const auto& p : params) {
    Tensor d(p.shape());
    if (p.rank() >= 2 || !zero_rank1) {
      for (double& v : d.vec()) v = rng.normal();
      const std::size_t rows = p.rank() >= 2 ? p.dim(0) : 1, per = p.size() / rows;
      for (std::size_t r = 0; r < rows; ++r) {
        double dn = 0.0, pn = 0.0;
        for (std::size_t j = 0; j < per; ++j) {
          dn += d[r * per + j] * d[r * per + j];
          pn += p[r * per + j] * p[r * per + j];
        }
        const double scale = dn > 0.0 ? std::sqrt(pn) / std::sqrt(dn) : 0.0;
        for (std::size_t j = 0; j < per; ++j) d[r * per + j] *= scale;
      }
    }
    dir.push_back(std::move(d));
  }
  return dir;
}

// Loss on a grid_n x grid_n lattice over [-radius, radius]^2 spanned by two
// seeded filter-normalized directions. grid_n must be odd so the centre cell
// is the unperturbed parameters.
inline Surface landscape_surface(const std::vector<Tensor>& params,
                                 const std::function<double(const std::vector<Tensor>&)>& loss_fn, std::size_t grid_n,
                                 double radius, std::uint64_t seed, bool zero_rank1 = false) {
  if (grid_n < 1 || grid_n % 2 == 0) throw ConfigError("landscape.grid must be odd");
  if (!(radius > 0.0)) throw ConfigError("landscape.radius must be > 0");
  CounterRng r1(seed, 0xd1), r2(seed, 0xd2);
  const auto d1 = filter_normalized_direction(params, r1, zero_rank1);
  const auto d2 = filter_normalized_direction(params, r2, zero_rank1);
  Surface s;
  const std::size_t mid = grid_n / 2;
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double c = grid_n == 1 ? 0.0 : radius * (static_cast<double>(i) - static_cast<double>(mid)) / static_cast<double>(mid);
    s.alphas.push_back(c);
    s.betas.push_back(c);
  }
  s.center_loss = loss_fn(params);
  s.loss.assign(grid_n, std::vector<double>(grid_n, 0.0));
  std::vector<Tensor> probe = params;
  for (std::size_t bi = 0; bi < grid_n; ++bi)
    for (std::size_t ai = 0; ai < grid_n; ++ai) {
      if (ai == mid && bi == mid) {
        s.loss[bi][ai] = s.center_loss;
        continue;
      }
      const double a = s.alphas[ai], b = s.betas[bi];
      for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t j = 0; j < params[p].size(); ++j) probe[p][j] = params[p][j] + a * d1[p][j] + b * d2[p][j];
      s.loss[bi][ai] = loss_fn(probe);
    }
  return s;
}

inline Surface landscape_slice(const Model& model, const Dataset& data, std::size_t grid_n, double radius,
                               std::uint64_t seed) {
  Model probe = model;
  auto loss_fn = [&](const std::vector<Tensor>& params) {
    probe.params() = params;
    return evaluate(probe, data).loss;
  };
  return landscape_surface(model.params(), loss_fn, grid_n, radius, seed, true);
}

inline std::string surface_csv(const Surface& s) {
  io::Csv csv;
  csv.header.push_back("beta\\alpha");
  for (double a : s.alphas) csv.header.push_back(io::num(a));
  for (std::size_t r = 0; r < s.betas.size(); ++r) {
    std::vector<std::string> row{io::num(s.betas[r])};
    for (double v : s.loss[r]) row.push_back(io::num(v));
    csv.rows.push_back(std::move(row));
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// Empirical Fisher diagonal

// Mean over the first n_samples examples of the squared per-parameter
// gradient of log p(y | x), flattened in parameter order.
inline std::vector<double> empirical_fisher_diag(const Model& model, const Dataset& data, std::size_t n_samples) {
  if (n_samples == 0 || n_samples > data.size()) {
    throw ConfigError("fisher.samples must be in [1, " + std::to_string(data.size()) + "]");
  }
  std::vector<double> diag(model.parameter_count(), 0.0);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t idx[] = {i};
    const Batch b = make_batch(data, idx);
    auto [loss, grads] = loss_and_gradients(model, b.images, b.labels);
    (void)loss;
    std::size_t k = 0;
    for (const auto& g : grads)
      for (double v : g.data()) diag[k++] += v * v;  // grad of -log p squared == grad of log p squared
  }
  for (double& v : diag) v /= static_cast<double>(n_samples);
  return diag;
}

}  // namespace telu_lab

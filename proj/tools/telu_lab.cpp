// telu_lab command-line entry point.
//
// Exit codes: 0 success (a diverged trial is still success), 1 a verified
// property fails, 2 usage or configuration error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "telu_lab/telu_lab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace telu_lab;

namespace {

constexpr int kExitFails = 1;
constexpr int kExitUsage = 2;

struct RunOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string output = "out";
  std::size_t jobs = 0;  // 0: take from config
};

json metadata(const std::string& command, const json& config, const std::vector<std::string>& outputs) {
  return {{"tool", "telu_lab"},
          {"version", kVersion},
          {"command", command},
          {"config", config},
          {"rng", kRngName},
          {"definitions", {{"conc", kConcDefinition}, {"std", kStdDefinition}}},
          {"outputs", outputs}};
}

void write_json(const fs::path& path, const json& j) { io::write_atomic(path, j.dump(2) + "\n"); }

std::vector<ActivationKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<ActivationKind> out;
  if (names.empty()) {
    for (auto tag : kAllActivationTags) out.emplace_back(tag);
    return out;
  }
  for (const auto& n : names) {
    auto k = parse_activation(n);
    if (!k) throw UsageError("unknown activation '" + n + "'");
    out.push_back(*k);
  }
  return out;
}

std::string witness_text(const PropertyReport& r) {
  if (!r.witness) return "-";
  std::string s = io::num(r.witness->first);
  if (r.witness->second) s += ", " + io::num(*r.witness->second);
  return s;
}

int cmd_verify(const std::vector<std::string>& names, const std::string& output) {
  const auto kinds = parse_kinds(names);
  std::vector<PropertyReport> reports;
  for (const auto& k : kinds) {
    auto r = verify_activation(k);
    reports.insert(reports.end(), r.begin(), r.end());
  }
  std::vector<ActivationKind> all;
  for (auto tag : kAllActivationTags) all.emplace_back(tag);
  const fs::path dir(output);
  write_json(dir / "report.json", to_json(reports));
  json meta = metadata("verify", {{"activations", names.empty() ? json("all") : json(names)}}, {"report.json"});
  meta["sensitivity_ranking"] = to_json(sensitivity_ranking(all, Interval(-10.0, 10.0)));
  write_json(dir / "metadata.json", meta);

  std::size_t failed = 0, caveats = 0;
  for (const auto& r : reports) {
    if (r.verdict == Verdict::fails) {
      ++failed;
      std::printf("FAILS   %s  witness=(%s) measured=%s tolerance=%s\n", r.claim_id.c_str(), witness_text(r).c_str(),
                  io::num(r.measured).c_str(), io::num(r.tolerance).c_str());
      if (!r.note.empty()) std::printf("        %s\n", r.note.c_str());
    } else if (r.verdict == Verdict::holds_with_caveat) {
      ++caveats;
      std::printf("CAVEAT  %s  measured=%s\n", r.claim_id.c_str(), io::num(r.measured).c_str());
    }
  }
  std::printf("%zu claims: %zu hold, %zu hold with caveat, %zu fail -> %s\n", reports.size(),
              reports.size() - failed - caveats, caveats, failed, (dir / "report.json").string().c_str());
  return failed ? kExitFails : 0;
}

int cmd_kernels(const std::vector<std::string>& names, double lo, double hi, double step, const std::string& output) {
  const auto kinds = parse_kinds(names);
  if (!(step > 0.0) || !std::isfinite(step)) throw UsageError("--step must be > 0");
  if (!(hi >= lo)) throw UsageError("--hi must be >= --lo");
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  io::Csv csv{{"activation", "x", "f", "df", "d2f"}, {}};
  for (const auto& k : kinds)
    for (std::size_t i = 0; i < count; ++i) {
      const double x = lo + static_cast<double>(i) * step;
      const ScalarEval e = evaluate(k, x);
      csv.rows.push_back({to_string(k), io::num(x), io::num(e.value), io::num(e.first), io::num(e.second)});
    }
  const fs::path dir(output);
  io::write_atomic(dir / "kernels.csv", csv.str());
  write_json(dir / "metadata.json",
             metadata("kernels", {{"activations", names}, {"lo", lo}, {"hi", hi}, {"step", step}}, {"kernels.csv"}));
  std::printf("%zu rows x %zu activations -> %s\n", count, kinds.size(), (dir / "kernels.csv").string().c_str());
  return 0;
}

RunConfig resolve(const RunOptions& o, json& resolved) {
  std::optional<fs::path> path;
  if (!o.config.empty()) path = o.config;
  RunConfig rc = load_run_config(path, o.overrides);
  if (o.jobs > 0) rc.jobs = o.jobs;
  resolved = to_json(rc);
  return rc;
}

std::string cell_line(const TrialSummary& s) {
  return s.activation + " " + to_string(s.optimizer) + ": " + s.cell();
}

int cmd_train(const RunOptions& o) {
  json resolved;
  const RunConfig rc = resolve(o, resolved);
  const Splits data = load_splits(rc.train.dataset);
  const TrialResult r = run_trial(rc.train, data);
  const fs::path dir(o.output);
  io::write_atomic(dir / "trials.csv", trials_csv({r}));
  io::write_atomic(dir / "timings.csv", timings_csv({r}));
  write_json(dir / "trial.json", to_json(r));
  write_json(dir / "metadata.json", metadata("train", resolved, {"trials.csv", "timings.csv", "trial.json"}));
  std::printf("%s %s seed %llu: test %s, best valid %s (epoch %zu), conc %s%s\n", r.activation.c_str(),
              to_string(r.optimizer), static_cast<unsigned long long>(r.seed), io::fixed(r.final_test_acc, 2).c_str(),
              io::fixed(r.best_valid_acc, 2).c_str(), r.best_valid_epoch, io::fixed(conc_metric(r), 2).c_str(),
              r.diverged ? (", diverged at epoch " + std::to_string(*r.divergence_epoch)).c_str() : "");
  return 0;
}

int cmd_replicate(const RunOptions& o) {
  json resolved;
  const RunConfig rc = resolve(o, resolved);
  const Splits data = load_splits(rc.train.dataset);
  std::vector<TrialResult> trials;
  const TrialSummary s = replicate(rc.train, rc.seeds, data, rc.jobs, &trials);
  const fs::path dir(o.output);
  io::write_atomic(dir / "trials.csv", trials_csv(trials));
  io::write_atomic(dir / "timings.csv", timings_csv(trials));
  write_json(dir / "summary.json", to_json(s));
  write_json(dir / "metadata.json", metadata("replicate", resolved, {"trials.csv", "timings.csv", "summary.json"}));
  std::printf("%s\n", cell_line(s).c_str());
  if (s.divergences) std::printf("%zu of %zu trials diverged\n", s.divergences, s.n);
  return 0;
}

int cmd_grid(const RunOptions& o) {
  json resolved;
  const RunConfig rc = resolve(o, resolved);
  const GridSpec grid = rc.grid();
  grid.validate();
  std::printf("grid: %zu lr x %zu weight_decay x %zu gamma = %zu configs x %zu seeds = %zu trials\n", grid.lr.size(),
              grid.weight_decay.size(), grid.gamma.size(), grid.size(), rc.seeds.size(), grid.size() * rc.seeds.size());
  std::fflush(stdout);
  const Splits data = load_splits(rc.train.dataset);
  const GridOutcome g = grid_search(grid, rc.seeds, data, rc.jobs);

  std::vector<TrialResult> all;
  json rows = json::array();
  for (const auto& row : g.rows) {
    all.insert(all.end(), row.trials.begin(), row.trials.end());
    json jr = to_json(summarize(row.trials));
    jr["lr"] = row.config.optimizer.lr;
    jr["weight_decay"] = row.config.optimizer.weight_decay;
    jr["gamma"] = row.config.schedule.gamma;
    jr["mean_best_valid_acc"] = row.mean_best_valid;
    rows.push_back(jr);
  }
  const auto& best = g.rows[g.best_index];
  const fs::path dir(o.output);
  io::write_atomic(dir / "trials.csv", trials_csv(all));
  io::write_atomic(dir / "timings.csv", timings_csv(all));
  write_json(dir / "grid.json", {{"configs", rows},
                                 {"best_index", g.best_index},
                                 {"selection", "max mean best_valid_acc; ties -> lower lr, weight_decay, gamma"}});
  write_json(dir / "metadata.json", metadata("grid", resolved, {"trials.csv", "timings.csv", "grid.json"}));
  std::printf("best: lr=%s wd=%s gamma=%s (mean best valid %s)\n", io::num(best.config.optimizer.lr).c_str(),
              io::num(best.config.optimizer.weight_decay).c_str(), io::num(best.config.schedule.gamma).c_str(),
              io::fixed(best.mean_best_valid, 2).c_str());
  std::printf("%s\n", cell_line(summarize(best.trials)).c_str());
  return 0;
}

// A model initialized with the first seed and, if asked, trained on the
// training split with the same protocol as `train`.
Model prepared_model(const RunConfig& rc, const Splits& data, bool train) {
  Model model(data.train.sample_shape(), rc.train.layers, rc.train.activation);
  model.init(rc.train.seed);
  if (!train) return model;
  TrainConfig cfg = rc.train;
  OptimizerState state;
  const LrSchedule sched = cfg.effective_schedule();
  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (const auto& idx : batch_indices(data.train.size(), cfg.batch, true, cfg.seed, epoch)) {
        const Batch b = make_batch(data.train, idx);
        auto [loss, grads] = loss_and_gradients(model, b.images, b.labels);
        (void)loss;
        step(state, model.params(), grads, cfg.optimizer, lr_at_epoch(sched, epoch));
      }
    }
  } catch (const DivergenceError& e) {
    std::printf("training diverged (%s); probing the last finite parameters\n", e.what());
  }
  return model;
}

int cmd_landscape(const RunOptions& o) {
  json resolved;
  const RunConfig rc = resolve(o, resolved);
  const Splits data = load_splits(rc.train.dataset);
  const Model model = prepared_model(rc, data, rc.landscape.train);
  const Dataset probe = data.train.head(rc.landscape.samples, "landscape");
  const Surface s = landscape_slice(model, probe, rc.landscape.grid, rc.landscape.radius, rc.landscape.seed);
  const fs::path dir(o.output);
  io::write_atomic(dir / "landscape.csv", surface_csv(s));
  json meta = metadata("landscape", resolved, {"landscape.csv"});
  meta["center_loss"] = s.center_loss;
  meta["normalization"] = "filter-wise: conv per output channel, dense per output row; bias directions zero";
  write_json(dir / "metadata.json", meta);
  std::printf("%zux%zu surface, center loss %s -> %s\n", s.alphas.size(), s.betas.size(), io::num(s.center_loss).c_str(),
              (dir / "landscape.csv").string().c_str());
  return 0;
}

int cmd_fisher(const RunOptions& o) {
  json resolved;
  const RunConfig rc = resolve(o, resolved);
  const Splits data = load_splits(rc.train.dataset);
  const Model model = prepared_model(rc, data, rc.fisher.train);
  const auto diag = empirical_fisher_diag(model, data.train, rc.fisher.samples);
  io::Csv csv{{"tensor", "entry", "value"}, {}};
  std::size_t k = 0;
  double total = 0.0, peak = 0.0;
  for (std::size_t t = 0; t < model.params().size(); ++t)
    for (std::size_t j = 0; j < model.params()[t].size(); ++j, ++k) {
      csv.rows.push_back({std::to_string(t), std::to_string(j), io::num(diag[k])});
      total += diag[k];
      peak = std::max(peak, diag[k]);
    }
  const fs::path dir(o.output);
  io::write_atomic(dir / "fisher.csv", csv.str());
  json meta = metadata("fisher", resolved, {"fisher.csv"});
  meta["trace"] = total;
  meta["max"] = peak;
  meta["samples"] = rc.fisher.samples;
  write_json(dir / "metadata.json", meta);
  std::printf("%zu parameters, trace %s, max %s -> %s\n", diag.size(), io::num(total).c_str(), io::num(peak).c_str(),
              (dir / "fisher.csv").string().c_str());
  return 0;
}

void add_run_options(CLI::App* sub, RunOptions& o) {
  sub->add_option("-c,--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option("-s,--set", o.overrides, "override, e.g. optimizer.lr=0.05 (repeatable)");
  sub->add_option("-o,--output", o.output, "output directory")->capture_default_str();
  sub->add_option("-j,--jobs", o.jobs, "parallel trials (default: config value)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TeLU activation lab: property checks, kernels, training protocol, landscape and Fisher probes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::vector<std::string> verify_acts;
  std::string verify_out = "out/verify";
  auto* verify = app.add_subcommand("verify", "check analytic claims for activations (exit 1 if any fails)");
  verify->add_option("-a,--activations", verify_acts, "activation names (default: all)");
  verify->add_option("-o,--output", verify_out, "output directory")->capture_default_str();

  std::vector<std::string> kernel_acts;
  double lo = -4.0, hi = 4.0, kstep = 0.01;
  std::string kernel_out = "out/kernels";
  auto* kernels = app.add_subcommand("kernels", "tabulate f, f' and f'' on a grid");
  kernels->add_option("-a,--activations", kernel_acts, "activation names (default: all)");
  kernels->add_option("--lo", lo)->capture_default_str();
  kernels->add_option("--hi", hi)->capture_default_str();
  kernels->add_option("--step", kstep)->capture_default_str();
  kernels->add_option("-o,--output", kernel_out, "output directory")->capture_default_str();

  RunOptions train_o, rep_o, grid_o, land_o, fish_o;
  auto* train = app.add_subcommand("train", "one trial with the first seed");
  add_run_options(train, train_o);
  auto* rep = app.add_subcommand("replicate", "one trial per seed, summarized as mean±std");
  add_run_options(rep, rep_o);
  auto* grid = app.add_subcommand("grid", "grid search over lr x weight_decay x gamma");
  add_run_options(grid, grid_o);
  auto* land = app.add_subcommand("landscape", "2-D loss surface around a (trained) model");
  add_run_options(land, land_o);
  std::optional<std::size_t> land_grid;
  std::optional<double> land_radius;
  land->add_option("--grid", land_grid, "grid points per axis (odd)");
  land->add_option("--radius", land_radius, "half-width of the surface");
  auto* fish = app.add_subcommand("fisher", "empirical Fisher diagonal");
  add_run_options(fish, fish_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(verify_acts, verify_out);
    if (*kernels) return cmd_kernels(kernel_acts, lo, hi, kstep, kernel_out);
    if (*train) return cmd_train(train_o);
    if (*rep) return cmd_replicate(rep_o);
    if (*grid) return cmd_grid(grid_o);
    if (*land) {
      if (land_grid) land_o.overrides.push_back("landscape.grid=" + std::to_string(*land_grid));
      if (land_radius) land_o.overrides.push_back("landscape.radius=" + io::num(*land_radius));
      return cmd_landscape(land_o);
    }
    if (*fish) return cmd_fisher(fish_o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

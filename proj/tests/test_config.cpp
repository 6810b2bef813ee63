#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "telu_lab/config.hpp"

using namespace telu_lab;
using nlohmann::json;

namespace {

std::string error_of(const json& doc) {
  try {
    parse_run_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig rc = parse_run_config(json::object());
  EXPECT_EQ(rc.train.epochs, 20u);
  EXPECT_EQ(rc.train.batch, 128u);
  EXPECT_EQ(rc.train.schedule.milestones, (std::vector<std::size_t>{6, 12, 16}));
  EXPECT_EQ(rc.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(rc.train.layers.size(), 3u);
  EXPECT_EQ(rc.train.activation, ActivationKind::telu());
  EXPECT_EQ(rc.train.dataset.name, "blobs");
}

TEST(Config, FullDocument) {
  const json doc = json::parse(R"({
    "model": {"layers": [{"type": "dense", "in": 32, "out": 16}, {"type": "activation", "activation": "relu"},
                         {"type": "dense", "in": 16, "out": 10}]},
    "activation": "gelu",
    "optimizer": {"kind": "adamw", "lr": 0.001, "weight_decay": 0.01, "betas": [0.8, 0.99], "eps": 1e-7},
    "schedule": {"gamma": 0.5, "milestones": [3, 7]},
    "epochs": 10, "batch": 64,
    "dataset": {"name": "blobs", "n": 500, "split": {"train": 400, "valid": 100, "seed": 2}},
    "seeds": [5, 6],
    "grid": {"lr": [0.1], "weight_decay": [0], "gamma": [1]},
    "landscape": {"grid": 11, "radius": 0.5},
    "fisher": {"samples": 10, "train": false},
    "jobs": 2
  })");
  const RunConfig rc = parse_run_config(doc);
  EXPECT_EQ(rc.train.optimizer.kind, OptimizerKind::AdamW);
  EXPECT_EQ(rc.train.optimizer.beta1, 0.8);
  EXPECT_EQ(rc.train.optimizer.beta2, 0.99);
  EXPECT_EQ(rc.train.schedule.milestones, (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(rc.train.layers[1].activation, ActivationKind::relu());
  EXPECT_EQ(rc.train.activation, ActivationKind::gelu());
  EXPECT_EQ(rc.train.dataset.split->train, 400u);
  EXPECT_EQ(rc.train.seed, 5u);
  EXPECT_EQ(rc.landscape.grid, 11u);
  EXPECT_FALSE(rc.fisher.train);
  EXPECT_EQ(rc.jobs, 2u);
  // the resolved form parses back to the same thing
  EXPECT_EQ(to_json(parse_run_config(to_json(rc))), to_json(rc));
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(error_of(json{{"epochz", 1}}), "epochz: unknown key");
  EXPECT_EQ(error_of(json{{"optimizer", {{"lrr", 1}}}}), "optimizer.lrr: unknown key");
  EXPECT_EQ(error_of(json{{"dataset", {{"split", {{"trian", 1}}}}}}), "dataset.split.trian: unknown key");
  EXPECT_EQ(error_of(json::parse(R"({"model": {"layers": [{"type": "dense", "in": 32, "out": 32, "bias": 1}]}})")),
            "model.layers[0].bias: unknown key");
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_EQ(error_of(json{{"epochs", "ten"}}), "epochs: expected a non-negative integer");
  EXPECT_EQ(error_of(json{{"epochs", 0}}), "epochs must be >= 1");
  EXPECT_EQ(error_of(json{{"activation", "nosuch"}}), "activation: unknown activation 'nosuch'");
  EXPECT_EQ(error_of(json{{"optimizer", {{"kind", "adam"}}}}),
            "optimizer.kind: unknown optimizer 'adam' (sgd, momentum, adamw, rmsprop)");
  EXPECT_EQ(error_of(json{{"optimizer", {{"lr", -1}}}}), "optimizer.lr must be > 0");
  EXPECT_EQ(error_of(json{{"seeds", json::array()}}), "seeds: must not be empty");
  EXPECT_EQ(error_of(json{{"schedule", {{"milestones", {5, 3}}}}}), "schedule.milestones must be strictly increasing");
  EXPECT_NE(error_of(json{{"model", {{"layers", {{{"type", "conv9"}}}}}}}).find("unknown layer type"), std::string::npos);
}

TEST(Overrides, DottedPaths) {
  json doc = json::object();
  apply_override(doc, "optimizer.lr=0.05");
  apply_override(doc, "seeds=[0,1]");
  apply_override(doc, "activation=relu");
  apply_override(doc, "dataset.split.seed=9");
  EXPECT_EQ(doc["optimizer"]["lr"], 0.05);
  EXPECT_EQ(doc["seeds"], json({0, 1}));
  EXPECT_EQ(doc["activation"], "relu");
  EXPECT_EQ(doc["dataset"]["split"]["seed"], 9);
  doc["model"]["layers"] = json::array({{{"type", "dense"}, {"in", 32}, {"out", 32}}});
  apply_override(doc, "model.layers.0.out=64");
  EXPECT_EQ(doc["model"]["layers"][0]["out"], 64);
  EXPECT_THROW(apply_override(doc, "model.layers.5.out=1"), ConfigError);
  EXPECT_THROW(apply_override(doc, "model.layers.x.out=1"), ConfigError);
  EXPECT_THROW(apply_override(doc, "noequals"), ConfigError);
  EXPECT_THROW(apply_override(doc, "optimizer.lr.deeper=1"), ConfigError);
}

TEST(Overrides, FileThenOverride) {
  const auto path = std::filesystem::temp_directory_path() / "telu_lab_config_test.json";
  std::ofstream(path) << R"({"optimizer": {"kind": "momentum", "lr": 0.01}, "epochs": 5})";
  const RunConfig rc = load_run_config(path, {"optimizer.lr=0.02", "epochs=7"});
  EXPECT_EQ(rc.train.optimizer.kind, OptimizerKind::Momentum);
  EXPECT_EQ(rc.train.optimizer.lr, 0.02);
  EXPECT_EQ(rc.train.epochs, 7u);
  EXPECT_EQ(rc.train.schedule.milestones, scale_milestones({60, 120, 160}, 200, 7));
  EXPECT_THROW(load_run_config(path, {"optimizer.momentun=0.5"}), ConfigError);
  std::ofstream(path) << "{not json";
  EXPECT_THROW(load_run_config(path), ConfigError);
  std::filesystem::remove(path);
}

TEST(Config, CifarDefaultsUseConvNet) {
  const RunConfig rc = parse_run_config(json{{"dataset", {{"name", "cifar10"}, {"path", "/nowhere"}}}});
  EXPECT_EQ(rc.train.layers.front().type, LayerSpec::Type::Conv2d);
  EXPECT_NO_THROW(Model({3, 32, 32}, rc.train.layers));
  EXPECT_EQ(Model({3, 32, 32}, rc.train.layers).num_classes(), 10u);
}

TEST(Overrides, LayerIndexIntoDefaults) {
  const RunConfig rc = load_run_config(std::nullopt, {"model.layers.0.out=64", "model.layers.2.in=64"});
  ASSERT_EQ(rc.train.layers.size(), 3u);
  EXPECT_EQ(rc.train.layers[0].out, 64u);
  EXPECT_EQ(rc.train.layers[2].in, 64u);
  EXPECT_EQ(rc.train.layers[2].out, 10u);
}

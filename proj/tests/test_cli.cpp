#include <cmath>
#include <cstdio>
#include <filesystem>
#include <regex>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "telu_lab/io.hpp"

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using telu_lab::io::Csv;
using telu_lab::io::read_text;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(TELU_LAB_BIN) + " " + args + " 2>&1";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path outdir(const std::string& name) {
  const auto p = fs::temp_directory_path() / "telu_lab_cli_test" / name;
  fs::remove_all(p);
  return p;
}

const std::string kQuick = "--set epochs=3 --set seeds=[0,1,2]";

const json& claim(const json& report, const std::string& id) {
  for (const auto& r : report)
    if (r["claim_id"] == id) return r;
  throw std::runtime_error("missing claim " + id);
}

}  // namespace

TEST(CliVerify, TeluReport) {
  const auto dir = outdir("verify_telu");
  const Outcome r = run("verify --activations telu -o " + dir.string());
  EXPECT_EQ(r.code, 1) << r.out;  // the literal everywhere-nonzero derivative claim fails
  EXPECT_NE(r.out.find("thm1_nonvanishing_everywhere"), std::string::npos);
  const json report = json::parse(read_text(dir / "report.json"));
  EXPECT_EQ(claim(report, "telu.thm4_bounded_output")["verdict"], "holds");
  const auto& lip = claim(report, "telu.thm6_lipschitz");
  EXPECT_EQ(lip["verdict"], "holds_with_caveat");
  EXPECT_NEAR(lip["measured"].get<double>(), 1.06, 0.005);
  const auto& root = claim(report, "telu.thm1_nonvanishing_everywhere");
  EXPECT_EQ(root["verdict"], "fails");
  EXPECT_NEAR(root["witness"].get<double>(), -1.07886, 1e-5);
  const json meta = json::parse(read_text(dir / "metadata.json"));
  EXPECT_TRUE(meta.contains("sensitivity_ranking"));
  EXPECT_EQ(meta["rng"], "splitmix64-ctr/v1");
}

TEST(CliVerify, ReluAndUnknown) {
  const auto dir = outdir("verify_relu");
  const Outcome r = run("verify --activations relu -o " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  const json report = json::parse(read_text(dir / "report.json"));
  EXPECT_EQ(claim(report, "relu.relu_interval_mean")["verdict"], "holds");
  EXPECT_EQ(run("verify --activations nosuch -o " + outdir("nosuch").string()).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST(CliKernels, SmallTable) {
  const auto dir = outdir("kernels_small");
  ASSERT_EQ(run("kernels --activations telu --lo -3 --hi 3 --step 0.5 -o " + dir.string()).code, 0);
  const Csv csv = Csv::parse(read_text(dir / "kernels.csv"));
  EXPECT_EQ(csv.header, (std::vector<std::string>{"activation", "x", "f", "df", "d2f"}));
  ASSERT_EQ(csv.rows.size(), 13u);
  EXPECT_EQ(csv.rows[6][1], "0");
  EXPECT_EQ(csv.rows[6][2], "0");
}

TEST(CliKernels, FourKindsAndDerivativeCrossCheck) {
  const auto dir = outdir("kernels_four");
  ASSERT_EQ(run("kernels --activations telu relu gelu mish --lo -4 --hi 4 --step 0.01 -o " + dir.string()).code, 0);
  const Csv csv = Csv::parse(read_text(dir / "kernels.csv"));
  ASSERT_EQ(csv.rows.size(), 4u * 801u);
  std::vector<double> xs, fs_, dfs;
  for (const auto& row : csv.rows) {
    const double x = telu_lab::io::parse_num(row[1]);
    const double f = telu_lab::io::parse_num(row[2]);
    if (row[0] == "relu") {
      EXPECT_EQ(f, std::max(0.0, x));
    }
    if (row[0] == "telu") {
      xs.push_back(x);
      fs_.push_back(f);
      dfs.push_back(telu_lab::io::parse_num(row[3]));
    }
  }
  ASSERT_EQ(xs.size(), 801u);
  for (std::size_t i = 1; i + 1 < xs.size(); ++i)
    EXPECT_NEAR((fs_[i + 1] - fs_[i - 1]) / (xs[i + 1] - xs[i - 1]), dfs[i], 1e-4);
  EXPECT_EQ(run("kernels --step 0 -o " + outdir("k0").string()).code, 2);
}

TEST(CliRun, ReplicatePrintsCell) {
  const auto dir = outdir("replicate");
  const Outcome r = run("replicate " + kQuick + " -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(std::regex_search(r.out, std::regex(R"(telu sgd: \d+\.\d\d±\d+\.\d\d)"))) << r.out;
  const Csv csv = Csv::parse(read_text(dir / "trials.csv"));
  EXPECT_EQ(csv.rows.size(), 3u);
  for (const char* f : {"timings.csv", "summary.json", "metadata.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const json meta = json::parse(read_text(dir / "metadata.json"));
  EXPECT_TRUE(meta["definitions"].contains("conc"));
  EXPECT_EQ(meta["config"]["epochs"], 3);
  // no temp files left behind
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(CliRun, GridCardinality) {
  const auto dir = outdir("grid");
  const Outcome r = run("grid --set epochs=2 --set seeds=[0,1] --set grid.lr=[0.05,0.1] --set grid.weight_decay=[0,0.003] "
                    "--set grid.gamma=[0.2,1] -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("= 8 configs"), std::string::npos) << r.out;
  EXPECT_EQ(Csv::parse(read_text(dir / "trials.csv")).rows.size(), 16u);
  EXPECT_EQ(json::parse(read_text(dir / "grid.json"))["configs"].size(), 8u);
}

TEST(CliRun, LandscapeGrid41) {
  const auto dir = outdir("landscape");
  const Outcome r = run("landscape --grid 41 --radius 1.0 --set epochs=2 --set landscape.samples=100 -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const Csv csv = Csv::parse(read_text(dir / "landscape.csv"));
  ASSERT_EQ(csv.rows.size(), 41u);
  ASSERT_EQ(csv.header.size(), 42u);
  const json meta = json::parse(read_text(dir / "metadata.json"));
  EXPECT_EQ(telu_lab::io::parse_num(csv.rows[20][21]), meta["center_loss"].get<double>());
}

TEST(CliRun, FisherAndTrain) {
  const auto fdir = outdir("fisher");
  ASSERT_EQ(run("fisher --set fisher.samples=20 --set fisher.train=false -o " + fdir.string()).code, 0);
  const Csv csv = Csv::parse(read_text(fdir / "fisher.csv"));
  EXPECT_EQ(csv.rows.size(), 32u * 32 + 32 + 32 * 10 + 10);
  for (const auto& row : csv.rows) EXPECT_GE(telu_lab::io::parse_num(row[2]), 0.0);

  const auto tdir = outdir("train");
  const Outcome t = run("train --set epochs=2 -o " + tdir.string());
  EXPECT_EQ(t.code, 0) << t.out;
  EXPECT_TRUE(fs::exists(tdir / "trial.json"));
}

TEST(CliRun, DivergenceIsData) {
  const auto dir = outdir("diverge");
  const Outcome r = run("train --set optimizer.lr=1e10 --set optimizer.weight_decay=0.003 --set epochs=3 -o " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("diverged"), std::string::npos);
  const Csv csv = Csv::parse(read_text(dir / "trials.csv"));
  EXPECT_EQ(csv.rows[0][csv.column("diverged")], "1");
}

TEST(CliRun, ConfigErrorsExit2WithPath) {
  const Outcome a = run("train --set optimizer.lrr=0.1 -o " + outdir("bad1").string());
  EXPECT_EQ(a.code, 2);
  EXPECT_NE(a.out.find("optimizer.lrr"), std::string::npos);
  const Outcome b = run("train --set epochs=0 -o " + outdir("bad2").string());
  EXPECT_EQ(b.code, 2);
  EXPECT_NE(b.out.find("epochs"), std::string::npos);
  EXPECT_EQ(run("train --config /nonexistent.json").code, 2);
}

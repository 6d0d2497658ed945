#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Output {
  int status;
  std::string out;
};

Output run(const std::string& args) {
  const std::string cmd = std::string(SPARSE_EVO_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, p)) out += buf;
  const int raw = pclose(p);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  static fs::path dir;
  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / "sparse_evo_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    ASSERT_EQ(run("gen-data --samples 400 --seed 5 --out " + (dir / "small.csv").string()).status, 0);
    std::ofstream(dir / "tiny.json") << R"({"data": ")" << (dir / "small.csv").string()
                                     << R"(", "hidden_dims": [24, 24], "epsilon": 4, "epochs": 6,)"
                                     << R"( "batch_size": 20, "eta": 0.05, "checkpoints": [1, 2, 4, 6],)"
                                     << R"( "policy": "CoDASET", "seed": 3})";
  }
  static std::string tiny(const std::string& out, const std::string& extra = "") {
    return "train --quiet --config " + (dir / "tiny.json").string() + " --out " + (dir / out).string() + " " + extra;
  }
};
fs::path Cli::dir;

}  // namespace

TEST_F(Cli, GenDataShapeAndMetadata) {
  const auto a = dir / "full_a.csv", b = dir / "full_b.csv";
  ASSERT_EQ(run("gen-data --preset madelon-like --samples 2600 --seed 1 --out " + a.string()).status, 0);
  ASSERT_EQ(run("gen-data --preset madelon-like --samples 2600 --seed 1 --out " + b.string()).status, 0);
  const auto rows = lines(a);
  EXPECT_EQ(rows.size(), 2601u);
  EXPECT_EQ(fields(rows[0]).size(), 501u);
  EXPECT_EQ(fields(rows[1]).size(), 501u);
  EXPECT_EQ(slurp(a), slurp(b));
  const auto meta = nlohmann::json::parse(slurp(dir / "full_a.meta.json"));
  EXPECT_EQ(meta.at("roles").size(), 500u);
  EXPECT_NE(run("gen-data --preset other --out " + (dir / "x.csv").string()).status, 0);
  EXPECT_NE(run("gen-data --out /proc/forbidden/x.csv").status, 0);
}

TEST_F(Cli, TrainWritesRunDirectory) {
  ASSERT_EQ(run(tiny("run_a")).status, 0);
  const auto run_dir = dir / "run_a";
  for (const char* f : {"run_config.json", "metrics.csv", "rewire.csv", "timing.csv", "model.json", "test.csv",
                        "model_epoch1.json", "model_epoch2.json", "model_epoch4.json", "model_epoch6.json"})
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  const auto rows = lines(run_dir / "metrics.csv");
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "epoch,train_loss,train_accuracy,test_accuracy,edges_total,rewired");
  const std::string edges = fields(rows[1])[4];
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(fields(rows[i])[0], std::to_string(i));
    EXPECT_EQ(fields(rows[i])[4], edges);
  }
}

TEST_F(Cli, SameSeedGivesIdenticalMetrics) {
  ASSERT_EQ(run(tiny("det_a")).status, 0);
  ASSERT_EQ(run(tiny("det_b")).status, 0);
  EXPECT_EQ(slurp(dir / "det_a" / "metrics.csv"), slurp(dir / "det_b" / "metrics.csv"));
  ASSERT_EQ(run(tiny("det_c", "--seed 4")).status, 0);
  EXPECT_NE(slurp(dir / "det_a" / "metrics.csv"), slurp(dir / "det_c" / "metrics.csv"));
}

TEST_F(Cli, FlagsOverrideFileOverridePreset) {
  ASSERT_EQ(run(tiny("prec", "--eta 0.02 --epochs 1")).status, 0);
  const auto cfg = nlohmann::json::parse(slurp(dir / "prec" / "run_config.json"));
  EXPECT_EQ(cfg.at("eta").get<double>(), 0.02);                      // flag
  EXPECT_EQ(cfg.at("epochs").get<int>(), 1);                         // flag
  EXPECT_EQ(cfg.at("policy").get<std::string>(), "CoDASET");         // file
  EXPECT_EQ(cfg.at("hidden_dims").size(), 2u);                       // file
  EXPECT_EQ(cfg.at("zeta").get<double>(), 0.3);                      // preset
  EXPECT_EQ(cfg.at("dropout_rate").get<double>(), 0.3);              // preset
}

TEST_F(Cli, EvaluateReproducesFinalTestAccuracy) {
  ASSERT_EQ(run(tiny("eval")).status, 0);
  const auto rows = lines(dir / "eval" / "metrics.csv");
  const double logged = std::stod(fields(rows.back())[3]);
  const auto r = run("evaluate --model " + (dir / "eval" / "model.json").string() + " --data " +
                     (dir / "eval" / "test.csv").string());
  ASSERT_EQ(r.status, 0) << r.out;
  char want[32];
  std::snprintf(want, sizeof want, "%.4f\n", logged);
  EXPECT_EQ(r.out, want);
  std::ofstream(dir / "narrow.csv") << "a,b,label\n1,2,0\n3,4,1\n";
  EXPECT_NE(run("evaluate --model " + (dir / "eval" / "model.json").string() + " --data " +
                (dir / "narrow.csv").string()).status,
            0);
}

TEST_F(Cli, UntrainedModelIsNearChance) {
  const auto data = dir / "chance.csv";
  ASSERT_EQ(run("gen-data --samples 2600 --seed 8 --out " + data.string()).status, 0);
  ASSERT_EQ(run("train --quiet --epochs 0 --hidden 50,50 --data " + data.string() + " --out " +
                (dir / "untrained").string()).status,
            0);
  const auto r = run("evaluate --model " + (dir / "untrained" / "model.json").string() + " --data " +
                     (dir / "untrained" / "test.csv").string());
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(lines(dir / "untrained" / "test.csv").size(), 601u);
  const double acc = std::stod(r.out);
  EXPECT_GE(acc, 0.4);
  EXPECT_LE(acc, 0.6);
}

TEST_F(Cli, AnalyzeModes) {
  ASSERT_EQ(run(tiny("an")).status, 0);
  const auto run_dir = dir / "an";
  const auto model = (run_dir / "model.json").string(), data = (run_dir / "test.csv").string();
  ASSERT_EQ(run("analyze --mode degrees --model " + model + " --data " + data + " --out " +
                (run_dir / "deg").string()).status,
            0);
  const auto deg = lines(run_dir / "deg" / "degrees.csv");
  EXPECT_EQ(deg.size(), 501u);
  EXPECT_EQ(deg[0], "neuron,degree,role");
  EXPECT_TRUE(fs::exists(run_dir / "deg" / "histogram.csv"));

  ASSERT_EQ(run("analyze --mode ablation --model " + model + " --data " + data + " --out " +
                (run_dir / "abl").string()).status,
            0);
  const auto asc = lines(run_dir / "abl" / "ablation_ascending.csv");
  ASSERT_GE(asc.size(), 2u);
  const auto baseline = run("evaluate --model " + model + " --data " + data).out;
  EXPECT_EQ(fields(asc[1])[0], "0");
  EXPECT_NEAR(std::stod(fields(asc[1])[1]), std::stod(baseline), 5e-5);
  EXPECT_TRUE(fs::exists(run_dir / "abl" / "ablation_descending.csv"));

  ASSERT_EQ(run("analyze --mode snapshots --model '" + (run_dir / "model_epoch*.json").string() + "' --data " +
                data + " --out " + (run_dir / "snap").string()).status,
            0);
  std::size_t curves = 0;
  for (const auto& e : fs::directory_iterator(run_dir / "snap")) curves += e.path().extension() == ".csv";
  EXPECT_EQ(curves, 4u);
  EXPECT_NE(run("analyze --mode bogus --model " + model + " --out " + (run_dir / "x").string()).status, 0);
}

TEST_F(Cli, ErrorsGiveNonzeroExit) {
  EXPECT_EQ(run(tiny("bad", "--policy NOPE")).status, 2);
  EXPECT_EQ(run(tiny("bad", "--zeta 1.5")).status, 2);
  EXPECT_NE(run("train --config /nonexistent.json").status, 0);
  const auto r = run(tiny("diverge", "--eta 1e200 --dropout 0"));
  EXPECT_EQ(r.status, 3) << r.out;
  EXPECT_NE(r.out.find("diverged at epoch 1"), std::string::npos) << r.out;
}

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace {

struct CliResult {
  int code;
  std::string out;
};

CliResult run(const std::string& args) {
  const std::string cmd = std::string(NCAMUL_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count(const std::string& hay, const std::string& needle) {
  int c = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++c;
  return c;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("ncamul_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::filesystem::path dir_;
};

}  // namespace

TEST_F(Cli, TraceSymbolicFiveBySeven) {
  const CliResult r = run("trace --symbolic --a 5 --b 7");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(count(r.out, "t="), 7);
  EXPECT_NE(r.out.find("t=6\n"), std::string::npos);
  EXPECT_NE(r.out.find("product: 35  steps: 6"), std::string::npos);
}

TEST_F(Cli, TraceSymbolicZero) {
  const CliResult r = run("trace --symbolic --a 0 --b 0");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("product: 0  steps: 1"), std::string::npos);
}

TEST_F(Cli, TraceJsonFrames) {
  const CliResult r = run("trace --symbolic --a 3 --b 3 --format json --out " + path("t.json"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("product: 9  steps: 4"), std::string::npos);
  const auto frames = nlohmann::json::parse(slurp(path("t.json")));
  ASSERT_EQ(frames.size(), 5u);
  EXPECT_EQ(frames[0].at("rows"), 4);
  EXPECT_EQ(frames[0].at("cols"), 2);
  EXPECT_EQ(frames[3].at("cells"), nlohmann::json::parse("[[1,0],[0,0],[0,0],[1,0]]"));
  EXPECT_EQ(frames[3], frames[4]);
}

TEST_F(Cli, TraceRejectsBadInput) {
  EXPECT_EQ(run("trace --symbolic --a 9 --b 1 --n 2").code, 2);
  EXPECT_EQ(run("trace --a 1 --b 1").code, 2);
  EXPECT_EQ(run("trace --symbolic --format xml").code, 2);
  EXPECT_EQ(run("trace --symbolic --a 5 --b 7 --max-steps 3").code, 1);
}

TEST_F(Cli, TrainWritesCheckpointAndMetrics) {
  const CliResult r = run("train --steps 100 --eval-every 50 --quiet --out " + path("nca.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("params: 321"), std::string::npos);
  const auto ckpt = nlohmann::json::parse(slurp(path("nca.json")));
  EXPECT_EQ(ckpt.at("params"), 321);
  EXPECT_EQ(ckpt.at("kind"), "nca");
  EXPECT_EQ(ckpt.at("train_config").at("total_steps"), 100);
  const std::string metrics = slurp(path("nca.metrics.csv"));
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "step,lr,loss,single_step_acc");
  EXPECT_EQ(count(metrics, "\n"), 3);

  const CliResult small = run("train --hidden 4 --steps 20 --quiet --out " + path("h4.json"));
  ASSERT_EQ(small.code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("h4.json"))).at("params"), 81);
  const CliResult mlp = run("train --kind mlp --hidden 32 --steps 20 --quiet --out " + path("mlp.json"));
  ASSERT_EQ(mlp.code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("mlp.json"))).at("params"), 129);
}

TEST_F(Cli, TrainIsDeterministicAcrossThreads) {
  ASSERT_EQ(run("train --steps 60 --batch 64 --eval-every 30 --seed 4 --threads 1 --quiet --out " + path("a.json")).code, 0);
  ASSERT_EQ(run("train --steps 60 --batch 64 --eval-every 30 --seed 4 --threads 4 --quiet --out " + path("b.json")).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a.metrics.csv")), slurp(path("b.metrics.csv")));
}

TEST_F(Cli, EvalSymbolicExhaustive) {
  const CliResult r = run("eval --symbolic --bits 8 --exhaustive --out " + path("ex.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto rep = nlohmann::json::parse(slurp(path("ex.json")));
  EXPECT_EQ(rep.at("records")[0].at("samples"), 65536);
  EXPECT_EQ(rep.at("records")[0].at("exact"), 65536);
  EXPECT_TRUE(std::filesystem::exists(path("ex.csv")));
}

TEST_F(Cli, EvalUntrainedFailsButWritesReport) {
  ASSERT_EQ(run("train --steps 1 --quiet --out " + path("u.json")).code, 0);
  const CliResult r = run("eval --model " + path("u.json") + " --bits 8,16 --samples 5 --out " + path("u_rep.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(std::filesystem::exists(path("u_rep.json")));
  EXPECT_TRUE(std::filesystem::exists(path("u_rep.csv")));
  EXPECT_EQ(run("eval --model " + path("u.json") + " --bits 8 --samples 5 --threshold 0 --out " + path("u2.json")).code, 0);
}

TEST_F(Cli, EvalErrors) {
  EXPECT_EQ(run("eval --model " + path("missing.json") + " --out " + path("r.json")).code, 3);
  std::ofstream(path("bad.json")) << "{\"format_version\": 1";
  EXPECT_EQ(run("eval --model " + path("bad.json") + " --out " + path("r.json")).code, 3);
  EXPECT_EQ(run("eval --bits 8").code, 2);
  EXPECT_EQ(run("eval --symbolic --bits 8 --samples 2 --out /nonexistent_dir/r.json").code, 3);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, TraceWithModel) {
  ASSERT_EQ(run("train --steps 1500 --seed 2 --stop-at-exact --quiet --out " + path("m.json")).code, 0);
  const CliResult sym = run("trace --symbolic --a 3 --b 3");
  const CliResult net = run("trace --model " + path("m.json") + " --a 3 --b 3");
  EXPECT_EQ(net.code, 0) << net.out;
  EXPECT_EQ(net.out, sym.out);
}

TEST_F(Cli, SweepSmoke) {
  const CliResult r = run("sweep --hidden 16 --seeds 1 --steps 40 --batch 32 --eval-every 20 --out " + path("s.csv"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Hidden  Params"), std::string::npos);
  const std::string csv = slurp(path("s.csv"));
  EXPECT_EQ(count(csv, "\n"), 2);
  EXPECT_NE(csv.find("16,321,0,"), std::string::npos);
}

TEST_F(Cli, HelpDocumentsDefaults) {
  const CliResult train = run("train --help");
  EXPECT_EQ(train.code, 0);
  for (const char* s : {"--hidden", "16", "--steps", "30000", "--batch", "256", "--lr", "0.001", "--seed", "--threads", "--out", "--n-range"})
    EXPECT_NE(train.out.find(s), std::string::npos) << s;
  for (const char* sub : {"eval", "trace", "sweep"}) {
    const CliResult h = run(std::string(sub) + " --help");
    EXPECT_EQ(h.code, 0);
    EXPECT_NE(h.out.find("--seed"), std::string::npos);
    EXPECT_NE(h.out.find("--threads"), std::string::npos);
    EXPECT_NE(h.out.find("--out"), std::string::npos);
  }
}

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("whittaker_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  Invocation run(const std::string& args, const std::string& env = "") const {
    const std::string err = path("stderr.txt");
    const std::string cmd = "cd " + dir_.string() + " && " + env + " " + WHITTAKER_CLI + " " + args + " 2>" + err;
    Invocation r;
    FILE* p = ::popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Rows that are not comments.
std::vector<std::string> data_rows(const std::string& text) {
  std::vector<std::string> out;
  for (auto& l : lines(text))
    if (!l.empty() && l[0] != '#') out.push_back(l);
  return out;
}

std::string config_json(const std::string& text) {
  for (auto& l : lines(text))
    if (l.rfind("# config=", 0) == 0) return l.substr(9);
  return {};
}

}  // namespace

TEST_F(Cli, Version) {
  const auto r = run("--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("whittaker 0.1.0", 0), 0u) << r.out;
}

TEST_F(Cli, SimulateHeaderAndFooter) {
  const auto r = run("simulate --n 2 --gamma 8 --seed 1 --out run.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(slurp(path("run.csv")));
  ASSERT_GE(l.size(), 5u);
  ASSERT_EQ(l[0].rfind("# config=", 0), 0u);
  const auto cfg = nlohmann::json::parse(l[0].substr(9));
  EXPECT_EQ(cfg["n"], 2);
  EXPECT_EQ(cfg["gamma"], 8.0);
  EXPECT_EQ(cfg["seed"], 1);
  EXPECT_EQ(l[1], "# seed=1 replicate=0");
  EXPECT_EQ(l[2], "t,T_1_1,T_2_1,T_2_2");
  EXPECT_EQ(l[3], "0,0,0,0");
  EXPECT_EQ(l.size(), 3u + 1001u + 1u);
  EXPECT_EQ(l.back().rfind("# clamps=", 0), 0u);
  EXPECT_NO_THROW((void)std::stoi(l.back().substr(9)));
}

TEST_F(Cli, HeaderConfigReproducesOutput) {
  ASSERT_EQ(run("simulate --n 3 --gamma 16 --seed 42 --replicate 7 --dt 0.01 --out a.csv").code, 0);
  auto cfg = nlohmann::json::parse(config_json(slurp(path("a.csv"))));
  cfg["out"] = "b.csv";
  write("cfg.json", cfg.dump());
  ASSERT_EQ(run("simulate --config cfg.json").code, 0);
  EXPECT_EQ(data_rows(slurp(path("a.csv"))), data_rows(slurp(path("b.csv"))));
  EXPECT_NE(data_rows(slurp(path("a.csv"))),
            data_rows(run("simulate --n 3 --gamma 16 --seed 42 --replicate 8 --dt 0.01").out));
}

TEST_F(Cli, FlagsOverrideConfig) {
  write("cfg.json", R"({"gamma": 8, "n": 2, "seed": 5, "dt": 0.01})");
  const auto r = run("simulate --config cfg.json --gamma 4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = nlohmann::json::parse(config_json(r.out));
  EXPECT_EQ(cfg["gamma"], 4.0);
  EXPECT_EQ(cfg["n"], 2);
  EXPECT_EQ(cfg["seed"], 5);
}

TEST_F(Cli, MalformedJsonReportsLineAndColumn) {
  write("bad.json", "{\n  \"gamma\": 8,\n  \"n\": 2,\n}\n");
  const auto r = run("simulate --config bad.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.json:4:1"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownConfigKeyRejected) {
  write("cfg.json", R"({"gama": 8})");
  const auto r = run("simulate --config cfg.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("gama"), std::string::npos);
  EXPECT_NE(r.err.find("config keys for 'simulate'"), std::string::npos);
}

TEST_F(Cli, WrongTypeRejected) {
  write("cfg.json", R"({"gamma": "eight"})");
  EXPECT_EQ(run("simulate --config cfg.json").code, 1);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("bogus").code, 1);
  EXPECT_EQ(run("simulate --no-such-flag 1").code, 1);
  EXPECT_EQ(run("simulate --gamma abc").code, 1);
  EXPECT_EQ(run("simulate --gamma -1").code, 1);
  EXPECT_EQ(run("rate").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, RuntimeErrorExitsTwo) {
  EXPECT_EQ(run("simulate --out " + path("missing/dir/x.csv")).code, 2);
}

TEST_F(Cli, RateBreakdown) {
  write("line.csv", "t,T_1_1\n0,0\n0.5,0.25\n1,0.5\n");
  const auto r = run("rate --bundle line.csv --out breakdown.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "total=0.125 reason=none\n");
  const auto rows = data_rows(slurp(path("breakdown.csv")));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].rfind("T_1_1,0.125,", 0), 0u) << rows[1];
}

TEST_F(Cli, RateCrossing) {
  write("b.csv", "t,T_1_1,T_2_1,T_2_2\n0,0,0,0\n1,1,-1,0\n");
  const auto r = run("rate --bundle b.csv --eps 1e-9");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total=inf reason=crossing"), std::string::npos) << r.out;
}

TEST_F(Cli, Reflect) {
  write("d.csv", "t,T_1_1\n0,0\n0.5,-1\n1,0\n");
  write("b.csv", "t,T_1_1\n0,-0.5\n0.5,-0.5\n1,-0.5\n");
  const auto r = run("reflect --driver d.csv --barrier b.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data_rows(r.out), (std::vector<std::string>{"t,path,push", "0,0,0", "0.5,-0.5,0.5", "1,0.5,0.5"}));
}

TEST_F(Cli, SlopeSummary) {
  std::string phi = "t,T_1_1\n";
  for (int i = 0; i <= 100; ++i) phi += std::to_string(i / 100.0) + "," + std::to_string(0.5 * i / 100.0) + "\n";
  write("phi.csv", phi);
  const auto r = run("slope --phi phi.csv --samples 500 --gammas 4,8 --seed 9 --threads 1");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(r.out);
  EXPECT_EQ(l[1], "# seed=9 replicate=0");
  EXPECT_EQ(l.back().rfind("# slope=", 0), 0u);
  EXPECT_NE(l.back().find(" predicted=0.12"), std::string::npos) << l.back();
  EXPECT_EQ(data_rows(r.out).size(), 3u);
}

TEST_F(Cli, ThreadCountDoesNotChangeResults) {
  const std::string args = "interlace --n 2 --samples 60 --gammas 8,16 --dt 0.01 --margin_scale 0.3 --seed 3";
  const auto one = run(args + " --threads 1");
  const auto env = run(args, "WHITTAKER_THREADS=3");
  ASSERT_EQ(one.code, 0) << one.err;
  ASSERT_EQ(env.code, 0) << env.err;
  EXPECT_EQ(data_rows(one.out), data_rows(env.out));
  EXPECT_EQ(nlohmann::json::parse(config_json(one.out))["threads"], 1);
  EXPECT_EQ(lines(one.out).back().rfind("# slope=", 0), 0u);
}

TEST_F(Cli, Equivalence) {
  const auto r = run("equivalence --samples 20 --dt 0.001 --seed 4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = data_rows(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].rfind("20,", 0), 0u);
  EXPECT_NE(lines(r.out).back().find("predicted=0.25"), std::string::npos);
}

TEST_F(Cli, OptimizeStraightLine) {
  write("i.csv", "T_1_1\n0\n");
  write("t.csv", "T_1_1\n0.8\n");
  const auto r = run("optimize --init i.csv --terminal t.csv --steps 16 --out opt.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("rate=0.32", 0), 0u) << r.out;
  const auto rows = data_rows(slurp(path("opt.csv")));
  EXPECT_EQ(rows.front(), "t,T_1_1");
  EXPECT_EQ(rows.size(), 18u);
}

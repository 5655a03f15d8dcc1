#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

// Exercises the built binary end to end: exit codes, output files, headers.
namespace {

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CELLDRAIN_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf;
  std::string output;
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) output += buf.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small configuration that runs in well under a second: CC-CV only with a
// short timeout (the CLI contract, not the physics, is under test here).
std::string write_quick_config(const std::string& dir) {
  const std::string path = dir + "/quick.cfg";
  std::ofstream os(path);
  os << R"([simulation]
t_max_sim_s = 300.0
noise_seed = 5
controller = cc_cv
controllers = cc_cv

[cc_cv]
cc_current_a = 40.0
v_cutoff_v = 3.45
kp = 50.0
ki = 10.0
)";
  return path;
}

}  // namespace

TEST(Cli, MissingConfigExitsTwoAndNamesPath) {
  const RunResult r = run_cli("simulate --config /no/such/file.cfg");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("/no/such/file.cfg"), std::string::npos);
}

TEST(Cli, BadConfigKeyExitsTwoWithLineNumber) {
  const std::string dir = testing::TempDir() + "celldrain_cli_badkey";
  std::filesystem::create_directories(dir);
  const std::string cfg = dir + "/bad.cfg";
  std::ofstream(cfg) << "[battery]\nbogus_key = 1\n";
  const RunResult r = run_cli("simulate --config " + cfg);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find(":2:"), std::string::npos);
}

TEST(Cli, SimulateWritesTraceWithMonotoneTime) {
  const std::string dir = testing::TempDir() + "celldrain_cli_sim";
  std::filesystem::create_directories(dir);
  const std::string cfg = write_quick_config(dir);
  const RunResult r = run_cli("simulate --config " + cfg + " --out " + dir);
  EXPECT_EQ(r.exit_code, 0) << r.output;

  const std::string trace = read_file(dir + "/trace_cc_cv.csv");
  ASSERT_FALSE(trace.empty());
  EXPECT_NE(trace.find("# config_hash="), std::string::npos);
  EXPECT_NE(trace.find("t,i_applied,v_terminal"), std::string::npos);

  std::istringstream lines(trace);
  std::string line;
  double prev_t = -1.0;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    const double t = std::stod(line.substr(0, line.find(',')));
    EXPECT_GT(t, prev_t);
    prev_t = t;
    ++rows;
  }
  EXPECT_GT(rows, 0);
}

TEST(Cli, SeedOverrideChangesNoiseButNotRecordedHash) {
  const std::string dir = testing::TempDir() + "celldrain_cli_seed";
  std::filesystem::create_directories(dir);
  const std::string cfg = write_quick_config(dir);
  const std::string dir_a = dir + "/a", dir_b = dir + "/b";
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --out " + dir_a).exit_code, 0);
  ASSERT_EQ(run_cli("simulate --config " + cfg + " --out " + dir_b + " --seed 99")
                .exit_code,
            0);
  const std::string a = read_file(dir_a + "/trace_cc_cv.csv");
  const std::string b = read_file(dir_b + "/trace_cc_cv.csv");
  EXPECT_NE(a, b);

  auto hash_of = [](const std::string& text) {
    const auto pos = text.find("# config_hash=");
    return text.substr(pos, text.find('\n', pos) - pos);
  };
  EXPECT_EQ(hash_of(a), hash_of(b));
  EXPECT_NE(a.find("# seed=5"), std::string::npos);
  EXPECT_NE(b.find("# seed=99"), std::string::npos);
}

TEST(Cli, BenchmarkEmptyControllerListExitsTwo) {
  const std::string dir = testing::TempDir() + "celldrain_cli_empty";
  std::filesystem::create_directories(dir);
  const std::string cfg = dir + "/empty.cfg";
  std::ofstream(cfg) << "[simulation]\ncontrollers = \n\n[cc_cv]\nkp = 50.0\n";
  const RunResult r = run_cli("benchmark --config " + cfg + " --out " + dir);
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, BenchmarkQuickConfigEmitsTableAndCsv) {
  const std::string dir = testing::TempDir() + "celldrain_cli_bench";
  std::filesystem::create_directories(dir);
  const std::string cfg = write_quick_config(dir);
  const RunResult r = run_cli("benchmark --config " + cfg + " --out " + dir);
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("Cons. satis."), std::string::npos);
  EXPECT_NE(read_file(dir + "/benchmark.csv").find("method,discharge_time_s"),
            std::string::npos);
  EXPECT_FALSE(read_file(dir + "/panel_soe.csv").empty());
  EXPECT_FALSE(read_file(dir + "/panel_core_temp.csv").empty());
}

TEST(Cli, BenchmarkRerunIsByteIdentical) {
  const std::string dir = testing::TempDir() + "celldrain_cli_det";
  std::filesystem::create_directories(dir);
  const std::string cfg = write_quick_config(dir);
  const std::string dir_a = dir + "/a", dir_b = dir + "/b";
  ASSERT_EQ(run_cli("benchmark --config " + cfg + " --out " + dir_a + " --quiet")
                .exit_code,
            0);
  ASSERT_EQ(run_cli("benchmark --config " + cfg + " --out " + dir_b + " --quiet")
                .exit_code,
            0);
  EXPECT_EQ(read_file(dir_a + "/benchmark.csv"), read_file(dir_b + "/benchmark.csv"));
  EXPECT_EQ(read_file(dir_a + "/trace_cc_cv.csv"), read_file(dir_b + "/trace_cc_cv.csv"));
}

TEST(Cli, SynthesizeReportsGainAndMargins) {
  const std::string dir = testing::TempDir() + "celldrain_cli_syn";
  std::filesystem::create_directories(dir);
  // Default config, which has an [mpc] section; synthesis alone is fast.
  const RunResult r = run_cli(std::string("synthesize --config ") +
                              CELLDRAIN_CONFIG_PATH + " --out " + dir);
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("feedback gain K"), std::string::npos);
  EXPECT_NE(r.output.find("tightening:"), std::string::npos);
  EXPECT_FALSE(read_file(dir + "/poly_rpi.csv").empty());
  EXPECT_FALSE(read_file(dir + "/poly_tightened.csv").empty());
}

TEST(Cli, SynthesizeEpsilonHalvedDoesNotReduceTruncationIndex) {
  const std::string dir = testing::TempDir() + "celldrain_cli_eps";
  std::filesystem::create_directories(dir);
  auto s_of = [&](const std::string& extra) {
    const RunResult r = run_cli(std::string("synthesize --config ") +
                                CELLDRAIN_CONFIG_PATH + " --out " + dir + extra);
    EXPECT_EQ(r.exit_code, 0) << r.output;
    const auto pos = r.output.find("rpi: s=");
    EXPECT_NE(pos, std::string::npos);
    return std::stoi(r.output.substr(pos + 7));
  };
  const int s_default = s_of(" --epsilon 1e-3");
  const int s_half = s_of(" --epsilon 5e-4");
  EXPECT_GE(s_half, s_default);
}

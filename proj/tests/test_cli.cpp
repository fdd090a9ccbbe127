#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::vector<std::string> v;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mmmc_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  Outcome cli(const std::string& args) {
    const std::string cmd = std::string("\"") + MMMC_CLI_PATH + "\" " + args + " > \"" + (dir_ / "stdout").string() +
                            "\" 2> \"" + (dir_ / "stderr").string() + "\"";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(dir_ / "stdout");
    o.err = slurp(dir_ / "stderr");
    return o;
  }

  std::string at(const std::string& sub) const { return "\"" + (dir_ / sub).string() + "\""; }

  fs::path dir_;
};

const char* uniform_config =
    "# uniform example\n"
    "mesh.cells = 10\n"
    "solver.epsilon = 0.5\n"
    "solver.modes = 4\n"
    "solver.samples = 10\n"
    "eta.kind = scalar_uniform\n"
    "f.kind = scalar_uniform\n";

const char* trig_config =
    "mesh.dim = 2\n"
    "mesh.x_hi = 2\n"
    "mesh.y_hi = 2\n"
    "mesh.cells = 6\n"
    "eta.kind = trig_series\n"
    "f.kind = trig_series\n"
    "solver.samples = 5\n"
    "compare.epsilons = 0\n"
    "compare.max_modes = 3\n"
    "compare.timing_modes = 2\n";

void expect_csv_shape(const fs::path& p, const std::string& header) {
  const auto l = lines_of(p);
  ASSERT_GE(l.size(), 2u) << p;
  EXPECT_EQ(l[0].rfind("# config_hash=", 0), 0u) << p;
  EXPECT_NE(l[0].find("version="), std::string::npos);
  EXPECT_EQ(l[1], header) << p;
}

}  // namespace

TEST_F(CliTest, RunWritesAllOutputs) {
  const auto cfg = write("a.cfg", uniform_config);
  const Outcome o = cli("--out " + at("o") + " run \"" + cfg.string() + "\"");
  ASSERT_EQ(o.code, 0) << o.err;
  expect_csv_shape(dir_ / "o/psi.csv", "node_id,x,psi");
  expect_csv_shape(dir_ / "o/modes.csv", "n,weighted_h1_norm");
  expect_csv_shape(dir_ / "o/counters.csv", "factorizations,solve_pairs,matvecs,assemblies");
  expect_csv_shape(dir_ / "o/timings.csv", "stage,seconds");
  EXPECT_EQ(lines_of(dir_ / "o/psi.csv").size(), 2u + 9u);
  EXPECT_EQ(lines_of(dir_ / "o/modes.csv").size(), 2u + 4u);
  EXPECT_EQ(lines_of(dir_ / "o/counters.csv")[2], "1,40,30,21");
  EXPECT_TRUE(o.err.empty()) << o.err;
}

TEST_F(CliTest, PsiIsByteIdenticalAcrossRuns) {
  const auto cfg = write("a.cfg", uniform_config);
  ASSERT_EQ(cli("--seed 3 --workers 2 --out " + at("r1") + " run \"" + cfg.string() + "\"").code, 0);
  ASSERT_EQ(cli("run \"" + cfg.string() + "\" --workers 2 --seed 3 --out " + at("r2")).code, 0);
  EXPECT_EQ(slurp(dir_ / "r1/psi.csv"), slurp(dir_ / "r2/psi.csv"));
  ASSERT_EQ(cli("--seed 4 --workers 2 --out " + at("r3") + " run \"" + cfg.string() + "\"").code, 0);
  EXPECT_NE(slurp(dir_ / "r1/psi.csv"), slurp(dir_ / "r3/psi.csv"));
}

TEST_F(CliTest, TwoDimensionalPsiListsInteriorNodes) {
  const auto cfg = write("t.cfg", trig_config);
  ASSERT_EQ(cli("--out " + at("o") + " run \"" + cfg.string() + "\"").code, 0);
  const auto l = lines_of(dir_ / "o/psi.csv");
  EXPECT_EQ(l[1], "node_id,x,y,psi");
  EXPECT_EQ(l.size(), 2u + 25u);
}

TEST_F(CliTest, LargeEpsilonWarns) {
  std::string text = uniform_config;
  text.replace(text.find("0.5"), 3, "1.5");
  const auto cfg = write("b.cfg", text);
  const Outcome o = cli("--out " + at("o") + " run \"" + cfg.string() + "\"");
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.err.find("epsilon outside proven regime"), std::string::npos) << o.err;
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
  const auto bad = write("bad.cfg", std::string(uniform_config) + "mesh.colour = red\n");
  Outcome o = cli("--out " + at("o") + " run \"" + bad.string() + "\"");
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("unknown key"), std::string::npos);
  EXPECT_EQ(cli("run \"" + (dir_ / "missing.cfg").string() + "\"").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("--workers 0 run x.cfg").code, 2);
  const auto range = write("r.cfg", "solver.modes = 0\n");
  EXPECT_EQ(cli("run \"" + range.string() + "\"").code, 2);
}

TEST_F(CliTest, SolverFailureExitsWithThreeNamingStageAndSample) {
  const auto cfg = write("c.cfg",
                         "mesh.cells = 10\nsolver.epsilon = 1.5\nsolver.samples = 50\nsolver.variant = bruteforce\n"
                         "eta.kind = scalar_uniform\neta.lo = -1\n");
  const Outcome o = cli("--out " + at("o") + " run \"" + cfg.string() + "\"");
  EXPECT_EQ(o.code, 3);
  EXPECT_NE(o.err.find("assembly"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("sample "), std::string::npos) << o.err;
}

TEST_F(CliTest, ConvergeSingleMeshHasNoOrders) {
  const Outcome o = cli("--out " + at("o") + " converge --h 0.1");
  ASSERT_EQ(o.code, 0) << o.err;
  const auto l = lines_of(dir_ / "o/converge.csv");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[1], "h,err_h1,order_h1,err_l2,order_l2");
  EXPECT_EQ(std::count(l[2].begin(), l[2].end(), ','), 4);
  EXPECT_EQ(l[2].back(), ',');
  EXPECT_NE(l[2].find(",,"), std::string::npos);
}

TEST_F(CliTest, ConvergeRejectsUnsupportedInput) {
  EXPECT_EQ(cli("converge --dim 2").code, 2);
  EXPECT_EQ(cli("converge --h 0.1,0.2").code, 2);
  EXPECT_EQ(cli("converge --h 0.3").code, 2);
  EXPECT_EQ(cli("converge --mode exact").code, 2);
}

TEST_F(CliTest, KlWritesSpectrumAndSummary) {
  const Outcome o = cli("--out " + at("o") + " kl --nodes 50 --terms 5");
  ASSERT_EQ(o.code, 0) << o.err;
  expect_csv_shape(dir_ / "o/kl.csv", "k,lambda_k");
  expect_csv_shape(dir_ / "o/kl_summary.csv", "quantity,value");
  EXPECT_EQ(lines_of(dir_ / "o/kl.csv").size(), 2u + 5u);
  EXPECT_EQ(lines_of(dir_ / "o/kl_summary.csv")[6], "zeta_coefficient_1,1");
  EXPECT_EQ(cli("kl --nodes 10 --terms 11").code, 2);
  EXPECT_EQ(cli("kl --dim 2 --nystrom corrected").code, 2);
}

TEST_F(CliTest, KlOptionalSolve) {
  const Outcome o = cli("--out " + at("o") + " kl --nodes 40 --terms 3 --solve-samples 4 --modes 2 --cells 8");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(lines_of(dir_ / "o/psi.csv").size(), 2u + 7u);
  EXPECT_EQ(lines_of(dir_ / "o/counters.csv")[2].substr(0, 4), "1,8,");
}

TEST_F(CliTest, CompareAtZeroEpsilonAgrees) {
  const auto cfg = write("t.cfg", trig_config);
  const Outcome o = cli("--out " + at("o") + " compare \"" + cfg.string() + "\"");
  ASSERT_EQ(o.code, 0) << o.err;
  const auto l = lines_of(dir_ / "o/compare.csv");
  EXPECT_EQ(l[1], "epsilon,N,rel_l2_distance");
  ASSERT_EQ(l.size(), 2u + 2u);
  for (std::size_t i = 2; i < l.size(); ++i) {
    EXPECT_LT(std::stod(l[i].substr(l[i].rfind(',') + 1)), 1e-10) << l[i];
  }
  expect_csv_shape(dir_ / "o/counters.csv", "solver,epsilon,factorizations,solve_pairs,matvecs,assemblies");
  expect_csv_shape(dir_ / "o/timings.csv", "solver,N,seconds");
  const auto one = write("a.cfg", uniform_config);
  EXPECT_EQ(cli("compare \"" + one.string() + "\"").code, 2);
}

TEST_F(CliTest, Table1SmallRun) {
  const Outcome o = cli("--out " + at("o") + " table1 --samples 20 --h 0.1");
  ASSERT_EQ(o.code, 0) << o.err;
  expect_csv_shape(dir_ / "o/table1.csv", "epsilon,N2,N3,N4,N5,N6");
  expect_csv_shape(dir_ / "o/table1_stderr.csv", "epsilon,N2,N3,N4,N5,N6");
  EXPECT_EQ(lines_of(dir_ / "o/table1.csv").size(), 2u + 4u);
  EXPECT_EQ(cli("table1 --h 0.3").code, 2);
  EXPECT_EQ(cli("table1 --samples 1").code, 2);
}

TEST_F(CliTest, VersionAndHelp) {
  const Outcome v = cli("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("0.1.0"), std::string::npos);
  const Outcome h = cli("--help");
  EXPECT_EQ(h.code, 0);
  for (const char* c : {"run", "table1", "converge", "compare", "kl", "--seed", "--workers", "--out"}) {
    EXPECT_NE(h.out.find(c), std::string::npos) << c;
  }
}

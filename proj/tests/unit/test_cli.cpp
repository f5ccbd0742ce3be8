// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fcntl.h>
#include <sys/file.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "ramp/cli.hpp"

namespace ramp {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result ramp_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ramp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  test::TempDir dir;
  std::string ws() const { return dir.path().string(); }
  Result in_ws(std::vector<std::string> args) const {
    args.push_back("--workspace");
    args.push_back(ws());
    return ramp_cli(std::move(args));
  }
};

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(ramp_cli({"--help"}).code, cli::kOk);
  EXPECT_EQ(ramp_cli({}).code, cli::kUsage);
  EXPECT_EQ(ramp_cli({"enumerate", "--model", "olmoe", "--frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(ramp_cli({"enumerate"}).code, cli::kUsage);
}

TEST_F(CliTest, EnumerateMixtralIsRegimeB) {
  const auto r = in_ws({"enumerate", "--model", "mixtral", "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["regime"], "B");
  EXPECT_GT(j["group_m_variants"].get<int>(), 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "Mixtral" / "pool.json"));
}

TEST_F(CliTest, EnumerateOlmoeIsRegimeA) {
  const auto r = in_ws({"enumerate", "--model", "olmoe"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("regime A"), std::string::npos);
  EXPECT_NE(r.out.find("0 GROUP_M variants"), std::string::npos);
}

TEST_F(CliTest, UnknownModelListsCatalog) {
  const auto r = in_ws({"enumerate", "--model", "gpt-9"});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("OLMoE"), std::string::npos);
  EXPECT_NE(r.err.find("DBRX"), std::string::npos);
}

TEST_F(CliTest, MissingUpstreamArtifactsFailFast) {
  auto r = in_ws({"profile", "--model", "olmoe"});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("enumerate"), std::string::npos);
  ASSERT_EQ(in_ws({"enumerate", "--model", "olmoe"}).code, cli::kOk);
  r = in_ws({"fit", "--model", "olmoe"});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("profile"), std::string::npos);
}

TEST_F(CliTest, ClassifyCheck) {
  const auto r = ramp_cli({"classify", "--check"});
  EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
  EXPECT_NE(r.out.find("8/8"), std::string::npos);
  EXPECT_NE(r.out.find("Phi-3.5-MoE    1600    50    32"), std::string::npos) << r.out;

  auto models = default_catalog();
  models[2].N = 1024;
  const auto path = dir.path() / "cat.json";
  std::ofstream(path) << catalog_to_json(models);
  const auto bad = ramp_cli({"classify", "--check", "--catalog", path.string()});
  EXPECT_EQ(bad.code, cli::kCheckFailed);
  EXPECT_NE(bad.out.find("MISMATCH"), std::string::npos);
}

TEST_F(CliTest, FullPipeline) {
  const std::vector<std::string> grid = {"--S", "8,64,512", "--beta", "0.5,1.0"};
  ASSERT_EQ(in_ws({"enumerate", "--model", "olmoe"}).code, cli::kOk);
  auto args = std::vector<std::string>{"profile", "--model", "olmoe", "--seeds-per-point", "2"};
  args.insert(args.end(), grid.begin(), grid.end());
  auto r = in_ws(args);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("trace: 9840 samples (9840 new)"), std::string::npos) << r.out;
  r = in_ws(args);
  EXPECT_NE(r.out.find("(0 new)"), std::string::npos) << r.out;

  r = in_ws({"fit", "--model", "olmoe", "--variant", "p2", "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  r = in_ws({"fit", "--model", "olmoe", "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_GE(nlohmann::json::parse(r.out)["median_r_squared"].get<double>(), 0.95);

  const auto hist = dir.path() / "h.csv";
  r = ramp_cli({"sample-routing", "--model", "olmoe", "--S", "32", "--beta", "0.5", "--seeds", "3"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::ofstream(hist) << r.out;
  r = in_ws({"dispatch", "--model", "olmoe", "--histogram", hist.string(), "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto sel = nlohmann::json::parse(r.out);
  EXPECT_EQ(sel["tokens"], 256);
  EXPECT_GT(sel["predicted_us"].get<double>(), 0.0);

  std::ofstream(dir.path() / "bad.csv") << "1,2,3\n";
  r = in_ws({"dispatch", "--model", "olmoe", "--histogram", (dir.path() / "bad.csv").string()});
  EXPECT_EQ(r.code, cli::kDataError);

  r = in_ws({"evaluate", "--model", "olmoe", "--mode", "regret", "--S", "8,1024", "--beta", "0.5,1.0", "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["n"], 6);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "OLMoE" / "reports" / "regret.csv"));

  r = in_ws({"evaluate", "--model", "olmoe", "--mode", "speedup", "--S", "8,64", "--beta", "1.0", "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto sp = nlohmann::json::parse(r.out);
  EXPECT_NEAR(sp["by_beta"][0]["geomean"].get<double>(), 1.0, 0.03);

  r = in_ws({"evaluate", "--model", "olmoe", "--mode", "curves", "--S", "64"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::ifstream omega(dir.path() / "OLMoE" / "reports" / "omega_vs_beta.csv");
  std::string header;
  std::getline(omega, header);
  EXPECT_EQ(header, "beta,mean_omega,std_omega");

  r = in_ws({"evaluate", "--model", "olmoe", "--mode", "nonsense"});
  EXPECT_EQ(r.code, cli::kDataError);
}

TEST_F(CliTest, ProfileFromExternalTrace) {
  ASSERT_EQ(in_ws({"enumerate", "--model", "olmoe"}).code, cli::kOk);
  const auto trace = dir.path() / "ext.csv";
  std::ofstream(trace) << kTraceHeader << "\n0,8,1,0,8,30.5\n0,64,1,0,64,40.25\n";
  auto r = in_ws({"profile", "--model", "olmoe", "--oracle", "trace:" + trace.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  // Config 1 has no samples; it is excluded rather than failing the fit.
  r = in_ws({"fit", "--model", "olmoe", "--variant", "p2", "--json"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["fitted"], 1);

  std::ofstream(trace) << kTraceHeader << "\n0,8,1,0,8,-2\n";
  r = in_ws({"profile", "--model", "olmoe", "--oracle", "trace:" + trace.string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("row 1"), std::string::npos);
}

TEST_F(CliTest, BusyWorkspaceIsRejected) {
  std::filesystem::create_directories(dir.path());
  const int fd = ::open((dir.path() / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
  ASSERT_GE(fd, 0);
  ASSERT_EQ(::flock(fd, LOCK_EX | LOCK_NB), 0);
  const auto r = in_ws({"enumerate", "--model", "olmoe"});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("in use"), std::string::npos);
  ::close(fd);
  EXPECT_EQ(in_ws({"enumerate", "--model", "olmoe"}).code, cli::kOk);
}

TEST_F(CliTest, SampleRoutingHonoursSeed) {
  const auto a = ramp_cli({"sample-routing", "--model", "qwen3", "--S", "16", "--beta", "0.7", "--seed", "5"});
  const auto b = ramp_cli({"sample-routing", "--model", "qwen3", "--S", "16", "--beta", "0.7", "--seed", "5"});
  const auto c = ramp_cli({"sample-routing", "--model", "qwen3", "--S", "16", "--beta", "0.7", "--seed", "6"});
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(ramp_cli({"sample-routing", "--model", "qwen3", "--S", "16,32", "--beta", "0.7"}).code,
            cli::kDataError);
}

}  // namespace
}  // namespace ramp

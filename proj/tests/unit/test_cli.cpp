#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = markovpg::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("usage errors exit non-zero") {
  CHECK(run({}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);
  const auto r = run({"fit", "--config", "x.json", "--no-such-flag"});
  CHECK(r.code != 0);
  CHECK(run({"fit"}).code != 0);
  CHECK(run({"--help"}).code == 0);
  const auto missing = run({"validate", "--config", "/nonexistent/config.json"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("cannot read config") != std::string::npos);
}

TEST_CASE("simulate then fit with labels writes chains and a manifest") {
  const auto dir = testing::scratch_dir("cli_small");
  const auto sim = dir / "sim";
  auto r = run({"simulate", "--out", sim.string(), "--seed", "4", "--steps", "80"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"labels.csv", "probabilities.csv", "covariates.csv", "truth.csv", "config.json",
                        "config_labels.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(sim / f), f);

  const auto fit = dir / "fit";
  r = run({"fit", "--config", (sim / "config_labels.json").string(), "--out", fit.string(), "--iterations", "60",
           "--burn-in", "10", "--chains", "2", "--csv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"chain_0.bin", "chain_1.bin", "chain_0.csv", "diagnostics.csv", "standardization.csv",
                        "validation.txt", "manifest.json"})
    CHECK_MESSAGE(fs::exists(fit / f), f);
  const auto m = read_json(fit / "manifest.json");
  CHECK(m["command"] == "fit");
  CHECK(m["seed"] == 4);
  CHECK(m["config"]["sampler"]["iterations"] == 60);
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(m["inputs"].size() == 2);

  // a manifest can be replayed as a config and reproduces the chain
  const auto replay = dir / "replay";
  r = run({"fit", "--config", (fit / "manifest.json").string(), "--out", replay.string(), "--threads", "2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::ifstream a(fit / "chain_0.bin", std::ios::binary), b(replay / "chain_0.bin", std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());

  r = run({"summarize", "--chain-dir", fit.string(), "--truth", (sim / "truth.csv").string(), "--out",
           (dir / "sum").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"summary.csv", "intervals_long.csv", "pairwise_long.csv", "pairwise_s1_s1.csv",
                        "coverage.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(dir / "sum" / f), f);

  r = run({"gof", "--config", (sim / "config_labels.json").string(), "--chain-dir", fit.string(), "--out",
           (dir / "gof").string(), "--draws", "20"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto g = read_json(dir / "gof" / "gof_summary.json");
  CHECK(g["draws_used"] == 20);

  r = run({"validate", "--config", (sim / "config.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("transitions: 160") != std::string::npos);
}

TEST_CASE("validation failures are reported with a non-zero exit") {
  const auto dir = testing::scratch_dir("cli_bad");
  std::ofstream(dir / "labels.csv") << "individual_id,timestamp,state\ng,0,a\ng,360,q\n";
  std::ofstream(dir / "cov.csv") << "individual_id,timestamp,habitat,w\ng,0,h,1\ng,360,h,2\n";
  std::ofstream(dir / "config.json") << R"({"states": ["a", "b"], "labels": "labels.csv", "covariates": "cov.csv"})";
  const auto r = run({"validate", "--config", (dir / "config.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("labels.csv:3") != std::string::npos);
}

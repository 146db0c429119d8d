#include <doctest.h>

#include <fstream>
#include <sstream>

#include "markovpg/errors.hpp"
#include "markovpg/imputation.hpp"
#include "markovpg/io.hpp"
#include "markovpg/simulate.hpp"
#include "support.hpp"

using namespace markovpg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// Writes a small labelled study and returns a config pointing at it.
RunConfig write_study(const fs::path& dir) {
  const FitData d = testing::small_scenario_data(14, 60);
  write_labels_csv(dir / "labels.csv", d, d.labels);
  const std::vector<std::string> skip = {"cos_time", "sin_time"};
  write_covariates_csv(dir / "covariates.csv", d, skip);
  Rng rng(3);
  write_probabilities_csv(dir / "probabilities.csv", simulate_classification(d, 0.6, rng), d.alphabet);
  RunConfig c;
  c.base_dir = dir;
  c.states = d.alphabet.labels();
  c.labels = "labels.csv";
  c.covariates = "covariates.csv";
  c.diurnal = true;
  return c;
}

}  // namespace

TEST_CASE("doubles are printed shortest and round-trip") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    const auto s = format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("config parsing is strict and accepts manifests") {
  const char* text = R"({"states": ["fly", "feed", "walk"], "reference_state": "feed",
    "labels": "l.csv", "covariates": "c.csv", "sampler": {"iterations": 10, "burn_in": 2, "seed": 5}})";
  const auto c = parse_config(text, "/data");
  CHECK(c.alphabet().reference() == 1);
  CHECK(c.sampler.iterations == 10);
  CHECK(c.sampler.seed == 5);
  CHECK(c.resolve(*c.labels) == fs::path("/data/l.csv"));
  CHECK(c.m_imputations == 200);
  CHECK(c.priors.variance == 100.0);

  const auto again = parse_config(config_to_json(c), "/elsewhere");
  CHECK(again.resolve(*again.labels) == fs::path("/data/l.csv"));
  CHECK(again.sampler.burn_in == 2);
  const auto manifest = parse_config(std::string(R"({"tool": "markovpg", "config": )") + config_to_json(c) + "}", "/x");
  CHECK(manifest.states == c.states);

  CHECK_THROWS_AS(parse_config(R"({"states": ["a", "b"], "colour": 1})", "."), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"states": ["a", "b"], "sampler": {"iters": 1}})", "."), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"states": ["a", "b"], "reference_state": "c"})", "."), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"states": ["a"]})", "."), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"states": ["a", "b"], "prior_variance": 0})", "."), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json", "."), ConfigError);
}

TEST_CASE("labelled inputs load, align and standardize") {
  const auto dir = testing::scratch_dir("io_load");
  const RunConfig c = write_study(dir);
  const auto in = load_inputs(c);
  const FitData& d = in.data;
  CHECK(d.n_rows() == 2 * 61);
  CHECK(d.labels.size() == d.n_rows());
  CHECK(d.layout.quantitative == std::vector<std::string>{"x1", "cos_time", "sin_time"});
  CHECK(in.standardization.names == std::vector<std::string>{"x1"});
  const auto x1 = d.design.col(static_cast<Eigen::Index>(d.layout.quantitative_offset()));
  CHECK(std::abs(x1.mean()) < 1e-12);
  CHECK(std::sqrt((x1.array() - x1.mean()).square().sum() / (x1.size() - 1.0)) == doctest::Approx(1.0));
  // time of day is used as is
  const auto cos_col = d.design.col(static_cast<Eigen::Index>(d.layout.quantitative_offset()) + 1);
  CHECK(cos_col[0] == doctest::Approx(1.0));
  CHECK(in.report.n_transitions == 120);
  CHECK(in.report.to_text().find("transitions: 120") != std::string::npos);

  // reloading the regenerated scenario reproduces the design exactly
  const FitData orig = testing::small_scenario_data(14, 60);
  CHECK((orig.design - d.design).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(orig.labels == d.labels);
}

TEST_CASE("gaps in the fix schedule start new segments") {
  const auto dir = testing::scratch_dir("io_gaps");
  spit(dir / "labels.csv", "individual_id,timestamp,state\ng,0,a\ng,360,b\ng,720,a\ng,2000,b\ng,2360,b\n");
  spit(dir / "cov.csv", "individual_id,timestamp,habitat,w\ng,0,h,1\ng,360,h,2\ng,720,h,3\ng,2000,h,4\ng,2360,h,5\n");
  RunConfig c;
  c.base_dir = dir;
  c.states = {"a", "b"};
  c.labels = "labels.csv";
  c.covariates = "cov.csv";
  const auto in = load_inputs(c);
  REQUIRE(in.data.segments.size() == 2);
  CHECK(in.data.segments[1].first_row == 3);
  CHECK(in.data.n_transitions() == 3);
}

TEST_CASE("malformed inputs name the file and line") {
  const auto dir = testing::scratch_dir("io_bad");
  RunConfig c;
  c.base_dir = dir;
  c.states = {"a", "b"};
  c.labels = "labels.csv";
  c.covariates = "cov.csv";
  const std::string cov = "individual_id,timestamp,habitat,w\ng,0,h,1\ng,360,h,2\ng,720,h,3\n";
  auto expect_error = [&](const std::string& labels, const std::string& covs, const std::string& fragment) {
    spit(dir / "labels.csv", labels);
    spit(dir / "cov.csv", covs);
    try {
      load_inputs(c);
      FAIL("expected a validation error containing " << fragment);
    } catch (const ValidationError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  const std::string good = "individual_id,timestamp,state\ng,0,a\ng,360,b\ng,720,a\n";
  expect_error("individual_id,timestamp,state\ng,0,a\ng,360,z\ng,720,a\n", cov, "labels.csv:3");
  expect_error("individual_id,timestamp,state\ng,0,a\ng,360,b\ng,360,a\n", cov, "duplicate timestamp");
  expect_error("individual_id,timestamp,state\ng,0,a\ng,360,b\ng,1080,a\n", cov, "no covariate row");
  expect_error(good, cov + "g,1080,h,4\n", "has no matching fix");
  expect_error(good, "individual_id,timestamp,habitat,w\ng,0,h,1\ng,360,h,1\ng,720,h,1\n", "zero sd");
  expect_error(good, "individual_id,timestamp,habitat,w\ng,0,h,1\ng,360,h,x\ng,720,h,1\n", "cov.csv:3");
  expect_error(good, "id,timestamp,habitat,w\n", "header");

  c.labels.reset();
  c.probabilities = "probs.csv";
  spit(dir / "cov.csv", cov);
  spit(dir / "probs.csv", "individual_id,timestamp,a,b\ng,0,0.5,0.5\ng,360,0.5,0.6\ng,720,1,0\n");
  CHECK_THROWS_WITH_AS(load_inputs(c), doctest::Contains("probs.csv:3"), ValidationError);
  spit(dir / "probs.csv", "individual_id,timestamp,a,b\ng,0,0.5,0.5\ng,360,1.2,-0.2\ng,720,1,0\n");
  CHECK_THROWS_WITH_AS(load_inputs(c), doctest::Contains("outside [0, 1]"), ValidationError);
  // named columns may come in any order
  spit(dir / "probs.csv", "individual_id,timestamp,b,a\ng,0,0.2,0.8\ng,360,0.9,0.1\ng,720,0,1\n");
  const auto in = load_inputs(c);
  CHECK(in.probabilities[0].probs(0, 0) == 0.8);
  CHECK(argmax_labels(in.probabilities) == std::vector<std::size_t>{0, 1, 0});

  c.labels = "labels.csv";
  CHECK_THROWS_AS(load_inputs(c), ConfigError);
}

TEST_CASE("chains round-trip bit-exactly through binary and CSV") {
  const FitData d = testing::small_scenario_data(2, 40);
  const auto chain = run_chain(d, PriorSpec{}, testing::short_run(30, 5));
  const auto dir = testing::scratch_dir("io_chain");
  write_chain_binary(dir / "c.bin", chain);
  const auto back = read_chain_binary(dir / "c.bin");
  CHECK(back.draws == chain.draws);
  CHECK(back.dataset_index == chain.dataset_index);
  CHECK(back.alphabet == chain.alphabet);
  CHECK(back.layout == chain.layout);
  CHECK(back.seed == chain.seed);
  write_chain_binary(dir / "c2.bin", back);
  CHECK(slurp(dir / "c.bin") == slurp(dir / "c2.bin"));

  write_chain_csv(dir / "c.csv", chain);
  const auto csv = read_chain_csv(dir / "c.csv", chain);
  CHECK(csv.draws == chain.draws);
  CHECK(csv.dataset_index == chain.dataset_index);

  std::string bytes = slurp(dir / "c.bin");
  spit(dir / "short.bin", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_chain_binary(dir / "short.bin"), ValidationError);
  spit(dir / "junk.bin", "NOTACHAIN");
  CHECK_THROWS_AS(read_chain_binary(dir / "junk.bin"), ValidationError);
}

TEST_CASE("imputation and truth files round-trip") {
  const auto dir = testing::scratch_dir("io_imp");
  RunConfig c = write_study(dir);
  c.labels.reset();
  c.probabilities = "probabilities.csv";
  const auto in = load_inputs(c);
  const auto set = draw_imputations(in.probabilities, 7, 11);
  write_imputations_csv(dir / "imp.csv", set, in.data);
  const auto back = read_imputations_csv(dir / "imp.csv", in.data);
  CHECK(back.datasets == set.datasets);
  CHECK(back.offsets == set.offsets);

  ScenarioSpec spec;
  spec.steps = 10;
  const auto sc = make_scenario(spec);
  write_truth_csv(dir / "truth.csv", sc.truth, sc.data.alphabet, sc.data.layout);
  const auto t = read_truth_csv(dir / "truth.csv", sc.data.alphabet, sc.data.layout);
  for (std::size_t i = 0; i < 3; ++i) CHECK(t.beta[i] == sc.truth.beta[i]);
  CHECK(t.mu == sc.truth.mu);
}

TEST_CASE("summary and pairwise tables have the documented headers") {
  const FitData d = testing::small_scenario_data(5, 60);
  const auto chain = run_chain(d, PriorSpec{}, testing::short_run(40, 10));
  const std::vector<PosteriorChain> chains = {chain};
  const auto rows = summarize(chains);
  const auto dir = testing::scratch_dir("io_summary");
  write_summary_csv(dir / "s.csv", rows, chain.alphabet);
  const auto table = read_csv(dir / "s.csv");
  CHECK(table.header.size() == 12);
  CHECK(table.header[0] == "from");
  CHECK(table.header[11] == "significance");
  CHECK(table.rows.size() == rows.size());
  write_pairwise_matrix_csv(dir / "p.csv", pairwise_habitat(chains, 0, 0), chain.layout);
  const auto p = read_csv(dir / "p.csv");
  REQUIRE(p.rows.size() == 2);
  CHECK(p.rows[0][1].empty());
  CHECK(std::stod(p.rows[0][2]) + std::stod(p.rows[1][1]) == 1.0);
}

#include <doctest.h>

#include <cmath>

#include "markovpg/errors.hpp"
#include "markovpg/simulate.hpp"
#include "support.hpp"

using namespace markovpg;

TEST_CASE("scenario covariates have the documented layout") {
  ScenarioSpec spec;
  spec.steps = 500;
  spec.n_individuals = 3;
  spec.n_habitats = 4;
  spec.n_noise_covariates = 2;
  const auto sc = make_scenario(spec);
  const auto& l = sc.data.layout;
  CHECK(l.quantitative == std::vector<std::string>{"x1", "x2", "cos_time", "sin_time"});
  CHECK(l.width() == 2 + 4 + 4);
  CHECK(sc.data.n_rows() == 3 * 501);
  CHECK(sc.data.segments.size() == 3);
  CHECK(sc.data.labels.empty());
  for (Eigen::Index q = 0; q < 2; ++q) {
    const auto col = sc.data.design.col(static_cast<Eigen::Index>(l.quantitative_offset()) + q);
    CHECK(std::abs(col.mean()) < 1e-12);
    CHECK(std::sqrt((col.array() - col.mean()).square().sum() / (col.size() - 1.0)) == doctest::Approx(1.0));
  }
  for (std::size_t r = 0; r < sc.data.n_rows(); ++r) {
    const auto row = sc.data.design.row(static_cast<Eigen::Index>(r));
    CHECK(row(static_cast<Eigen::Index>(l.habitat_offset() + sc.habitat[r])) == 1.0);
    CHECK(row.segment(static_cast<Eigen::Index>(l.quantitative_offset()) + 2, 2).squaredNorm() == doctest::Approx(1.0));
  }
  // truth: bounded coefficients and mu at the mean habitat effect
  for (const auto& b : sc.truth.beta) CHECK(b.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(sc.truth.mu(1, 0) == doctest::Approx(sc.truth.beta[1].col(0).segment(2, 4).mean()));
}

TEST_CASE("scenarios are deterministic in the seed") {
  ScenarioSpec spec;
  spec.steps = 50;
  const auto a = make_scenario(spec);
  const auto b = make_scenario(spec);
  CHECK(a.data.design == b.data.design);
  CHECK(a.truth.beta[0] == b.truth.beta[0]);
  spec.seed = 2;
  CHECK(make_scenario(spec).data.design != a.data.design);
  spec.n_states = 1;
  CHECK_THROWS_AS(make_scenario(spec), ConfigError);
}

TEST_CASE("forward simulation follows strong coefficients") {
  ScenarioSpec spec;
  spec.steps = 400;
  spec.diurnal = false;
  spec.n_habitats = 0;
  spec.n_individuals = 1;
  spec.truth = CoefficientState::zeros(3, 1);
  auto sc = make_scenario(spec);
  // a constant column with a large slot-1 coefficient sends every state to s2
  sc.data.design.setOnes();
  for (auto& b : sc.truth.beta) b(0, 1) = 40.0;
  Rng rng(1);
  const std::size_t init = 0;
  const auto labels = forward_simulate(sc.data, sc.truth, std::span<const std::size_t>(&init, 1), rng);
  CHECK(labels[0] == 0);
  for (std::size_t r = 1; r < labels.size(); ++r) CHECK(labels[r] == 1);

  const std::vector<std::size_t> wrong = {0, 1};
  CHECK_THROWS_AS(forward_simulate(sc.data, sc.truth, wrong, rng), DimensionError);
}

TEST_CASE("simulated studies round-trip through sequences and counts") {
  const FitData d = testing::small_scenario_data(4, 200);
  const auto seqs = to_sequences(d);
  REQUIRE(seqs.size() == d.segments.size());
  CHECK(seqs[0].individual_id == "ind1");
  CHECK(seqs[0].step == 360);
  const auto counts = transition_counts(seqs, 3);
  CHECK(static_cast<std::size_t>(counts.pooled.sum()) == d.n_transitions());
}

TEST_CASE("individual effects recover the omitted individual") {
  DesignLayout l{{"a", "b", "c"}, {}, {"x"}};
  Eigen::VectorXd col(3);
  col << 0.5, -0.2, 9.0;
  const auto e = individual_effects(col, l);
  REQUIRE(e.size() == 3);
  CHECK(e[0] == 0.5);
  CHECK(e[1] == -0.2);
  CHECK(e[2] == doctest::Approx(-0.3));
}

TEST_CASE("simulated classifier output is stochastic and favours the truth") {
  const FitData d = testing::small_scenario_data(6, 100);
  Rng rng(8);
  const auto probs = simulate_classification(d, 0.7, rng);
  REQUIRE(probs.size() == d.layout.n_individuals());
  std::size_t row = 0;
  for (const auto& p : probs) {
    CHECK_NOTHROW(p.validate());
    for (Eigen::Index r = 0; r < p.probs.rows(); ++r, ++row) {
      CHECK(p.probs(r, static_cast<Eigen::Index>(d.labels[row])) >= 0.7);
      CHECK(p.timestamps[static_cast<std::size_t>(r)] == d.timestamps[row]);
    }
  }
  FitData unlabelled = d;
  unlabelled.labels.clear();
  CHECK_THROWS_AS(simulate_classification(unlabelled, 0.7, rng), ConfigError);
}

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "markovpg/gibbs.hpp"
#include "markovpg/simulate.hpp"

namespace testing {

// One individual, no habitats, one covariate x ~ N(0, 1); J = 2. Labels are
// forward-simulated with beta_i = (beta0, beta1) for the two from-states.
inline markovpg::FitData two_state_problem(std::size_t n_transitions, double beta0, double beta1, std::uint64_t seed) {
  using namespace markovpg;
  FitData d;
  d.alphabet = StateAlphabet({"a", "b"});
  d.layout.individuals = {"only"};
  d.layout.quantitative = {"x"};
  const auto rows = static_cast<Eigen::Index>(n_transitions + 1);
  d.design.resize(rows, 1);
  Rng rng(seed);
  for (Eigen::Index r = 0; r < rows; ++r) d.design(r, 0) = rng.normal();
  for (Eigen::Index r = 0; r < rows; ++r) d.timestamps.push_back(360 * r);
  d.segments = {Segment{0, 0, static_cast<std::size_t>(rows)}};
  CoefficientState truth = CoefficientState::zeros(2, 1);
  truth.beta[0](0, 0) = beta0;
  truth.beta[1](0, 0) = beta1;
  const std::size_t init = 0;
  d.labels = forward_simulate(d, truth, std::span<const std::size_t>(&init, 1), rng);
  return d;
}

inline markovpg::FitData small_scenario_data(std::uint64_t seed, std::size_t steps = 300, std::size_t states = 3) {
  using namespace markovpg;
  ScenarioSpec spec;
  spec.steps = steps;
  spec.n_states = states;
  spec.seed = seed;
  const SimScenario sc = make_scenario(spec);
  Rng rng(seed + 1000);
  return simulate_sequences(sc, rng);
}

inline markovpg::SamplerConfig short_run(std::size_t iterations = 200, std::size_t burn_in = 50, std::uint64_t seed = 7) {
  markovpg::SamplerConfig c;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.seed = seed;
  return c;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("markovpg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing

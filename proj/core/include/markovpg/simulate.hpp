#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "markovpg/gibbs.hpp"
#include "markovpg/imputation.hpp"
#include "markovpg/model.hpp"
#include "markovpg/rng.hpp"

namespace markovpg {

// Synthetic study design. Quantitative covariates are `n_noise_covariates`
// standardized Gaussian columns followed, when `diurnal` is set, by the
// cos/sin time-of-day pair.
struct ScenarioSpec {
  std::size_t n_individuals = 2;
  std::size_t n_states = 3;
  std::size_t n_habitats = 2;
  std::size_t n_noise_covariates = 1;
  bool diurnal = true;
  std::size_t steps = 4000;  // transitions per individual
  std::int64_t step_seconds = 360;
  std::int64_t start_time = 0;
  double habitat_stay = 0.95;
  double coefficient_range = 1.0;  // true coefficients ~ U(-range, range)
  std::optional<CoefficientState> truth;
  std::uint64_t seed = 1;
};

struct SimScenario {
  ScenarioSpec spec;
  CoefficientState truth;
  FitData data;                              // covariates only; labels empty
  std::vector<std::size_t> habitat;          // per row
  Eigen::MatrixXd noise;                     // rows x n_noise_covariates, standardized
};

// Materializes covariate paths and the true coefficients. Throws ConfigError
// on invalid dimensions.
SimScenario make_scenario(const ScenarioSpec& spec);

// Forward-simulates states on the given design rows. The first state of each
// segment is taken from `initial_states` (one per segment); every later state
// is drawn from transition_row at that row's covariates.
std::vector<std::size_t> forward_simulate(const FitData& data, const CoefficientState& coeffs,
                                          std::span<const std::size_t> initial_states, Rng& rng);

// Simulated study: scenario covariates plus labels. Initial states are uniform.
FitData simulate_sequences(const SimScenario& scenario, Rng& rng);

// Per-individual state sequences of a labelled FitData, one per segment.
std::vector<BehaviorSequence> to_sequences(const FitData& data);

// All N individual effects of one coefficient column (the last is minus the
// sum of the others).
std::vector<double> individual_effects(const Eigen::Ref<const Eigen::VectorXd>& column, const DesignLayout& layout);

// Noisy classifier output for known labels: the true state gets probability
// U(min_confidence, 1), the remainder is split at random over the others.
std::vector<ClassificationProbs> simulate_classification(const FitData& data, double min_confidence, Rng& rng);

}  // namespace markovpg

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "markovpg/gibbs.hpp"
#include "markovpg/model.hpp"

namespace markovpg {

using DrawMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Linear-interpolation sample quantile (the usual "type 7" definition).
double quantile(std::span<const double> values, double p);

// Draws of every chain stacked in chain order. Throws if layouts differ.
DrawMatrix pooled_draws(std::span<const PosteriorChain> chains);

// exp() of every beta column of every draw; mu columns are dropped.
// Column order matches PosteriorChain::beta_index. Throws on an empty chain.
DrawMatrix odds_ratios(const PosteriorChain& chain);

enum class Significance { kNone, kPositive, kNegative };
const char* to_string(Significance s);

struct SignificanceResult {
  Significance call = Significance::kNone;
  double proportion = 0.0;  // fraction of draws with odds ratio > 1
  double or_lower = 0.0;    // 2.5% quantile of the odds ratio
  double or_upper = 0.0;    // 97.5% quantile
};

// Positive iff the 95% odds-ratio interval excludes 1 and more than 95% of
// draws have odds ratio > 1; negative iff it excludes 1 and fewer than 5% do.
SignificanceResult significance(std::span<const double> beta_draws);

struct CoefficientSummary {
  std::size_t from_state = 0;
  std::size_t to_state = 0;
  std::size_t column = 0;
  DesignLayout::Block block = DesignLayout::Block::kQuantitative;
  std::string covariate;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double or_mean = 0.0;
  double or_lower = 0.0;
  double or_upper = 0.0;
  double prop_or_gt1 = 0.0;
  Significance call = Significance::kNone;  // only evaluated for quantitative covariates
};

// One row per (from, non-reference to, covariate), from pooled draws.
std::vector<CoefficientSummary> summarize(std::span<const PosteriorChain> chains);

// H x H matrix of the fraction of draws with zeta_a > zeta_b (ties count
// one half). Diagonal is NaN. entry(a, b) + entry(b, a) == 1 exactly.
struct PairwiseMatrix {
  std::size_t from_state = 0;
  std::size_t to_state = 0;
  Eigen::MatrixXd proportion;

  Significance call(std::size_t a, std::size_t b) const;
};

PairwiseMatrix pairwise_habitat(std::span<const PosteriorChain> chains, std::size_t from_state, std::size_t slot);

// Gelman-Rubin potential scale reduction per parameter; needs >= 2 chains
// of equal length >= 2.
std::vector<double> potential_scale_reduction(std::span<const PosteriorChain> chains);

// Replicate labellings on the covariate rows of `data`, one per coefficient
// state, started from `initial_states` (one per segment).
std::vector<std::vector<std::size_t>> posterior_predict(std::span<const CoefficientState> draws, const FitData& data,
                                                        std::span<const std::size_t> initial_states, Rng& rng);

struct GofStatistics {
  Eigen::MatrixXd transition_frequency;  // row-normalized pooled counts, J x J
  Eigen::VectorXd occupancy;             // fraction of fixes in each state
};

GofStatistics gof_statistics(const FitData& data, std::span<const std::size_t> labels);

// sum_ij (n_ij - E_ij)^2 / E_ij with E_ij the model-expected count given the
// from-states of `labels` under `coeffs`; cells with E_ij == 0 are skipped.
double chi_square_discrepancy(const FitData& data, std::span<const std::size_t> labels,
                              const CoefficientState& coeffs);

struct GofReport {
  GofStatistics observed;
  std::vector<GofStatistics> replicates;
  std::vector<double> observed_discrepancy;   // per used draw
  std::vector<double> replicate_discrepancy;  // per used draw
  std::vector<std::size_t> draw_index;
  // Fraction of draws with replicate discrepancy >= observed.
  double predictive_p_value = 0.0;
  bool inside_central_band(double level = 0.95) const;
};

// Posterior-predictive check of `labels` (observed states on data's rows)
// using up to `max_draws` evenly spaced pooled draws.
GofReport goodness_of_fit(std::span<const PosteriorChain> chains, const FitData& data,
                          std::span<const std::size_t> labels, std::size_t max_draws, std::uint64_t seed);

}  // namespace markovpg

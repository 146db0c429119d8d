#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "markovpg/model.hpp"
#include "markovpg/rng.hpp"

namespace markovpg {

struct ImputationSet;

// Shared prior variance for the individual, habitat and quantitative blocks.
// Individual and quantitative blocks are centered at 0, habitat entries at
// mu_ij, which itself has a flat prior.
struct PriorSpec {
  double variance = 100.0;
};

struct SamplerConfig {
  std::size_t iterations = 15000;
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  std::size_t chains = 1;
  // Threads for the from-state parallel sweep. Output does not depend on it.
  std::size_t threads = 1;
  // Start from N(0, 1) coefficients instead of zeros.
  bool random_init = false;
  // Permit data with no transitions; the chain then samples the prior.
  bool prior_only = false;

  void validate() const;
};

// A contiguous run of regularly spaced fixes for one individual.
struct Segment {
  std::size_t individual = 0;
  std::size_t first_row = 0;
  std::size_t length = 0;
};

// Covariates and (optionally) fixed labels for every fix. Row r of `design`
// is x for fix r; the transition into fix r uses that row.
struct FitData {
  StateAlphabet alphabet;
  DesignLayout layout;
  Eigen::MatrixXd design;
  std::vector<std::int64_t> timestamps;
  std::vector<Segment> segments;
  std::vector<std::size_t> labels;  // empty when labels come from an ImputationSet

  std::size_t n_rows() const { return static_cast<std::size_t>(design.rows()); }
  std::size_t n_transitions() const;
  // Throws DimensionError/ValidationError when rows, segments and labels disagree.
  void validate() const;
};

// Every transition out of one from-state under a given labelling.
struct FromStateBlock {
  std::size_t from_state = 0;
  Eigen::MatrixXd x;                      // one row per transition
  std::vector<std::size_t> destinations;  // destination state per row
};

std::vector<FromStateBlock> build_blocks(const FitData& data, std::span<const std::size_t> labels);

// Gaussian full conditional of one coefficient column given the PG variables.
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  Eigen::LLT<Eigen::MatrixXd> factor;  // of precision

  Eigen::VectorXd draw(Rng& rng) const;
};

// Prior mean of column (from_state, slot): zeros except mu in the habitat block.
Eigen::VectorXd prior_mean(const DesignLayout& layout, const CoefficientState& coeffs,
                           std::size_t from_state, std::size_t slot);

// Offsets C_r for every row of the block, for destination slot `slot`.
Eigen::VectorXd block_offsets(const FromStateBlock& block, const CoefficientState& coeffs,
                              const StateAlphabet& alphabet, std::size_t slot);

// Conditional of beta_{i,slot} for fixed omega: precision X' Omega X + I / sigma^2,
// mean P^{-1} (X' (kappa + Omega C) + m0 / sigma^2).
GaussianConditional beta_conditional(const FromStateBlock& block, const Eigen::VectorXd& offsets,
                                     const Eigen::VectorXd& omega, const Eigen::VectorXd& prior_mean,
                                     const StateAlphabet& alphabet, std::size_t slot,
                                     const PriorSpec& priors);

// One exact Gibbs draw of beta_{i,slot} with fresh PG variables.
Eigen::VectorXd update_beta(const FromStateBlock& block, const CoefficientState& coeffs,
                            const DesignLayout& layout, const StateAlphabet& alphabet,
                            const PriorSpec& priors, std::size_t slot, Rng& rng);

// Draws mu ~ N(mean(zeta), variance / H).
double update_mu(const Eigen::Ref<const Eigen::VectorXd>& zeta, double variance, Rng& rng);

// Stored draws from one chain. Row d of `draws` is CoefficientState::flatten
// of the d-th kept iteration.
struct PosteriorChain {
  StateAlphabet alphabet;
  DesignLayout layout;
  std::size_t chain_index = 0;
  std::uint64_t seed = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> draws;
  std::vector<std::size_t> dataset_index;  // imputation dataset used per kept draw

  std::size_t n_draws() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t n_parameters() const { return static_cast<std::size_t>(draws.cols()); }
  std::size_t beta_index(std::size_t from_state, std::size_t slot, std::size_t column) const;
  std::size_t mu_index(std::size_t from_state, std::size_t slot) const;
  std::vector<std::string> parameter_names() const;
  CoefficientState state(std::size_t draw) const;
};

// Runs one chain. When `imputations` is non-null a dataset is chosen
// uniformly each iteration; otherwise data.labels is used.
PosteriorChain run_chain(const FitData& data, const PriorSpec& priors, const SamplerConfig& config,
                         const ImputationSet* imputations = nullptr, std::size_t chain_index = 0);

std::vector<PosteriorChain> run_chains(const FitData& data, const PriorSpec& priors,
                                       const SamplerConfig& config,
                                       const ImputationSet* imputations = nullptr);

}  // namespace markovpg

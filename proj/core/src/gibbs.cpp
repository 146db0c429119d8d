#include "markovpg/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "markovpg/errors.hpp"
#include "markovpg/imputation.hpp"
#include "markovpg/pg_sampler.hpp"

namespace markovpg {

void SamplerConfig::validate() const {
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (burn_in > iterations) throw ConfigError("burn-in exceeds the number of iterations");
  if (chains < 1) throw ConfigError("need at least one chain");
  if (threads < 1) throw ConfigError("need at least one thread");
}

std::size_t FitData::n_transitions() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.length > 0 ? s.length - 1 : 0;
  return n;
}

void FitData::validate() const {
  if (static_cast<std::size_t>(design.cols()) != layout.width())
    throw DimensionError("design matrix has " + std::to_string(design.cols()) + " columns, layout width is " +
                         std::to_string(layout.width()));
  if (!timestamps.empty() && timestamps.size() != n_rows())
    throw DimensionError("timestamps do not match design rows");
  std::size_t covered = 0;
  for (const auto& s : segments) {
    if (s.first_row != covered) throw ValidationError("segments", "segments must tile the design rows in order");
    if (s.individual >= layout.n_individuals()) throw ValidationError("segments", "individual index out of range");
    covered += s.length;
  }
  if (covered != n_rows()) throw ValidationError("segments", "segments do not cover every design row");
  if (!labels.empty()) {
    if (labels.size() != n_rows()) throw DimensionError("labels do not match design rows");
    for (std::size_t r = 0; r < labels.size(); ++r)
      if (labels[r] >= alphabet.size())
        throw ValidationError("labels row " + std::to_string(r), "state index out of range");
  }
}

std::vector<FromStateBlock> build_blocks(const FitData& data, std::span<const std::size_t> labels) {
  if (labels.size() != data.n_rows()) throw DimensionError("labels do not match design rows");
  const std::size_t j = data.alphabet.size();
  std::vector<std::vector<Eigen::Index>> rows(j);
  std::vector<FromStateBlock> blocks(j);
  for (const auto& seg : data.segments) {
    for (std::size_t r = seg.first_row + 1; r < seg.first_row + seg.length; ++r) {
      const std::size_t from = labels[r - 1];
      rows[from].push_back(static_cast<Eigen::Index>(r));
      blocks[from].destinations.push_back(labels[r]);
    }
  }
  for (std::size_t i = 0; i < j; ++i) {
    blocks[i].from_state = i;
    blocks[i].x = data.design(rows[i], Eigen::all);
  }
  return blocks;
}

Eigen::VectorXd GaussianConditional::draw(Rng& rng) const {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  // Cov = P^{-1} = L^{-T} L^{-1}, so mean + L^{-T} z has the right law.
  return mean + factor.matrixU().solve(z);
}

Eigen::VectorXd prior_mean(const DesignLayout& layout, const CoefficientState& coeffs,
                           std::size_t from_state, std::size_t slot) {
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.width()));
  if (layout.n_habitats() > 0)
    m0.segment(static_cast<Eigen::Index>(layout.habitat_offset()), static_cast<Eigen::Index>(layout.n_habitats()))
        .setConstant(coeffs.mu(static_cast<Eigen::Index>(from_state), static_cast<Eigen::Index>(slot)));
  return m0;
}

namespace {

// C_r for slot k from the slot predictors psi (rows x slots); the reference
// state contributes exp(0).
Eigen::VectorXd offsets_from_psi(const Eigen::MatrixXd& psi, std::size_t slot) {
  const auto k = static_cast<Eigen::Index>(slot);
  Eigen::VectorXd c(psi.rows());
  for (Eigen::Index r = 0; r < psi.rows(); ++r) {
    double hi = 0.0;
    for (Eigen::Index s = 0; s < psi.cols(); ++s)
      if (s != k) hi = std::max(hi, psi(r, s));
    double sum = std::exp(-hi);
    for (Eigen::Index s = 0; s < psi.cols(); ++s)
      if (s != k) sum += std::exp(psi(r, s) - hi);
    c[r] = hi + std::log(sum);
  }
  return c;
}

Eigen::VectorXd draw_from_prior(const Eigen::VectorXd& m0, const PriorSpec& priors, Rng& rng) {
  const double sd = std::sqrt(priors.variance);
  Eigen::VectorXd out(m0.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = m0[k] + sd * rng.normal();
  return out;
}

// Sequential update of every destination slot of one from-state.
void sweep_from_state(const FromStateBlock& block, CoefficientState& coeffs, const DesignLayout& layout,
                      const StateAlphabet& alphabet, const PriorSpec& priors, Rng& rng) {
  const std::size_t i = block.from_state;
  auto& beta = coeffs.beta[i];
  const std::size_t slots = alphabet.n_slots();
  if (block.x.rows() == 0) {
    for (std::size_t k = 0; k < slots; ++k)
      beta.col(static_cast<Eigen::Index>(k)) = draw_from_prior(prior_mean(layout, coeffs, i, k), priors, rng);
    return;
  }
  Eigen::MatrixXd psi = block.x * beta;
  Eigen::VectorXd omega(block.x.rows());
  for (std::size_t k = 0; k < slots; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd c = offsets_from_psi(psi, k);
    for (Eigen::Index r = 0; r < omega.size(); ++r) omega[r] = draw_pg1(psi(r, kk) - c[r], rng);
    const auto cond = beta_conditional(block, c, omega, prior_mean(layout, coeffs, i, k), alphabet, k, priors);
    beta.col(kk) = cond.draw(rng);
    psi.col(kk).noalias() = block.x * beta.col(kk);
  }
}

}  // namespace

Eigen::VectorXd block_offsets(const FromStateBlock& block, const CoefficientState& coeffs,
                              const StateAlphabet& alphabet, std::size_t slot) {
  if (slot >= alphabet.n_slots()) throw DimensionError("destination slot out of range");
  const Eigen::MatrixXd psi = block.x * coeffs.beta.at(block.from_state);
  return offsets_from_psi(psi, slot);
}

GaussianConditional beta_conditional(const FromStateBlock& block, const Eigen::VectorXd& offsets,
                                     const Eigen::VectorXd& omega, const Eigen::VectorXd& prior_mean,
                                     const StateAlphabet& alphabet, std::size_t slot,
                                     const PriorSpec& priors) {
  const auto n = block.x.rows();
  const auto b = block.x.cols();
  if (offsets.size() != n || omega.size() != n || static_cast<Eigen::Index>(block.destinations.size()) != n)
    throw DimensionError("beta_conditional: row counts disagree");
  if (prior_mean.size() != b) throw DimensionError("beta_conditional: prior mean width mismatch");
  if (!(priors.variance > 0.0)) throw ConfigError("prior variance must be positive");

  const std::size_t target = alphabet.slot_state(slot);
  Eigen::VectorXd z(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double kappa = (block.destinations[static_cast<std::size_t>(r)] == target ? 1.0 : 0.0) - 0.5;
    z[r] = kappa + omega[r] * offsets[r];
  }
  const double prior_precision = 1.0 / priors.variance;
  GaussianConditional cond;
  cond.precision = block.x.transpose() * omega.asDiagonal() * block.x;
  cond.precision.diagonal().array() += prior_precision;
  const Eigen::VectorXd rhs = block.x.transpose() * z + prior_precision * prior_mean;
  cond.factor.compute(cond.precision);
  if (cond.factor.info() != Eigen::Success) throw NumericError("conditional precision is not positive definite");
  cond.mean = cond.factor.solve(rhs);
  return cond;
}

Eigen::VectorXd update_beta(const FromStateBlock& block, const CoefficientState& coeffs,
                            const DesignLayout& layout, const StateAlphabet& alphabet,
                            const PriorSpec& priors, std::size_t slot, Rng& rng) {
  if (static_cast<std::size_t>(block.x.cols()) != layout.width())
    throw DimensionError("block width does not match layout");
  const Eigen::VectorXd m0 = prior_mean(layout, coeffs, block.from_state, slot);
  if (block.x.rows() == 0) return draw_from_prior(m0, priors, rng);
  const Eigen::VectorXd c = block_offsets(block, coeffs, alphabet, slot);
  const Eigen::VectorXd eta = block.x * coeffs.beta[block.from_state].col(static_cast<Eigen::Index>(slot)) - c;
  Eigen::VectorXd omega(eta.size());
  for (Eigen::Index r = 0; r < eta.size(); ++r) omega[r] = draw_pg1(eta[r], rng);
  return beta_conditional(block, c, omega, m0, alphabet, slot, priors).draw(rng);
}

double update_mu(const Eigen::Ref<const Eigen::VectorXd>& zeta, double variance, Rng& rng) {
  const auto h = static_cast<double>(zeta.size());
  return zeta.mean() + std::sqrt(variance / h) * rng.normal();
}

std::size_t PosteriorChain::beta_index(std::size_t from_state, std::size_t slot, std::size_t column) const {
  return (from_state * alphabet.n_slots() + slot) * layout.width() + column;
}

std::size_t PosteriorChain::mu_index(std::size_t from_state, std::size_t slot) const {
  return alphabet.size() * alphabet.n_slots() * layout.width() + from_state * alphabet.n_slots() + slot;
}

std::vector<std::string> PosteriorChain::parameter_names() const {
  std::vector<std::string> names;
  const auto columns = layout.column_names();
  for (std::size_t i = 0; i < alphabet.size(); ++i)
    for (std::size_t k = 0; k < alphabet.n_slots(); ++k)
      for (const auto& c : columns)
        names.push_back("beta[" + alphabet.label(i) + "->" + alphabet.label(alphabet.slot_state(k)) + "][" + c + "]");
  for (std::size_t i = 0; i < alphabet.size(); ++i)
    for (std::size_t k = 0; k < alphabet.n_slots(); ++k)
      names.push_back("mu[" + alphabet.label(i) + "->" + alphabet.label(alphabet.slot_state(k)) + "]");
  return names;
}

CoefficientState PosteriorChain::state(std::size_t draw) const {
  const auto row = draws.row(static_cast<Eigen::Index>(draw));
  return CoefficientState::unflatten(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                     alphabet.size(), layout.width());
}

PosteriorChain run_chain(const FitData& data, const PriorSpec& priors, const SamplerConfig& config,
                         const ImputationSet* imputations, std::size_t chain_index) {
  config.validate();
  data.validate();
  if (!(priors.variance > 0.0)) throw ConfigError("prior variance must be positive");
  if (imputations != nullptr) {
    if (imputations->size() == 0) throw ConfigError("empty imputation set");
    for (const auto& d : imputations->datasets)
      if (d.size() != data.n_rows()) throw DimensionError("imputation dataset does not match design rows");
  } else if (data.labels.size() != data.n_rows()) {
    throw ConfigError("no labels supplied for the fit");
  }
  if (data.n_transitions() == 0 && !config.prior_only) throw ConfigError("no transitions in the data");

  const std::size_t j = data.alphabet.size();
  const std::size_t width = data.layout.width();
  const std::size_t h = data.layout.n_habitats();
  const auto hab = static_cast<Eigen::Index>(data.layout.habitat_offset());

  Rng init_rng = Rng::derive(config.seed, {chain_index, 0});
  Rng select_rng = Rng::derive(config.seed, {chain_index, 1});
  Rng mu_rng = Rng::derive(config.seed, {chain_index, 2});
  std::vector<Rng> block_rngs;
  block_rngs.reserve(j);
  for (std::size_t i = 0; i < j; ++i) block_rngs.push_back(Rng::derive(config.seed, {chain_index, 3 + i}));

  CoefficientState coeffs = CoefficientState::zeros(j, width);
  if (config.random_init)
    for (auto& b : coeffs.beta)
      for (Eigen::Index c = 0; c < b.cols(); ++c)
        for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, c) = init_rng.normal();

  PosteriorChain chain;
  chain.alphabet = data.alphabet;
  chain.layout = data.layout;
  chain.chain_index = chain_index;
  chain.seed = config.seed;
  const std::size_t kept =
      config.iterations > config.burn_in ? (config.iterations - config.burn_in + config.thin - 1) / config.thin : 0;
  chain.draws.resize(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(coeffs.n_parameters()));
  chain.dataset_index.reserve(kept);

  std::vector<FromStateBlock> blocks;
  std::size_t current = std::numeric_limits<std::size_t>::max();
  std::size_t stored = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const std::size_t dataset = imputations != nullptr ? select_dataset(*imputations, select_rng) : 0;
    if (dataset != current) {
      blocks = build_blocks(data, imputations != nullptr ? std::span<const std::size_t>(imputations->datasets[dataset])
                                                         : std::span<const std::size_t>(data.labels));
      current = dataset;
    }

    // From-states touch disjoint coefficients and own their streams.
    const auto n_blocks = static_cast<std::ptrdiff_t>(j);
#pragma omp parallel for num_threads(static_cast<int>(config.threads)) schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n_blocks; ++i)
      sweep_from_state(blocks[static_cast<std::size_t>(i)], coeffs, data.layout, data.alphabet, priors,
                       block_rngs[static_cast<std::size_t>(i)]);

    if (h > 0)
      for (std::size_t i = 0; i < j; ++i)
        for (std::size_t k = 0; k < data.alphabet.n_slots(); ++k)
          coeffs.mu(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
              update_mu(coeffs.beta[i].col(static_cast<Eigen::Index>(k)).segment(hab, static_cast<Eigen::Index>(h)),
                        priors.variance, mu_rng);

    if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
      auto row = chain.draws.row(static_cast<Eigen::Index>(stored));
      coeffs.flatten(std::span<double>(row.data(), static_cast<std::size_t>(row.size())));
      chain.dataset_index.push_back(dataset);
      ++stored;
    }
  }
  return chain;
}

std::vector<PosteriorChain> run_chains(const FitData& data, const PriorSpec& priors, const SamplerConfig& config,
                                       const ImputationSet* imputations) {
  std::vector<PosteriorChain> chains;
  chains.reserve(config.chains);
  for (std::size_t c = 0; c < config.chains; ++c) chains.push_back(run_chain(data, priors, config, imputations, c));
  return chains;
}

}  // namespace markovpg

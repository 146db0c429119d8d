#include "markovpg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "markovpg/errors.hpp"

namespace markovpg {

StateAlphabet::StateAlphabet(std::vector<std::string> labels, std::optional<std::size_t> reference)
    : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw ConfigError("state alphabet needs at least 2 labels");
  std::set<std::string> seen(labels_.begin(), labels_.end());
  if (seen.size() != labels_.size()) throw ConfigError("state labels must be unique");
  reference_ = reference.value_or(labels_.size() - 1);
  if (reference_ >= labels_.size()) throw ConfigError("reference state index out of range");
}

std::optional<std::size_t> StateAlphabet::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::optional<std::size_t> StateAlphabet::state_slot(std::size_t state) const {
  if (state == reference_ || state >= labels_.size()) return std::nullopt;
  return state < reference_ ? state : state - 1;
}

DesignLayout::Block DesignLayout::block_of(std::size_t column) const {
  if (column < habitat_offset()) return Block::kIndividual;
  if (column < quantitative_offset()) return Block::kHabitat;
  return Block::kQuantitative;
}

std::vector<std::string> DesignLayout::column_names() const {
  std::vector<std::string> names;
  names.reserve(width());
  for (std::size_t n = 0; n < individual_columns(); ++n) names.push_back("individual:" + individuals[n]);
  for (const auto& h : habitats) names.push_back("habitat:" + h);
  for (const auto& q : quantitative) names.push_back(q);
  return names;
}

Eigen::VectorXd DesignLayout::encode(std::size_t individual, std::size_t habitat,
                                     std::span<const double> quantitative_values) const {
  if (individual >= n_individuals()) throw DimensionError("individual index out of range");
  if (n_habitats() > 0 && habitat >= n_habitats()) throw DimensionError("habitat index out of range");
  if (quantitative_values.size() != n_quantitative())
    throw DimensionError("expected " + std::to_string(n_quantitative()) + " quantitative values, got " +
                         std::to_string(quantitative_values.size()));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width()));
  const std::size_t ind_cols = individual_columns();
  if (ind_cols > 0) {
    if (individual < ind_cols) {
      x[static_cast<Eigen::Index>(individual)] = 1.0;
    } else {
      x.head(static_cast<Eigen::Index>(ind_cols)).setConstant(-1.0);
    }
  }
  if (n_habitats() > 0) x[static_cast<Eigen::Index>(habitat_offset() + habitat)] = 1.0;
  for (std::size_t q = 0; q < quantitative_values.size(); ++q)
    x[static_cast<Eigen::Index>(quantitative_offset() + q)] = quantitative_values[q];
  return x;
}

CoefficientState CoefficientState::zeros(std::size_t n_states, std::size_t width) {
  CoefficientState s;
  const auto b = static_cast<Eigen::Index>(width);
  const auto slots = static_cast<Eigen::Index>(n_states - 1);
  s.beta.assign(n_states, Eigen::MatrixXd::Zero(b, slots));
  s.mu = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_states), slots);
  return s;
}

std::size_t CoefficientState::n_parameters() const {
  const std::size_t j = n_states();
  return j * (j - 1) * width() + j * (j - 1);
}

void CoefficientState::flatten(std::span<double> out) const {
  if (out.size() != n_parameters()) throw DimensionError("flatten: output span has wrong size");
  std::size_t p = 0;
  for (const auto& b : beta)
    for (Eigen::Index k = 0; k < b.cols(); ++k)
      for (Eigen::Index r = 0; r < b.rows(); ++r) out[p++] = b(r, k);
  for (Eigen::Index i = 0; i < mu.rows(); ++i)
    for (Eigen::Index k = 0; k < mu.cols(); ++k) out[p++] = mu(i, k);
}

CoefficientState CoefficientState::unflatten(std::span<const double> in, std::size_t n_states,
                                             std::size_t width) {
  CoefficientState s = zeros(n_states, width);
  if (in.size() != s.n_parameters()) throw DimensionError("unflatten: input span has wrong size");
  std::size_t p = 0;
  for (auto& b : s.beta)
    for (Eigen::Index k = 0; k < b.cols(); ++k)
      for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, k) = in[p++];
  for (Eigen::Index i = 0; i < s.mu.rows(); ++i)
    for (Eigen::Index k = 0; k < s.mu.cols(); ++k) s.mu(i, k) = in[p++];
  return s;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd linear_predictors(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const CoefficientState& coeffs, const StateAlphabet& alphabet,
                                  std::size_t from_state) {
  if (from_state >= coeffs.n_states() || coeffs.n_states() != alphabet.size())
    throw DimensionError("from-state out of range for coefficient state");
  const auto& b = coeffs.beta[from_state];
  if (x.size() != b.rows())
    throw DimensionError("design row width " + std::to_string(x.size()) + " does not match coefficient width " +
                         std::to_string(b.rows()));
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(alphabet.size()));
  const Eigen::VectorXd slot_psi = b.transpose() * x;
  for (std::size_t k = 0; k < alphabet.n_slots(); ++k)
    psi[static_cast<Eigen::Index>(alphabet.slot_state(k))] = slot_psi[static_cast<Eigen::Index>(k)];
  return psi;
}

Eigen::VectorXd transition_row(const Eigen::Ref<const Eigen::VectorXd>& psi) {
  if (!psi.allFinite()) throw NumericError("transition_row: non-finite linear predictor");
  const double hi = psi.maxCoeff();
  Eigen::VectorXd p = (psi.array() - hi).exp();
  p /= p.sum();
  return p;
}

double offset_c(const Eigen::Ref<const Eigen::VectorXd>& psi, std::size_t target) {
  if (static_cast<Eigen::Index>(target) >= psi.size()) throw DimensionError("offset_c: target out of range");
  if (!psi.allFinite()) throw NumericError("offset_c: non-finite linear predictor");
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < psi.size(); ++k)
    if (k != static_cast<Eigen::Index>(target)) hi = std::max(hi, psi[k]);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < psi.size(); ++k)
    if (k != static_cast<Eigen::Index>(target)) sum += std::exp(psi[k] - hi);
  return hi + std::log(sum);
}

TransitionCounts transition_counts(std::span<const BehaviorSequence> sequences, std::size_t n_states) {
  TransitionCounts out;
  const auto j = static_cast<Eigen::Index>(n_states);
  out.pooled = Eigen::MatrixXi::Zero(j, j);
  for (const auto& seq : sequences) {
    auto it = std::find(out.individuals.begin(), out.individuals.end(), seq.individual_id);
    std::size_t slot = static_cast<std::size_t>(it - out.individuals.begin());
    if (it == out.individuals.end()) {
      out.individuals.push_back(seq.individual_id);
      out.per_individual.push_back(Eigen::MatrixXi::Zero(j, j));
    }
    auto& m = out.per_individual[slot];
    for (std::size_t t = 1; t < seq.states.size(); ++t) {
      const auto from = static_cast<Eigen::Index>(seq.states[t - 1]);
      const auto to = static_cast<Eigen::Index>(seq.states[t]);
      if (from >= j || to >= j) throw DimensionError("state index out of range in sequence " + seq.individual_id);
      ++m(from, to);
      ++out.pooled(from, to);
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> split_on_gaps(std::span<const std::int64_t> timestamps,
                                                               std::int64_t step, double gap_factor) {
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  if (timestamps.empty()) return segments;
  const double limit = gap_factor * static_cast<double>(step);
  std::size_t begin = 0;
  for (std::size_t t = 1; t < timestamps.size(); ++t) {
    if (static_cast<double>(timestamps[t] - timestamps[t - 1]) > limit) {
      segments.emplace_back(begin, t);
      begin = t;
    }
  }
  segments.emplace_back(begin, timestamps.size());
  return segments;
}

std::pair<double, double> diurnal_pair(double seconds) {
  const double angle = 2.0 * std::numbers::pi * seconds / 86400.0;
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace markovpg

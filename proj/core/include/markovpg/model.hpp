#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace markovpg {

// Ordered behavior labels. Transitions into the reference state carry
// identically zero coefficients; the remaining J - 1 states are the
// "destination slots" that own coefficient vectors.
class StateAlphabet {
 public:
  StateAlphabet() = default;
  // Reference defaults to the last label.
  explicit StateAlphabet(std::vector<std::string> labels,
                         std::optional<std::size_t> reference = std::nullopt);

  std::size_t size() const { return labels_.size(); }
  std::size_t reference() const { return reference_; }
  std::size_t n_slots() const { return labels_.size() - 1; }
  const std::string& label(std::size_t state) const { return labels_.at(state); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(const std::string& label) const;

  // State index owning destination slot k.
  std::size_t slot_state(std::size_t slot) const { return slot < reference_ ? slot : slot + 1; }
  // Slot of a destination state; empty for the reference state.
  std::optional<std::size_t> state_slot(std::size_t state) const;

  bool operator==(const StateAlphabet&) const = default;

 private:
  std::vector<std::string> labels_;
  std::size_t reference_ = 0;
};

// Column layout of a design row: [individual (N-1) | habitat (H) | quantitative (Q)].
// Individuals use sum-to-zero coding: individual n < N-1 has a 1 in column n,
// the last individual has -1 in every individual column.
struct DesignLayout {
  std::vector<std::string> individuals;
  std::vector<std::string> habitats;
  std::vector<std::string> quantitative;

  std::size_t n_individuals() const { return individuals.size(); }
  std::size_t n_habitats() const { return habitats.size(); }
  std::size_t n_quantitative() const { return quantitative.size(); }
  std::size_t individual_columns() const { return individuals.empty() ? 0 : individuals.size() - 1; }
  std::size_t habitat_offset() const { return individual_columns(); }
  std::size_t quantitative_offset() const { return individual_columns() + habitats.size(); }
  std::size_t width() const { return quantitative_offset() + quantitative.size(); }

  enum class Block { kIndividual, kHabitat, kQuantitative };
  Block block_of(std::size_t column) const;
  std::vector<std::string> column_names() const;

  // Throws DimensionError on out-of-range indices or a wrong number of quantitative values.
  Eigen::VectorXd encode(std::size_t individual, std::size_t habitat,
                         std::span<const double> quantitative_values) const;

  bool operator==(const DesignLayout&) const = default;
};

struct BehaviorSequence {
  std::string individual_id;
  std::int64_t t0 = 0;
  std::int64_t step = 360;
  std::vector<std::size_t> states;
};

struct DesignRow {
  std::size_t individual = 0;
  std::int64_t time = 0;
  Eigen::VectorXd x;
};

// One MCMC state. beta[i] is B x (J-1); column k holds the coefficients for
// the transition from state i to alphabet.slot_state(k). mu(i, k) is the
// common mean of the habitat block of that column.
struct CoefficientState {
  std::vector<Eigen::MatrixXd> beta;
  Eigen::MatrixXd mu;

  static CoefficientState zeros(std::size_t n_states, std::size_t width);

  std::size_t n_states() const { return beta.size(); }
  std::size_t width() const { return beta.empty() ? 0 : static_cast<std::size_t>(beta.front().rows()); }
  // Number of scalars in flatten().
  std::size_t n_parameters() const;
  // beta blocks (i, k, b) in lexicographic order, then mu (i, k).
  void flatten(std::span<double> out) const;
  static CoefficientState unflatten(std::span<const double> in, std::size_t n_states, std::size_t width);
};

double logistic(double x);

// psi_i. over all J destinations: x' beta_ik for slots, 0 at the reference state.
Eigen::VectorXd linear_predictors(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const CoefficientState& coeffs, const StateAlphabet& alphabet,
                                  std::size_t from_state);

// Softmax with max subtraction. Throws NumericError on non-finite input.
Eigen::VectorXd transition_row(const Eigen::Ref<const Eigen::VectorXd>& psi);

// log sum_{k != target} exp(psi_k), shifted for stability.
double offset_c(const Eigen::Ref<const Eigen::VectorXd>& psi, std::size_t target);

struct TransitionCounts {
  std::vector<std::string> individuals;
  std::vector<Eigen::MatrixXi> per_individual;
  Eigen::MatrixXi pooled;
};

// Counts (t-1, t) state pairs. Sequences sharing an individual_id are pooled
// into that individual's matrix.
TransitionCounts transition_counts(std::span<const BehaviorSequence> sequences, std::size_t n_states);

// Splits a sorted timestamp series wherever consecutive fixes are more than
// gap_factor * step apart. Returns [begin, end) index pairs.
std::vector<std::pair<std::size_t, std::size_t>> split_on_gaps(std::span<const std::int64_t> timestamps,
                                                               std::int64_t step,
                                                               double gap_factor = 1.5);

// (cos, sin) of 2 pi s / 86400 for local solar seconds s.
std::pair<double, double> diurnal_pair(double seconds);

}  // namespace markovpg

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "markovpg/rng.hpp"

namespace markovpg {

// Classifier output for one individual: one probability row per fix.
struct ClassificationProbs {
  std::string individual_id;
  std::vector<std::int64_t> timestamps;
  Eigen::MatrixXd probs;  // fixes x J

  // Throws ValidationError naming the first row that is not a probability vector.
  void validate(double tolerance = 1e-6) const;
};

// M complete labellings of the concatenated fix schedule of a collection of
// ClassificationProbs (individuals in collection order, fixes in row order).
struct ImputationSet {
  std::vector<std::string> individuals;
  std::vector<std::size_t> offsets;  // first fix of each individual; size N + 1
  std::vector<std::vector<std::size_t>> datasets;

  std::size_t size() const { return datasets.size(); }
  std::size_t n_fixes() const { return offsets.empty() ? 0 : offsets.back(); }
};

// Draws M datasets by independent categorical sampling of every fix.
// Individuals use streams derived from `seed`, so the result does not depend
// on thread count.
ImputationSet draw_imputations(std::span<const ClassificationProbs> probs, std::size_t m,
                               std::uint64_t seed, std::size_t threads = 1);

// Uniform index in [0, M).
std::size_t select_dataset(const ImputationSet& set, Rng& rng);

// Per-fix argmax; ties go to the lowest state index.
std::vector<std::size_t> argmax_labels(std::span<const ClassificationProbs> probs);

}  // namespace markovpg

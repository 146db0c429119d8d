#include "markovpg/imputation.hpp"

#include <cmath>
#include <string>

#include "markovpg/errors.hpp"

namespace markovpg {

void ClassificationProbs::validate(double tolerance) const {
  if (static_cast<std::size_t>(probs.rows()) != timestamps.size())
    throw ValidationError(individual_id, "probability rows do not match timestamps");
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const std::string where = individual_id + " row " + std::to_string(r);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double p = probs(r, j);
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw ValidationError(where, "probability outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance)
      throw ValidationError(where, "probabilities sum to " + std::to_string(sum) + ", not 1");
  }
}

namespace {

std::size_t draw_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p, Rng& rng) {
  // Normalize by the row total so rows summing to 1 +/- tolerance stay unbiased.
  const double u = rng.uniform() * p.sum();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(j);
    acc += p[j];
    if (u < acc) return static_cast<std::size_t>(j);
  }
  return last_positive;
}

}  // namespace

ImputationSet draw_imputations(std::span<const ClassificationProbs> probs, std::size_t m,
                               std::uint64_t seed, std::size_t threads) {
  if (m < 1) throw ConfigError("number of imputations must be >= 1");
  ImputationSet set;
  set.offsets.push_back(0);
  for (const auto& p : probs) {
    p.validate();
    set.individuals.push_back(p.individual_id);
    set.offsets.push_back(set.offsets.back() + static_cast<std::size_t>(p.probs.rows()));
  }
  set.datasets.assign(m, std::vector<std::size_t>(set.n_fixes()));

  const auto n = static_cast<std::ptrdiff_t>(probs.size());
#pragma omp parallel for num_threads(static_cast<int>(threads)) schedule(dynamic)
  for (std::ptrdiff_t idx = 0; idx < n; ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    Rng rng = Rng::derive(seed, {0x1397ull, i});
    const auto& p = probs[i];
    for (std::size_t d = 0; d < m; ++d) {
      auto& labels = set.datasets[d];
      for (Eigen::Index r = 0; r < p.probs.rows(); ++r)
        labels[set.offsets[i] + static_cast<std::size_t>(r)] = draw_categorical(p.probs.row(r), rng);
    }
  }
  return set;
}

std::size_t select_dataset(const ImputationSet& set, Rng& rng) {
  if (set.size() == 0) throw ConfigError("empty imputation set");
  if (set.size() == 1) return 0;
  return rng.index(set.size());
}

std::vector<std::size_t> argmax_labels(std::span<const ClassificationProbs> probs) {
  std::vector<std::size_t> labels;
  for (const auto& p : probs) {
    p.validate();
    for (Eigen::Index r = 0; r < p.probs.rows(); ++r) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < p.probs.cols(); ++j)
        if (p.probs(r, j) > p.probs(r, best)) best = j;
      labels.push_back(static_cast<std::size_t>(best));
    }
  }
  return labels;
}

}  // namespace markovpg

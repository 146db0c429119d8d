#include "markovpg/simulate.hpp"

#include <cmath>
#include <string>

#include "markovpg/errors.hpp"

namespace markovpg {

SimScenario make_scenario(const ScenarioSpec& spec) {
  if (spec.n_states < 2) throw ConfigError("scenario needs at least 2 states");
  if (spec.n_individuals < 1) throw ConfigError("scenario needs at least 1 individual");
  if (spec.steps < 1) throw ConfigError("scenario needs at least 1 step");
  if (spec.step_seconds <= 0) throw ConfigError("step duration must be positive");
  if (spec.habitat_stay < 0.0 || spec.habitat_stay > 1.0) throw ConfigError("habitat stay probability outside [0, 1]");

  SimScenario sc;
  sc.spec = spec;
  Rng rng = Rng::derive(spec.seed, {0x5157ull});

  std::vector<std::string> states;
  for (std::size_t s = 0; s < spec.n_states; ++s) states.push_back("s" + std::to_string(s + 1));
  sc.data.alphabet = StateAlphabet(states);
  auto& layout = sc.data.layout;
  for (std::size_t n = 0; n < spec.n_individuals; ++n) layout.individuals.push_back("ind" + std::to_string(n + 1));
  for (std::size_t h = 0; h < spec.n_habitats; ++h) layout.habitats.push_back("hab" + std::to_string(h + 1));
  for (std::size_t q = 0; q < spec.n_noise_covariates; ++q) layout.quantitative.push_back("x" + std::to_string(q + 1));
  if (spec.diurnal) {
    layout.quantitative.emplace_back("cos_time");
    layout.quantitative.emplace_back("sin_time");
  }

  const std::size_t fixes = spec.steps + 1;
  const std::size_t rows = fixes * spec.n_individuals;
  sc.habitat.resize(rows);
  sc.data.timestamps.resize(rows);
  sc.noise.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec.n_noise_covariates));
  for (std::size_t n = 0; n < spec.n_individuals; ++n) {
    sc.data.segments.push_back({n, n * fixes, fixes});
    std::size_t hab = spec.n_habitats > 0 ? rng.index(spec.n_habitats) : 0;
    for (std::size_t t = 0; t < fixes; ++t) {
      const std::size_t r = n * fixes + t;
      if (t > 0 && spec.n_habitats > 1 && rng.uniform() >= spec.habitat_stay) {
        // Move to one of the other habitats.
        std::size_t next = rng.index(spec.n_habitats - 1);
        hab = next >= hab ? next + 1 : next;
      }
      sc.habitat[r] = hab;
      sc.data.timestamps[r] = spec.start_time + static_cast<std::int64_t>(t) * spec.step_seconds;
      for (std::size_t q = 0; q < spec.n_noise_covariates; ++q)
        sc.noise(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = rng.normal();
    }
  }
  // Standardize with the sample sd so ingestion re-standardizes to the same values.
  for (Eigen::Index q = 0; q < sc.noise.cols(); ++q) {
    auto col = sc.noise.col(q);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = rows > 1 ? std::sqrt(col.squaredNorm() / static_cast<double>(rows - 1)) : 1.0;
    if (sd > 0.0) col /= sd;
  }

  sc.data.design.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(layout.width()));
  std::vector<double> quant(layout.n_quantitative());
  for (std::size_t n = 0; n < spec.n_individuals; ++n) {
    for (std::size_t t = 0; t < fixes; ++t) {
      const std::size_t r = n * fixes + t;
      for (std::size_t q = 0; q < spec.n_noise_covariates; ++q)
        quant[q] = sc.noise(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q));
      if (spec.diurnal) {
        const auto seconds = static_cast<double>(((sc.data.timestamps[r] % 86400) + 86400) % 86400);
        const auto [c, s] = diurnal_pair(seconds);
        quant[spec.n_noise_covariates] = c;
        quant[spec.n_noise_covariates + 1] = s;
      }
      sc.data.design.row(static_cast<Eigen::Index>(r)) = layout.encode(n, sc.habitat[r], quant).transpose();
    }
  }

  if (spec.truth) {
    if (spec.truth->n_states() != spec.n_states || spec.truth->width() != layout.width())
      throw ConfigError("explicit truth does not match the scenario dimensions");
    sc.truth = *spec.truth;
  } else {
    sc.truth = CoefficientState::zeros(spec.n_states, layout.width());
    for (auto& b : sc.truth.beta)
      for (Eigen::Index k = 0; k < b.cols(); ++k)
        for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, k) = spec.coefficient_range * (2.0 * rng.uniform() - 1.0);
    if (layout.n_habitats() > 0)
      for (std::size_t i = 0; i < spec.n_states; ++i)
        for (std::size_t k = 0; k + 1 < spec.n_states; ++k)
          sc.truth.mu(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
              sc.truth.beta[i]
                  .col(static_cast<Eigen::Index>(k))
                  .segment(static_cast<Eigen::Index>(layout.habitat_offset()),
                           static_cast<Eigen::Index>(layout.n_habitats()))
                  .mean();
  }
  return sc;
}

std::vector<std::size_t> forward_simulate(const FitData& data, const CoefficientState& coeffs,
                                          std::span<const std::size_t> initial_states, Rng& rng) {
  if (initial_states.size() != data.segments.size())
    throw DimensionError("need one initial state per segment");
  if (coeffs.n_states() != data.alphabet.size() || coeffs.width() != data.layout.width())
    throw DimensionError("coefficients do not match the data layout");
  std::vector<std::size_t> labels(data.n_rows());
  for (std::size_t s = 0; s < data.segments.size(); ++s) {
    const auto& seg = data.segments[s];
    if (seg.first_row + seg.length > data.n_rows())
      throw DimensionError("covariate rows do not cover the prediction horizon");
    if (seg.length == 0) continue;
    if (initial_states[s] >= data.alphabet.size()) throw DimensionError("initial state out of range");
    labels[seg.first_row] = initial_states[s];
    for (std::size_t r = seg.first_row + 1; r < seg.first_row + seg.length; ++r) {
      const Eigen::VectorXd p = transition_row(
          linear_predictors(data.design.row(static_cast<Eigen::Index>(r)).transpose(), coeffs, data.alphabet,
                            labels[r - 1]));
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t next = static_cast<std::size_t>(p.size() - 1);
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        acc += p[j];
        if (u < acc) {
          next = static_cast<std::size_t>(j);
          break;
        }
      }
      labels[r] = next;
    }
  }
  return labels;
}

FitData simulate_sequences(const SimScenario& scenario, Rng& rng) {
  FitData out = scenario.data;
  std::vector<std::size_t> initial(out.segments.size());
  for (auto& s : initial) s = rng.index(out.alphabet.size());
  out.labels = forward_simulate(out, scenario.truth, initial, rng);
  return out;
}

std::vector<BehaviorSequence> to_sequences(const FitData& data) {
  std::vector<BehaviorSequence> seqs;
  for (const auto& seg : data.segments) {
    BehaviorSequence s;
    s.individual_id = data.layout.individuals.at(seg.individual);
    if (!data.timestamps.empty() && seg.length > 0) {
      s.t0 = data.timestamps[seg.first_row];
      if (seg.length > 1) s.step = data.timestamps[seg.first_row + 1] - data.timestamps[seg.first_row];
    }
    s.states.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(seg.first_row),
                    data.labels.begin() + static_cast<std::ptrdiff_t>(seg.first_row + seg.length));
    seqs.push_back(std::move(s));
  }
  return seqs;
}

std::vector<double> individual_effects(const Eigen::Ref<const Eigen::VectorXd>& column, const DesignLayout& layout) {
  if (static_cast<std::size_t>(column.size()) != layout.width()) throw DimensionError("column width mismatch");
  std::vector<double> effects;
  double sum = 0.0;
  for (std::size_t n = 0; n < layout.individual_columns(); ++n) {
    effects.push_back(column[static_cast<Eigen::Index>(n)]);
    sum += effects.back();
  }
  if (layout.n_individuals() > 0) effects.push_back(-sum);
  return effects;
}

std::vector<ClassificationProbs> simulate_classification(const FitData& data, double min_confidence, Rng& rng) {
  if (data.labels.size() != data.n_rows()) throw ConfigError("simulate_classification needs labelled data");
  const auto j = static_cast<Eigen::Index>(data.alphabet.size());
  std::vector<ClassificationProbs> out(data.layout.n_individuals());
  for (std::size_t n = 0; n < out.size(); ++n) out[n].individual_id = data.layout.individuals[n];
  std::vector<std::vector<Eigen::Index>> rows(out.size());
  for (const auto& seg : data.segments)
    for (std::size_t r = seg.first_row; r < seg.first_row + seg.length; ++r)
      rows[seg.individual].push_back(static_cast<Eigen::Index>(r));
  for (std::size_t n = 0; n < out.size(); ++n) {
    auto& cp = out[n];
    cp.probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows[n].size()), j);
    for (std::size_t t = 0; t < rows[n].size(); ++t) {
      const auto r = static_cast<std::size_t>(rows[n][t]);
      cp.timestamps.push_back(data.timestamps.empty() ? static_cast<std::int64_t>(t) : data.timestamps[r]);
      const double confident = min_confidence + (1.0 - min_confidence) * rng.uniform();
      Eigen::VectorXd rest(j);
      for (Eigen::Index k = 0; k < j; ++k) rest[k] = rng.exponential();
      rest[static_cast<Eigen::Index>(data.labels[r])] = 0.0;
      rest *= (1.0 - confident) / rest.sum();
      rest[static_cast<Eigen::Index>(data.labels[r])] = confident;
      cp.probs.row(static_cast<Eigen::Index>(t)) = rest.transpose();
    }
  }
  return out;
}

}  // namespace markovpg

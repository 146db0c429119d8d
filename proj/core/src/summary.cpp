#include "markovpg/summary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "markovpg/errors.hpp"
#include "markovpg/simulate.hpp"

namespace markovpg {

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  if (p < 0.0 || p > 1.0) throw ParameterError("quantile level outside [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

DrawMatrix pooled_draws(std::span<const PosteriorChain> chains) {
  if (chains.empty()) throw ConfigError("no chains to pool");
  Eigen::Index rows = 0;
  for (const auto& c : chains) {
    if (!(c.alphabet == chains.front().alphabet) || !(c.layout == chains.front().layout))
      throw DimensionError("chains have different model layouts");
    rows += c.draws.rows();
  }
  DrawMatrix out(rows, chains.front().draws.cols());
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    out.middleRows(at, c.draws.rows()) = c.draws;
    at += c.draws.rows();
  }
  return out;
}

DrawMatrix odds_ratios(const PosteriorChain& chain) {
  if (chain.n_draws() == 0) throw ConfigError("odds ratios of an empty chain");
  const auto n_beta = static_cast<Eigen::Index>(chain.alphabet.size() * chain.alphabet.n_slots() * chain.layout.width());
  return chain.draws.leftCols(n_beta).array().exp();
}

const char* to_string(Significance s) {
  switch (s) {
    case Significance::kPositive: return "positive";
    case Significance::kNegative: return "negative";
    case Significance::kNone: break;
  }
  return "none";
}

SignificanceResult significance(std::span<const double> beta_draws) {
  if (beta_draws.empty()) throw ConfigError("significance of an empty sample");
  std::vector<double> ors(beta_draws.size());
  std::size_t above = 0;
  for (std::size_t d = 0; d < beta_draws.size(); ++d) {
    ors[d] = std::exp(beta_draws[d]);
    if (ors[d] > 1.0) ++above;
  }
  SignificanceResult r;
  r.proportion = static_cast<double>(above) / static_cast<double>(ors.size());
  r.or_lower = quantile(ors, 0.025);
  r.or_upper = quantile(ors, 0.975);
  const bool excludes_one = r.or_lower > 1.0 || r.or_upper < 1.0;
  if (excludes_one && r.proportion > 0.95) r.call = Significance::kPositive;
  if (excludes_one && r.proportion < 0.05) r.call = Significance::kNegative;
  return r;
}

std::vector<CoefficientSummary> summarize(std::span<const PosteriorChain> chains) {
  const DrawMatrix draws = pooled_draws(chains);
  if (draws.rows() == 0) throw ConfigError("cannot summarize an empty chain");
  const auto& ref = chains.front();
  const auto names = ref.layout.column_names();
  std::vector<CoefficientSummary> rows;
  std::vector<double> col(static_cast<std::size_t>(draws.rows()));
  for (std::size_t i = 0; i < ref.alphabet.size(); ++i) {
    for (std::size_t k = 0; k < ref.alphabet.n_slots(); ++k) {
      for (std::size_t b = 0; b < ref.layout.width(); ++b) {
        const auto p = static_cast<Eigen::Index>(ref.beta_index(i, k, b));
        for (Eigen::Index d = 0; d < draws.rows(); ++d) col[static_cast<std::size_t>(d)] = draws(d, p);
        CoefficientSummary s;
        s.from_state = i;
        s.to_state = ref.alphabet.slot_state(k);
        s.column = b;
        s.block = ref.layout.block_of(b);
        s.covariate = names[b];
        s.mean = draws.col(p).mean();
        s.lower = quantile(col, 0.025);
        s.upper = quantile(col, 0.975);
        s.or_mean = draws.col(p).array().exp().mean();
        const auto sig = significance(col);
        s.or_lower = sig.or_lower;
        s.or_upper = sig.or_upper;
        s.prop_or_gt1 = sig.proportion;
        if (s.block == DesignLayout::Block::kQuantitative) s.call = sig.call;
        rows.push_back(std::move(s));
      }
    }
  }
  return rows;
}

Significance PairwiseMatrix::call(std::size_t a, std::size_t b) const {
  if (a == b) return Significance::kNone;
  const double p = proportion(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  if (p > 0.95) return Significance::kPositive;
  if (p < 0.05) return Significance::kNegative;
  return Significance::kNone;
}

PairwiseMatrix pairwise_habitat(std::span<const PosteriorChain> chains, std::size_t from_state, std::size_t slot) {
  const DrawMatrix draws = pooled_draws(chains);
  const auto& ref = chains.front();
  const std::size_t h = ref.layout.n_habitats();
  if (h < 2) throw ConfigError("pairwise habitat comparison needs at least 2 habitats");
  if (draws.rows() == 0) throw ConfigError("pairwise comparison of an empty chain");
  PairwiseMatrix m;
  m.from_state = from_state;
  m.to_state = ref.alphabet.slot_state(slot);
  const auto hh = static_cast<Eigen::Index>(h);
  m.proportion = Eigen::MatrixXd::Constant(hh, hh, std::numeric_limits<double>::quiet_NaN());
  const double n = static_cast<double>(draws.rows());
  for (std::size_t a = 0; a < h; ++a) {
    const auto ca = static_cast<Eigen::Index>(ref.beta_index(from_state, slot, ref.layout.habitat_offset() + a));
    for (std::size_t b = a + 1; b < h; ++b) {
      const auto cb = static_cast<Eigen::Index>(ref.beta_index(from_state, slot, ref.layout.habitat_offset() + b));
      // Count in half-units so ties split evenly.
      std::size_t halves = 0;
      for (Eigen::Index d = 0; d < draws.rows(); ++d) {
        if (draws(d, ca) > draws(d, cb)) halves += 2;
        else if (draws(d, ca) == draws(d, cb)) halves += 1;
      }
      const double p = static_cast<double>(halves) / (2.0 * n);
      m.proportion(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = p;
      m.proportion(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0 - p;
    }
  }
  return m;
}

std::vector<double> potential_scale_reduction(std::span<const PosteriorChain> chains) {
  if (chains.size() < 2) throw ConfigError("potential scale reduction needs at least 2 chains");
  const Eigen::Index n = chains.front().draws.rows();
  if (n < 2) throw ConfigError("potential scale reduction needs at least 2 draws per chain");
  for (const auto& c : chains)
    if (c.draws.rows() != n || c.draws.cols() != chains.front().draws.cols())
      throw DimensionError("chains must have equal shapes");
  const auto m = static_cast<double>(chains.size());
  const auto nd = static_cast<double>(n);
  std::vector<double> out(static_cast<std::size_t>(chains.front().draws.cols()));
  for (Eigen::Index p = 0; p < chains.front().draws.cols(); ++p) {
    std::vector<double> means, vars;
    for (const auto& c : chains) {
      const double mean = c.draws.col(p).mean();
      means.push_back(mean);
      vars.push_back((c.draws.col(p).array() - mean).square().sum() / (nd - 1.0));
    }
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    double between = 0.0;
    for (double mu : means) between += (mu - grand) * (mu - grand);
    between *= nd / (m - 1.0);
    const double within = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
    const double pooled = (nd - 1.0) / nd * within + between / nd;
    out[static_cast<std::size_t>(p)] = within > 0.0 ? std::sqrt(pooled / within) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::vector<std::vector<std::size_t>> posterior_predict(std::span<const CoefficientState> draws, const FitData& data,
                                                        std::span<const std::size_t> initial_states, Rng& rng) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(draws.size());
  for (const auto& coeffs : draws) out.push_back(forward_simulate(data, coeffs, initial_states, rng));
  return out;
}

GofStatistics gof_statistics(const FitData& data, std::span<const std::size_t> labels) {
  if (labels.size() != data.n_rows()) throw DimensionError("labels do not match design rows");
  const auto j = static_cast<Eigen::Index>(data.alphabet.size());
  GofStatistics s;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(j, j);
  s.occupancy = Eigen::VectorXd::Zero(j);
  for (const auto& seg : data.segments) {
    for (std::size_t r = seg.first_row; r < seg.first_row + seg.length; ++r) {
      s.occupancy[static_cast<Eigen::Index>(labels[r])] += 1.0;
      if (r > seg.first_row)
        counts(static_cast<Eigen::Index>(labels[r - 1]), static_cast<Eigen::Index>(labels[r])) += 1.0;
    }
  }
  if (labels.size() > 0) s.occupancy /= static_cast<double>(labels.size());
  s.transition_frequency = counts;
  for (Eigen::Index i = 0; i < j; ++i) {
    const double total = counts.row(i).sum();
    if (total > 0.0) s.transition_frequency.row(i) /= total;
  }
  return s;
}

double chi_square_discrepancy(const FitData& data, std::span<const std::size_t> labels,
                              const CoefficientState& coeffs) {
  if (labels.size() != data.n_rows()) throw DimensionError("labels do not match design rows");
  const auto j = static_cast<Eigen::Index>(data.alphabet.size());
  Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(j, j);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(j, j);
  for (const auto& seg : data.segments) {
    for (std::size_t r = seg.first_row + 1; r < seg.first_row + seg.length; ++r) {
      const std::size_t from = labels[r - 1];
      observed(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(labels[r])) += 1.0;
      expected.row(static_cast<Eigen::Index>(from)) +=
          transition_row(linear_predictors(data.design.row(static_cast<Eigen::Index>(r)).transpose(), coeffs,
                                           data.alphabet, from))
              .transpose();
    }
  }
  double t = 0.0;
  for (Eigen::Index a = 0; a < j; ++a)
    for (Eigen::Index b = 0; b < j; ++b)
      if (expected(a, b) > 0.0) t += (observed(a, b) - expected(a, b)) * (observed(a, b) - expected(a, b)) / expected(a, b);
  return t;
}

bool GofReport::inside_central_band(double level) const {
  const double tail = 0.5 * (1.0 - level);
  return predictive_p_value >= tail && predictive_p_value <= 1.0 - tail;
}

GofReport goodness_of_fit(std::span<const PosteriorChain> chains, const FitData& data,
                          std::span<const std::size_t> labels, std::size_t max_draws, std::uint64_t seed) {
  const DrawMatrix draws = pooled_draws(chains);
  if (draws.rows() == 0) throw ConfigError("goodness of fit needs a non-empty chain");
  if (max_draws == 0) throw ConfigError("goodness of fit needs at least one draw");
  const auto& ref = chains.front();
  std::vector<std::size_t> initial;
  for (const auto& seg : data.segments) initial.push_back(labels[seg.first_row]);

  GofReport report;
  report.observed = gof_statistics(data, labels);
  const auto total = static_cast<std::size_t>(draws.rows());
  const std::size_t used = std::min(max_draws, total);
  Rng rng = Rng::derive(seed, {0x60full});
  std::size_t exceed = 0;
  for (std::size_t u = 0; u < used; ++u) {
    const std::size_t d = used == 1 ? total - 1 : u * (total - 1) / (used - 1);
    const auto row = draws.row(static_cast<Eigen::Index>(d));
    const CoefficientState coeffs = CoefficientState::unflatten(
        std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), ref.alphabet.size(),
        ref.layout.width());
    const auto rep = forward_simulate(data, coeffs, initial, rng);
    report.draw_index.push_back(d);
    report.replicates.push_back(gof_statistics(data, rep));
    report.observed_discrepancy.push_back(chi_square_discrepancy(data, labels, coeffs));
    report.replicate_discrepancy.push_back(chi_square_discrepancy(data, rep, coeffs));
    if (report.replicate_discrepancy.back() >= report.observed_discrepancy.back()) ++exceed;
  }
  report.predictive_p_value = static_cast<double>(exceed) / static_cast<double>(used);
  return report;
}

}  // namespace markovpg

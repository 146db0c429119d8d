#pragma once

#include "markovpg/rng.hpp"

namespace markovpg {

// Parameters of the Polya-Gamma distribution PG(b, c).
struct PGParams {
  int b = 1;       // shape; number of aggregated Bernoulli trials
  double c = 0.0;  // tilt; the distribution depends on |c| only
};

// Exact draw from PG(b, c). b > 1 is handled as a sum of b independent
// PG(1, c) draws. Throws ParameterError for b < 1 or non-finite c.
double draw_pg(const PGParams& params, Rng& rng);

// Exact draw from PG(1, c). The hot path of the Gibbs engine.
double draw_pg1(double c, Rng& rng);

// E[PG(b, c)] = b / (2c) * tanh(c / 2), with the c -> 0 limit b / 4.
double pg_mean(const PGParams& params);

// Var[PG(b, c)]; used as an oracle for Monte Carlo standard errors.
double pg_variance(const PGParams& params);

}  // namespace markovpg

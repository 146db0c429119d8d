#include "markovpg/pg_sampler.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "markovpg/errors.hpp"

namespace markovpg {
namespace {

// Crossover between the truncated-exponential (right) and truncated
// inverse-Gaussian (left) proposal regions of the Jacobi sampler.
constexpr double kTrunc = 0.64;
constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;
constexpr double kTinyTilt = 1e-8;

// log Phi(x), stable in the far left tail.
double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic series of the Mills ratio.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) + std::log(series);
}

// Probability p / (p + q) of proposing from the truncated exponential on the
// right of the crossover; q is the inverse-Gaussian mass on the left.
double exponential_mass(double z, double k) {
  const double root_t = std::sqrt(1.0 / kTrunc);
  const double b = root_t * (kTrunc * z - 1.0);
  const double a = -root_t * (kTrunc * z + 1.0);
  if (z < 20.0) {
    const double ez = std::exp(z);
    const double phi_b = 0.5 * std::erfc(-b / std::numbers::sqrt2);
    const double phi_a = 0.5 * std::erfc(-a / std::numbers::sqrt2);
    const double q_over_p = 4.0 / kPi * k * std::exp(k * kTrunc) * (phi_b / ez + phi_a * ez);
    return 1.0 / (1.0 + q_over_p);
  }
  // Log space for large tilts, where exp(k t) overflows.
  const double x0 = std::log(k) + k * kTrunc;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double hi = std::max(xa, xb);
  const double log_q_over_p =
      std::log(4.0 / kPi) + hi + std::log(std::exp(xa - hi) + std::exp(xb - hi));
  return 1.0 / (1.0 + std::exp(log_q_over_p));
}

// Coefficients a_n(x) of the alternating series for the Jacobi density at a
// fixed proposal x. The n-independent factor is computed once per proposal.
class SeriesTerms {
 public:
  explicit SeriesTerms(double x) : x_(x), left_(x <= kTrunc) {
    if (left_) {
      const double y = 0.5 * kPi * x;
      scale_ = x > 0.0 ? 1.0 / (y * std::sqrt(y)) : 0.0;
    }
  }

  double operator()(int n) const {
    const double h = n + 0.5;
    const double k = h * kPi;
    if (!left_) return k * std::exp(-0.5 * k * k * x_);
    if (scale_ == 0.0) return 0.0;
    return k * scale_ * std::exp(-2.0 * h * h / x_);
  }

 private:
  double x_;
  bool left_;
  double scale_ = 0.0;
};

// Inverse-Gaussian IG(mu, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, Rng& rng) {
  if (z < 1.0 / kTrunc) {
    // mu > t: propose from the truncated 1/chi^2_1 and accept with exp(-z^2 x / 2).
    for (;;) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      const double denom = 1.0 + e1 * kTrunc;
      const double x = kTrunc / (denom * denom);
      if (rng.uniform() <= std::exp(-0.5 * z * z * x)) return x;
    }
  }
  const double mu = 1.0 / z;
  for (;;) {
    const double y = rng.normal();
    const double mu_y = mu * y * y;
    const double s = std::sqrt(4.0 * mu_y + mu_y * mu_y);
    // mu + mu/2 (mu_y - s), rearranged to avoid cancellation for large mu_y.
    double x = 4.0 * mu * mu_y / ((s + mu_y) * (s + mu_y));
    if (mu_y == 0.0) x = mu;
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    if (x < kTrunc && x > 0.0) return x;
  }
}

}  // namespace

double draw_pg1(double c, Rng& rng) {
  if (!std::isfinite(c)) throw ParameterError("PG tilt must be finite, got " + std::to_string(c));
  // PG(1, c) = J*(1, c/2) / 4.
  const double z = 0.5 * std::abs(c);
  const double k = 0.125 * kPi2 + 0.5 * z * z;
  const double p_exp = exponential_mass(z, k);

  for (;;) {
    const double x = rng.uniform() < p_exp ? kTrunc + rng.exponential() / k
                                           : truncated_inverse_gaussian(z, rng);
    const SeriesTerms term(x);
    double s = term(0);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= term(n);
        if (y <= s) return 0.25 * x;
      } else {
        s += term(n);
        if (y > s) break;
      }
    }
  }
}

namespace {

void check(const PGParams& params) {
  if (params.b < 1) throw ParameterError("PG shape must be >= 1, got " + std::to_string(params.b));
  if (!std::isfinite(params.c)) throw ParameterError("PG tilt must be finite, got " + std::to_string(params.c));
}

}  // namespace

double draw_pg(const PGParams& params, Rng& rng) {
  check(params);
  double total = 0.0;
  for (int i = 0; i < params.b; ++i) total += draw_pg1(params.c, rng);
  return total;
}

double pg_mean(const PGParams& params) {
  check(params);
  const double c = std::abs(params.c);
  if (c < kTinyTilt) return params.b / 4.0;
  return params.b / (2.0 * c) * std::tanh(0.5 * c);
}

double pg_variance(const PGParams& params) {
  check(params);
  const double c = std::abs(params.c);
  if (c < 1e-4) return params.b / 24.0;
  // b / (4 c^3) (sinh(c) - c) sech^2(c/2), divided through by cosh(c) so
  // large tilts do not overflow.
  const double inv_cosh = 1.0 / std::cosh(c);
  return params.b / (2.0 * c * c * c) * (std::tanh(c) - c * inv_cosh) / (1.0 + inv_cosh);
}

}  // namespace markovpg

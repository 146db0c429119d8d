#include <doctest.h>

#include <cmath>

#include "markovpg/errors.hpp"
#include "markovpg/gibbs.hpp"
#include "markovpg/imputation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace markovpg;

TEST_CASE("blocks collect every within-segment transition once") {
  const FitData d = testing::small_scenario_data(3, 120);
  const auto blocks = build_blocks(d, d.labels);
  std::size_t total = 0;
  for (const auto& b : blocks) {
    CHECK(static_cast<std::size_t>(b.x.rows()) == b.destinations.size());
    total += b.destinations.size();
  }
  CHECK(total == d.n_transitions());
  CHECK(d.n_transitions() == d.n_rows() - d.segments.size());
}

TEST_CASE("beta conditional matches the explicit normal-normal update") {
  const FitData d = testing::small_scenario_data(5, 80);
  const auto blocks = build_blocks(d, d.labels);
  const auto& block = blocks[1];
  REQUIRE(block.x.rows() > 5);
  CoefficientState s = CoefficientState::zeros(3, d.layout.width());
  Rng rng(2);
  for (auto& b : s.beta) b = b.unaryExpr([&rng](double) { return 0.3 * rng.normal(); });
  s.mu(1, 0) = 0.7;
  const PriorSpec prior{4.0};
  const std::size_t slot = 0;
  const Eigen::VectorXd c = block_offsets(block, s, d.alphabet, slot);
  Eigen::VectorXd omega(block.x.rows());
  for (Eigen::Index r = 0; r < omega.size(); ++r) omega[r] = 0.1 + 0.01 * static_cast<double>(r % 7);
  const Eigen::VectorXd m0 = prior_mean(d.layout, s, 1, slot);
  const auto cond = beta_conditional(block, c, omega, m0, d.alphabet, slot, prior);

  // loop-by-loop reconstruction
  const auto w = block.x.cols();
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(w, w) / prior.variance;
  Eigen::VectorXd rhs = m0 / prior.variance;
  const std::size_t target = d.alphabet.slot_state(slot);
  for (Eigen::Index r = 0; r < block.x.rows(); ++r) {
    const Eigen::VectorXd x = block.x.row(r).transpose();
    const auto psi = linear_predictors(x, s, d.alphabet, 1);
    CHECK(c[r] == doctest::Approx(offset_c(psi, target)).epsilon(1e-12));
    const double kappa = (block.destinations[static_cast<std::size_t>(r)] == target ? 1.0 : 0.0) - 0.5;
    p += omega[r] * x * x.transpose();
    rhs += x * (kappa + omega[r] * c[r]);
  }
  CHECK((cond.precision - p).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::VectorXd mean = p.ldlt().solve(rhs);
  CHECK((cond.mean - mean).cwiseAbs().maxCoeff() < 1e-9);

  // habitat entries are centred at mu, others at zero
  for (Eigen::Index b = 0; b < m0.size(); ++b)
    CHECK(m0[b] == (d.layout.block_of(static_cast<std::size_t>(b)) == DesignLayout::Block::kHabitat ? 0.7 : 0.0));
}

TEST_CASE("conditional draws have the conditional covariance") {
  GaussianConditional g;
  g.precision.resize(2, 2);
  g.precision << 4.0, 1.0, 1.0, 2.0;
  g.mean = Eigen::Vector2d(1.0, -2.0);
  g.factor.compute(g.precision);
  const Eigen::Matrix2d cov = g.precision.inverse();
  Rng rng(6);
  const int n = 60000;
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  Eigen::Matrix2d ss = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d v = g.draw(rng) - g.mean;
    s += v;
    ss += v * v.transpose();
  }
  CHECK((s / n).norm() < 0.01);
  CHECK(((ss / n) - cov).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("mu update is normal around the mean habitat effect") {
  Eigen::VectorXd zeta(4);
  zeta << 1.0, 2.0, 3.0, 6.0;
  Rng rng(10);
  const int n = 50000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = update_mu(zeta, 100.0, rng);
    s += m;
    s2 += m * m;
  }
  const double mean = s / n;
  CHECK(mean == doctest::Approx(3.0).epsilon(0.02));
  CHECK(s2 / n - mean * mean == doctest::Approx(25.0).epsilon(0.03));
}

TEST_CASE("chains are reproducible and independent of the thread count") {
  const FitData d = testing::small_scenario_data(12, 150);
  SamplerConfig c = testing::short_run(120, 20, 99);
  const auto a = run_chain(d, PriorSpec{}, c);
  const auto b = run_chain(d, PriorSpec{}, c);
  CHECK(a.draws == b.draws);
  c.threads = 3;
  const auto t = run_chain(d, PriorSpec{}, c);
  CHECK(a.draws == t.draws);
  c.seed = 100;
  const auto other = run_chain(d, PriorSpec{}, c);
  CHECK(a.draws != other.draws);
  // different chains of one run use different streams
  const auto second = run_chain(d, PriorSpec{}, testing::short_run(120, 20, 99), nullptr, 1);
  CHECK(a.draws != second.draws);
}

TEST_CASE("burn-in and thinning determine the stored draws") {
  const FitData d = testing::two_state_problem(30, 0.5, -0.5, 4);
  SamplerConfig c = testing::short_run(100, 10);
  c.thin = 7;
  const auto chain = run_chain(d, PriorSpec{}, c);
  CHECK(chain.n_draws() == 13);  // iterations 10, 17, ..., 94
  CHECK(chain.dataset_index.size() == 13);
  CHECK(chain.n_parameters() == 2 * 1 * 1 + 2);

  c.burn_in = 100;
  CHECK(run_chain(d, PriorSpec{}, c).n_draws() == 0);
  c.burn_in = 101;
  CHECK_THROWS_AS(run_chain(d, PriorSpec{}, c), ConfigError);
  c.burn_in = 0;
  c.thin = 0;
  CHECK_THROWS_AS(run_chain(d, PriorSpec{}, c), ConfigError);
}

TEST_CASE("data without transitions is rejected unless sampling the prior") {
  FitData d = testing::two_state_problem(0, 0.0, 0.0, 1);
  CHECK(d.n_transitions() == 0);
  SamplerConfig c = testing::short_run(50, 0);
  CHECK_THROWS_AS(run_chain(d, PriorSpec{}, c), ConfigError);
  c.prior_only = true;
  CHECK(run_chain(d, PriorSpec{}, c).n_draws() == 50);
}

TEST_CASE("malformed inputs are reported") {
  FitData d = testing::two_state_problem(10, 0.0, 0.0, 1);
  SamplerConfig c = testing::short_run(10, 0);
  CHECK_THROWS_AS(run_chain(d, PriorSpec{-1.0}, c), ConfigError);
  FitData bad = d;
  bad.labels[3] = 5;
  CHECK_THROWS_AS(run_chain(bad, PriorSpec{}, c), ValidationError);
  bad = d;
  bad.segments[0].length -= 1;
  CHECK_THROWS_AS(run_chain(bad, PriorSpec{}, c), ValidationError);
  bad = d;
  bad.design.conservativeResize(Eigen::NoChange, 2);
  CHECK_THROWS_AS(run_chain(bad, PriorSpec{}, c), DimensionError);
}

TEST_CASE("short chain on a one-coefficient model tracks the grid posterior") {
  const FitData d = testing::two_state_problem(40, 1.2, -0.8, 17);
  SamplerConfig c = testing::short_run(21000, 1000, 5);
  const auto chain = run_chain(d, PriorSpec{}, c);
  for (std::size_t from = 0; from < 2; ++from) {
    std::vector<double> x;
    std::vector<int> y;
    for (std::size_t r = 1; r < d.n_rows(); ++r)
      if (d.labels[r - 1] == from) {
        x.push_back(d.design(static_cast<Eigen::Index>(r), 0));
        y.push_back(d.labels[r] == 0 ? 1 : 0);
      }
    std::vector<double> grid;
    for (int g = 0; g < 4001; ++g) grid.push_back(-20.0 + 0.01 * g);
    const auto post = oracle::grid_posterior(x, y, 100.0, grid);
    double mean = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) mean += post[g] * grid[g];
    double var = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) var += post[g] * (grid[g] - mean) * (grid[g] - mean);
    const auto col = chain.draws.col(static_cast<Eigen::Index>(chain.beta_index(from, 0, 0)));
    const double m = col.mean();
    CAPTURE(from);
    CHECK(std::abs(m - mean) < 0.1 * std::sqrt(var));
    CHECK((col.array() - m).square().mean() == doctest::Approx(var).epsilon(0.1));
  }
}

TEST_CASE("parameter names follow the flattened order") {
  const FitData d = testing::small_scenario_data(2, 30);
  const auto chain = run_chain(d, PriorSpec{}, testing::short_run(3, 0));
  const auto names = chain.parameter_names();
  REQUIRE(names.size() == chain.n_parameters());
  CHECK(names[chain.beta_index(0, 1, 0)] == "beta[s1->s2][individual:ind1]");
  CHECK(names[chain.mu_index(2, 0)] == "mu[s3->s1]");
  const auto st = chain.state(2);
  CHECK(st.beta[1](2, 1) == chain.draws(2, static_cast<Eigen::Index>(chain.beta_index(1, 1, 2))));
}

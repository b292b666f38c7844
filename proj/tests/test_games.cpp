#include <cmath>
#include <random>

#include "doctest.h"
#include "evodyn/errors.hpp"
#include "evodyn/games.hpp"
#include "evodyn/measures.hpp"
#include "oracles.hpp"

using namespace evodyn;

TEST_CASE("quartic bump") {
  CHECK(bump(0.0, 0.1) == 1.0);
  CHECK(bump(0.05, 0.1) == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(bump(0.1, 0.1) == 0.0);
  CHECK(bump(0.3, 0.1) == 0.0);
  CHECK(bump(-0.05, 0.1) == bump(0.05, 0.1));
  // Frozen symbolic value, and the closed form it came from.
  CHECK(oracle::bump_max_slope(0.1) == doctest::Approx(oracle::kBumpMaxSlopeW01).epsilon(1e-15));
  CHECK(std::abs(bump_derivative(0.1 / std::sqrt(3.0), 0.1)) ==
        doctest::Approx(oracle::kBumpMaxSlopeW01).epsilon(1e-12));
  double worst = 0.0;
  for (int k = 0; k <= 10000; ++k) worst = std::max(worst, std::abs(bump_derivative(k * 1e-5, 0.1)));
  CHECK(worst <= oracle::kBumpMaxSlopeW01 + 1e-12);
}

TEST_CASE("payoff vectors") {
  const auto grid = grid_points(11, GridPlacement::Endpoints);
  std::vector<double> theta{0.1, 0.2, 0.05, 0.05, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05, 0.1};
  const auto anti = payoff_vector(PayoffKernel::anticoordination(), grid, theta);
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(anti[i] == -theta[i]);

  for (double v : payoff_vector(PayoffKernel::zero(), grid, theta)) CHECK(v == 0.0);

  std::vector<double> e1(11, 0.0);
  e1[0] = 1.0;
  const auto b = payoff_vector(PayoffKernel::bump(0.1), grid, e1);
  CHECK(b[0] == -1.0);
  for (std::size_t i = 1; i < b.size(); ++i) CHECK(b[i] == 0.0);

  const std::vector<double> fine{0.0, 0.05, 0.5};
  const auto bf = payoff_vector(PayoffKernel::bump(0.1), fine, std::vector<double>{1.0, 0.0, 0.0});
  CHECK(bf[1] == doctest::Approx(-0.5625).epsilon(1e-15));

  CHECK_THROWS_AS(payoff_vector(PayoffKernel::zero(), grid, std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("kernel validation") {
  CHECK_THROWS_AS(PayoffKernel::bump(0.0), InvalidInput);
  CHECK_THROWS_AS(PayoffKernel::bump(-0.1), InvalidInput);
  CHECK_THROWS_AS(PayoffKernel::bump(1.5), InvalidInput);
  CHECK_NOTHROW(PayoffKernel::bump(1.0));
  CHECK_THROWS_AS(PayoffKernel::tabulated({0.0, 1.0}, {1.0, 2.0, 3.0}), InvalidInput);
  CHECK_THROWS_AS(PayoffKernel::tabulated({0.0, 1.0}, {1.0, 2.0, 3.0, NAN}), InvalidInput);
}

TEST_CASE("tabulated kernels reproduce their table") {
  const std::vector<double> pts{0.0, 0.5, 1.0};
  const auto k = PayoffKernel::tabulated(pts, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(k(0.5, 1.0) == 6.0);
  CHECK(k(0.25, 0.0) == doctest::Approx(2.5));
  CHECK(k(-1.0, 2.0) == 3.0);

  const auto grid = grid_points(6, GridPlacement::Endpoints);
  const auto scaled = scaled_tabulation(PayoffKernel::bump(0.3), grid, 6.0);
  for (double s : grid)
    for (double t : grid) CHECK(scaled(s, t) == doctest::Approx(6.0 * PayoffKernel::bump(0.3)(s, t)));
}

TEST_CASE("discretized game matches the direct sum") {
  std::mt19937_64 rng(4);
  const auto grid = grid_points(17, GridPlacement::Midpoints);
  for (const auto& kernel : {PayoffKernel::anticoordination(), PayoffKernel::bump(0.2), PayoffKernel::zero(),
                             scaled_tabulation(PayoffKernel::bump(0.2), grid, 17.0)}) {
    const DiscretizedGame game(kernel, grid);
    for (int trial = 0; trial < 20; ++trial) {
      const auto theta = sample_simplex(rng, grid.size());
      const auto fast = game.apply(theta);
      const auto direct = payoff_vector(kernel, grid, theta);
      for (std::size_t i = 0; i < grid.size(); ++i) CHECK(fast[i] == doctest::Approx(direct[i]).epsilon(1e-13));
    }
  }
  CHECK(DiscretizedGame(PayoffKernel::anticoordination(), grid).is_discrete_anticoordination());
  CHECK(DiscretizedGame(PayoffKernel::anticoordination(), grid).min_entry() == -1.0);
  CHECK(DiscretizedGame(PayoffKernel::anticoordination(), grid).max_entry() == 0.0);
}

TEST_CASE("property: payoffs are linear in theta") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto grid = grid_points(12, GridPlacement::Endpoints);
  for (const auto& kernel : {PayoffKernel::anticoordination(), PayoffKernel::bump(0.25)}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = sample_simplex(rng, 12), b = sample_simplex(rng, 12);
      const double w = unif(rng);
      std::vector<double> mix(12);
      for (std::size_t i = 0; i < 12; ++i) mix[i] = w * a[i] + (1.0 - w) * b[i];
      const auto pa = payoff_vector(kernel, grid, a), pb = payoff_vector(kernel, grid, b);
      const auto pm = payoff_vector(kernel, grid, mix);
      for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(pm[i] - (w * pa[i] + (1.0 - w) * pb[i])) <= 1e-12);
    }
  }
}

TEST_CASE("property: anticoordination kernels are symmetric") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto discrete = PayoffKernel::anticoordination();
  const auto smooth = PayoffKernel::bump(0.3);
  for (int trial = 0; trial < 1000; ++trial) {
    const double s = unif(rng), t = trial % 10 == 0 ? s : unif(rng);
    CHECK(discrete(s, t) == discrete(t, s));
    CHECK(smooth(s, t) == smooth(t, s));
  }
}

TEST_CASE("property: bump kernel vanishes off-diagonal once narrower than the gap") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double s = unif(rng), t = unif(rng);
    const double gap = std::abs(s - t);
    if (gap < 1e-6) continue;
    const double w = gap * unif(rng);
    if (!(w > 0.0)) continue;
    CHECK(PayoffKernel::bump(w)(s, t) == 0.0);
    CHECK(PayoffKernel::anticoordination()(s, t) == 0.0);
  }
}

TEST_CASE("assumption-1 probe") {
  const auto zero = assumption1_probe(PayoffKernel::zero(), 2000, 1);
  CHECK(zero.bound_estimate == 0.0);
  CHECK(zero.lip_s_estimate == 0.0);
  CHECK(zero.lip_measure_estimate == 0.0);
  CHECK_FALSE(zero.diverging);

  const auto smooth = assumption1_probe(PayoffKernel::bump(0.1), 5000, 2);
  CHECK_FALSE(smooth.diverging);
  CHECK(smooth.bound_estimate <= 1.0);
  CHECK(smooth.lip_s_estimate <= 1.05 * oracle::kBumpMaxSlopeW01);
  CHECK(smooth.lip_s_estimate > 0.5 * oracle::kBumpMaxSlopeW01);

  const auto jump = assumption1_probe(PayoffKernel::anticoordination(), 2000, 3);
  CHECK(jump.diverging);
  CHECK(jump.bound_estimate == 1.0);

  CHECK_THROWS_AS(assumption1_probe(PayoffKernel::zero(), 1, 0), InvalidInput);
}

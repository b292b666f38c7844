#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "evodyn/errors.hpp"
#include "evodyn/measures.hpp"
#include "evodyn/metric.hpp"
#include "evodyn/analysis.hpp"
#include "oracles.hpp"

using namespace evodyn;

namespace {

DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t max_points) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t k = 1 + rng() % max_points;
  std::vector<double> pts(k), w(k);
  for (std::size_t i = 0; i < k; ++i) {
    pts[i] = unif(rng);
    w[i] = unif(rng) + 1e-3;
  }
  return DiscreteMeasure(pts, w);
}

void check_witness(const BLResult& r, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  REQUIRE(r.witness.size() == r.support.size());
  for (std::size_t i = 0; i < r.witness.size(); ++i) {
    CHECK(std::abs(r.witness[i]) <= 1.0 + 1e-9);
    for (std::size_t j = 0; j < r.witness.size(); ++j) {
      CHECK(std::abs(r.witness[i] - r.witness[j]) <= std::abs(r.support[i] - r.support[j]) + 1e-9);
    }
  }
  // Integrate the witness against mu - nu directly.
  auto integral = [&](const DiscreteMeasure& m) {
    double s = 0.0;
    for (std::size_t a = 0; a < m.size(); ++a) {
      for (std::size_t i = 0; i < r.support.size(); ++i) {
        if (std::abs(r.support[i] - m.points()[a]) <= 1e-12) s += m.weights()[a] * r.witness[i];
      }
    }
    return s;
  };
  CHECK(std::abs(integral(mu) - integral(nu) - r.distance) <= 1e-9);
}

}  // namespace

TEST_CASE("closed-form examples") {
  CHECK(bl_distance(DiscreteMeasure::dirac(0.3), DiscreteMeasure::dirac(0.3)).distance == 0.0);
  CHECK(bl_distance(DiscreteMeasure::dirac(0.0), DiscreteMeasure::dirac(1.0)).distance ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bl_distance(DiscreteMeasure::dirac(0.2), DiscreteMeasure::dirac(0.7)).distance ==
        doctest::Approx(0.5).epsilon(1e-12));
  const DiscreteMeasure two({0.0, 1.0}, {0.5, 0.5});
  const auto r = bl_distance(two, DiscreteMeasure::dirac(0.0));
  CHECK(r.distance == doctest::Approx(0.5).epsilon(1e-12));
  check_witness(r, two, DiscreteMeasure::dirac(0.0));
}

TEST_CASE("identical measures short-circuit to zero") {
  const DiscreteMeasure m({0.1, 0.4, 0.8}, {0.2, 0.3, 0.5});
  const auto r = bl_distance(m, m);
  CHECK(r.distance == 0.0);
  CHECK(r.status == SolverStatus::Optimal);
}

TEST_CASE("two-Dirac closed form on random pairs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = unif(rng), b = unif(rng);
    const auto r = bl_distance(DiscreteMeasure::dirac(a), DiscreteMeasure::dirac(b));
    CHECK(std::abs(r.distance - oracle::two_dirac_bl(a, b)) <= 1e-9);
  }
}

TEST_CASE("grid-search oracle agrees on small supports") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Far-apart atoms hit the |g| <= 1 box rather than the Lipschitz chain.
  const DiscreteMeasure far_mu({0.0, 1.0}, {0.9, 0.1});
  const DiscreteMeasure far_nu = DiscreteMeasure::dirac(0.5);
  const auto far = bl_distance(far_mu, far_nu);
  CHECK(std::abs(far.distance - oracle::grid_search_bl({0.0, 0.5, 1.0}, {0.9, -1.0, 0.1})) <= 2e-3);

  for (int trial = 0; trial < 20; ++trial) {
    const auto mu = random_measure(rng, 2);
    const auto nu = random_measure(rng, 3 - mu.size() + 1);
    const auto r = bl_distance(mu, nu);
    if (r.support.size() > 3) continue;
    std::vector<double> c(r.support.size(), 0.0);
    for (std::size_t i = 0; i < r.support.size(); ++i) {
      for (std::size_t a = 0; a < mu.size(); ++a)
        if (mu.points()[a] == r.support[i]) c[i] += mu.weights()[a];
      for (std::size_t a = 0; a < nu.size(); ++a)
        if (nu.points()[a] == r.support[i]) c[i] -= nu.weights()[a];
    }
    const double grid = oracle::grid_search_bl(r.support, c);
    CHECK(std::abs(r.distance - grid) <= 2e-3);
    CHECK(r.distance >= grid - 1e-12);
  }
}

TEST_CASE("property: metric axioms and witness validity") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_measure(rng, 8);
    const auto b = random_measure(rng, 8);
    const auto c = random_measure(rng, 8);
    const auto ab = bl_distance(a, b), ba = bl_distance(b, a);
    const double ac = bl_distance(a, c).distance, cb = bl_distance(c, b).distance;
    CHECK(std::abs(ab.distance - ba.distance) <= 1e-9);
    CHECK(ab.distance <= ac + cb + 1e-9);
    CHECK(bl_distance(a, a).distance == 0.0);
    CHECK(ab.distance >= 0.0);
    CHECK(ab.distance <= 2.0);
    check_witness(ab, a, b);
  }
}

TEST_CASE("property: bounded by the l1 distance on matched supports") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 10;
    const auto pts = grid_points(n, GridPlacement::Endpoints);
    const auto x = sample_simplex(rng, n), y = sample_simplex(rng, n);
    const double d = bl_distance(DiscreteMeasure(pts, x), DiscreteMeasure(pts, y)).distance;
    CHECK(d <= l1_state_distance(x, y) + 1e-12);
  }
}

TEST_CASE("property: shrinking the support never increases the distance") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto mu = random_measure(rng, 6), nu = random_measure(rng, 6);
    const double alpha = unif(rng);
    auto shrink = [&](const DiscreteMeasure& m) {
      std::vector<double> p = m.points();
      for (double& s : p) s *= alpha;
      return DiscreteMeasure(p, m.weights());
    };
    CHECK(bl_distance(shrink(mu), shrink(nu)).distance <= bl_distance(mu, nu).distance + 1e-9);
  }
}

TEST_CASE("solver status") {
  // Equal total masses make the optimum shift-invariant, so the witness is
  // never unique; the reported one is the optimum closest to g = 0 at the end.
  const DiscreteMeasure mu({0.0, 0.5}, {0.5, 0.5});
  const DiscreteMeasure nu({0.0, 0.5}, {0.25, 0.75});
  const auto r = bl_distance(mu, nu);
  CHECK(r.distance == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(r.status == SolverStatus::Optimal);
  CHECK(r.witness.back() == 0.0);
  check_witness(r, mu, nu);

  const DiscreteMeasure near({0.0, 0.5}, {0.5 + 1e-13, 0.5 - 1e-13});
  const auto tiny = bl_distance(mu, near);
  CHECK(tiny.status == SolverStatus::Degenerate);
  CHECK(tiny.distance <= 1e-12);
}

TEST_CASE("l1 state distance") {
  const std::vector<double> x{0.2, 0.3, 0.5};
  CHECK(l1_state_distance(x, x) == 0.0);
  CHECK(l1_state_distance(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) == 2.0);
  CHECK_THROWS_AS(l1_state_distance(x, std::vector<double>{1.0}), InvalidInput);
  for (std::size_t n : {25u, 50u, 100u, 200u, 400u}) {
    const auto x0 = section4_initial_state(0.5, n);
    const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    CHECK(l1_state_distance(x0, uniform) == doctest::Approx(0.5).epsilon(1e-14));
  }
}

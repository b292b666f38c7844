#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "evodyn/dynamics.hpp"
#include "evodyn/errors.hpp"
#include "evodyn/measures.hpp"
#include "evodyn/metric.hpp"
#include "oracles.hpp"

using namespace evodyn;

namespace {

const RevisionProtocol kReplicator{ProtocolKind::Replicator};
const RevisionProtocol kBnn{ProtocolKind::BNN};
const RevisionProtocol kSmith{ProtocolKind::Smith};

double l1(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

}  // namespace

TEST_CASE("hand-evaluated velocities") {
  const std::vector<double> half{0.5, 0.5};
  auto v = mean_dynamics_rhs(half, half, kReplicator, std::vector<double>{1.0, 0.0});
  CHECK(v[0] == doctest::Approx(0.25));
  CHECK(v[1] == doctest::Approx(-0.25));

  const std::vector<double> vertex{1.0, 0.0};
  v = mean_dynamics_rhs(vertex, vertex, kReplicator, std::vector<double>{0.3, 0.9});
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.0);

  v = mean_dynamics_rhs(vertex, half, kBnn, std::vector<double>{0.0, 1.0});
  CHECK(v[0] == doctest::Approx(-0.5));
  CHECK(v[1] == doctest::Approx(0.5));
}

TEST_CASE("state-coupled protocols require lambda == x") {
  const std::vector<double> x{0.4, 0.6};
  const std::vector<double> lam{0.5, 0.5};
  CHECK_THROWS_AS(mean_dynamics_rhs(x, lam, kReplicator, x), InvalidInput);
  CHECK_NOTHROW(mean_dynamics_rhs(x, lam, kSmith, x));
}

TEST_CASE("stationarity of the uniform state under anticoordination") {
  for (std::size_t n : {2u, 10u, 100u, 1000u}) {
    const auto support = grid_points(n, GridPlacement::Endpoints);
    const MeanDynamics dyn(PayoffKernel::anticoordination(), kReplicator, support, {});
    for (double v : dyn.velocity(uniform(n))) CHECK(v == 0.0);
  }
}

TEST_CASE("property: replicator reduction") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    const auto theta = sample_simplex(rng, n);
    std::vector<double> rho(n);
    for (double& r : rho) r = unif(rng);
    const auto expect = oracle::replicator(theta, rho);
    const auto slow = mean_dynamics_rhs(theta, theta, kReplicator, rho);
    std::vector<double> fast(n);
    fast_rhs(kReplicator, theta, {}, rho, fast);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(slow[i] - expect[i]) <= 1e-12);
      CHECK(std::abs(fast[i] - expect[i]) <= 1e-12);
    }
  }
}

TEST_CASE("property: closed forms agree with the double sum") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    const auto x = sample_simplex(rng, n), lam = sample_simplex(rng, n);
    std::vector<double> rho(n);
    for (double& r : rho) r = trial % 3 == 0 ? std::round(unif(rng) * 3.0) : unif(rng);
    for (const auto& p : {kBnn, kSmith}) {
      const auto slow = mean_dynamics_rhs(x, lam, p, rho);
      std::vector<double> fast(n);
      fast_rhs(p, x, lam, rho, fast);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(fast[i] - slow[i]) <= 1e-13);
        total += slow[i];
      }
      CHECK(std::abs(total) <= 1e-12);
    }
  }
}

TEST_CASE("property: forward invariance on boundary states") {
  std::mt19937_64 rng(33);
  const auto grid = grid_points(15, GridPlacement::Endpoints);
  for (const auto& p : {kReplicator, kBnn, kSmith}) {
    for (const auto& kernel : {PayoffKernel::anticoordination(), PayoffKernel::bump(0.2)}) {
      const MeanDynamics dyn(kernel, p, grid, p.reference_mode() == ReferenceMode::Fixed ? uniform(15)
                                                                                        : std::vector<double>{});
      for (int trial = 0; trial < 100; ++trial) {
        auto x = sample_simplex(rng, 15);
        for (std::size_t i = 0; i < 15; ++i)
          if (rng() % 3 == 0) x[i] = 0.0;
        double s = 0.0;
        for (double v : x) s += v;
        if (s == 0.0) x[0] = s = 1.0;
        for (double& v : x) v /= s;
        const auto v = dyn.velocity(x);
        for (std::size_t i = 0; i < 15; ++i)
          if (x[i] <= 1e-12) CHECK(v[i] >= -1e-12);
      }
    }
  }
}

TEST_CASE("property: section-4 velocity bound on random states") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    const auto x = sample_simplex(rng, n);
    const MeanDynamics dyn(PayoffKernel::anticoordination(), kReplicator, grid_points(n, GridPlacement::Endpoints), {});
    double sq = 0.0;
    for (double v : x) sq += v * v;
    CHECK(l1(dyn.velocity(x)) <= 2.0 * sq + 1e-12);
  }
}

TEST_CASE("property: protocol-cap bound") {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    const auto x = sample_simplex(rng, n);
    for (const auto& p : {kReplicator, kBnn, kSmith}) {
      const MeanDynamics dyn(PayoffKernel::bump(0.15), p, grid_points(n, GridPlacement::Midpoints),
                             p.reference_mode() == ReferenceMode::Fixed ? sample_simplex(rng, n) : std::vector<double>{});
      const auto rho = dyn.payoffs(x);
      const double cap = max_switch_rate(p, x, rho);
      CHECK(l1(dyn.velocity(x)) <= 2.0 * cap + 1e-12);
    }
  }
}

TEST_CASE("integration keeps a stationary state") {
  const std::size_t n = 20;
  const MeanDynamics dyn(PayoffKernel::anticoordination(), kReplicator, grid_points(n, GridPlacement::Endpoints), {});
  IntegratorConfig cfg;
  cfg.t_end = 10.0;
  const auto traj = integrate(dyn, uniform(n), cfg);
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == 10.0);
  CHECK(l1_state_distance(traj.states.back(), uniform(n)) <= 1e-9);
}

TEST_CASE("emission grid and trajectory invariants") {
  std::mt19937_64 rng(36);
  const std::size_t n = 12;
  const auto grid = grid_points(n, GridPlacement::Endpoints);
  const MeanDynamics dyn(PayoffKernel::bump(0.3), kSmith, grid, uniform(n));
  IntegratorConfig cfg;
  cfg.t_end = 3.0;
  cfg.emission_points = 31;
  const auto traj = integrate(dyn, sample_simplex(rng, n), cfg);
  REQUIRE(traj.times.size() == 31);
  for (std::size_t m = 0; m < 31; ++m) CHECK(traj.times[m] == doctest::Approx(0.1 * m).epsilon(1e-15));
  for (std::size_t m = 1; m < 31; ++m) CHECK(traj.times[m] > traj.times[m - 1]);
  for (const auto& x : traj.states) {
    double s = 0.0;
    for (double v : x) {
      CHECK(v >= -1e-12);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  CHECK(traj.stats.max_mass_drift <= 1e-8);
  CHECK(traj.config_fingerprint.size() == 16);
}

TEST_CASE("interior start converges to the uniform state") {
  std::mt19937_64 rng(37);
  const std::size_t n = 10;
  const auto grid = grid_points(n, GridPlacement::Endpoints);
  const auto x0 = sample_simplex(rng, n);
  IntegratorConfig cfg;
  cfg.t_end = 400.0;
  cfg.method = Rk45Adaptive{1e-10, 1e-12, 1.0};
  const auto traj = integrate(PayoffKernel::anticoordination(), kReplicator, grid, x0, {}, cfg);
  CHECK(l1_state_distance(traj.states.back(), uniform(n)) <= 1e-6);

  // Independent oracle: fixed-step RK4 at a tenth of the step.
  IntegratorConfig fine = cfg;
  fine.method = Rk4Fixed{0.01};
  const auto ref = integrate(PayoffKernel::anticoordination(), kReplicator, grid, x0, {}, fine);
  CHECK(l1_state_distance(traj.states.back(), ref.states.back()) <= 1e-8);
}

TEST_CASE("RK4 and RK45 agree") {
  std::mt19937_64 rng(38);
  const std::size_t n = 16;
  const auto grid = grid_points(n, GridPlacement::Midpoints);
  for (const auto& p : {kReplicator, kBnn, kSmith}) {
    const auto x0 = sample_simplex(rng, n);
    IntegratorConfig a;
    a.t_end = 5.0;
    a.method = Rk45Adaptive{1e-8, 1e-10, 0.1};
    IntegratorConfig b = a;
    b.method = Rk4Fixed{0.005};
    const auto lam = uniform(n);
    const auto ta = integrate(PayoffKernel::bump(0.2), p, grid, x0, lam, a);
    const auto tb = integrate(PayoffKernel::bump(0.2), p, grid, x0, lam, b);
    CHECK(l1_state_distance(ta.states.back(), tb.states.back()) <= 10.0 * 1e-8);
  }
}

TEST_CASE("integrator validation and aborts") {
  const std::size_t n = 4;
  const MeanDynamics dyn(PayoffKernel::zero(), kSmith, grid_points(n, GridPlacement::Endpoints), uniform(n));
  IntegratorConfig bad;
  bad.t_end = 0.0;
  CHECK_THROWS_AS(integrate(dyn, uniform(n), bad), InvalidInput);
  bad = {};
  bad.method = Rk4Fixed{-1.0};
  CHECK_THROWS_AS(integrate(dyn, uniform(n), bad), InvalidInput);
  bad = {};
  bad.method = Rk45Adaptive{0.0, 1e-10, 0.1};
  CHECK_THROWS_AS(integrate(dyn, uniform(n), bad), InvalidInput);
  CHECK_THROWS_AS(integrate(dyn, std::vector<double>{0.5, 0.5, 0.5, -0.5}, IntegratorConfig{}), InvalidInput);

  std::vector<double> x{0.5, 0.5 + 1e-13, -1e-13, 0.0};
  CHECK_NOTHROW(renormalize(x, 1e-12));
  CHECK(x[2] == 0.0);
  std::vector<double> y{0.6, 0.6, -0.2, 0.0};
  CHECK_THROWS_AS(renormalize(y, 1e-12), NumericalError);
}

TEST_CASE("fixed protocols validate lambda") {
  const auto grid = grid_points(3, GridPlacement::Endpoints);
  CHECK_THROWS_AS(MeanDynamics(PayoffKernel::zero(), kBnn, grid, {0.5, 0.5}), InvalidInput);
  CHECK_THROWS_AS(MeanDynamics(PayoffKernel::zero(), kBnn, grid, {0.5, 0.6, -0.1}), InvalidInput);
}

TEST_CASE("trajectory CSV format") {
  const auto grid = grid_points(2, GridPlacement::Endpoints);
  const MeanDynamics dyn(PayoffKernel::zero(), kSmith, grid, uniform(2));
  IntegratorConfig cfg;
  cfg.t_end = 1.0;
  cfg.emission_points = 2;
  std::ostringstream os;
  write_trajectory_csv(integrate(dyn, std::vector<double>{0.1, 0.9}, cfg), os);
  CHECK(os.str() == "t,0,1\n0,0.10000000000000001,0.90000000000000002\n1,0.10000000000000001,0.90000000000000002\n");
  CHECK(format_real(1.0 / 3.0) == "0.33333333333333331");
}

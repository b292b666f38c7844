#include "evodyn/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "evodyn/errors.hpp"
#include "evodyn/metric.hpp"
#include "evodyn/parallel.hpp"

namespace evodyn {

namespace {

double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

void normalize_or_throw(std::vector<double>& x, const char* what) {
  double sum = 0.0;
  for (double v : x) sum += v;
  if (!(sum > 0.0)) throw InvalidInput(std::string(what) + ": zero mass on the support");
  for (double& v : x) v /= sum;
}

DiscreteMeasure as_measure(const std::vector<double>& support, const std::vector<double>& state) {
  return DiscreteMeasure(support, state);
}

std::vector<double> uniform_weights(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

IntegratorConfig windowed(const IntegratorConfig& base, double length, double dt_max) {
  IntegratorConfig cfg = base;
  cfg.t_end = length;
  cfg.emission_points = 2;
  if (auto* rk45 = std::get_if<Rk45Adaptive>(&cfg.method)) rk45->dt_max = dt_max;
  return cfg;
}

// Newton refinement of a rest point. One velocity equation is redundant
// (velocities sum to zero), so it is replaced by the unit-mass constraint.
std::size_t polish_rest_point(const MeanDynamics& dyn, std::vector<double>& x, double& residual) {
  const std::size_t n = x.size();
  std::size_t steps = 0;
  for (int iter = 0; iter < 8 && residual > 0.0; ++iter) {
    const auto v = dyn.velocity(x);
    Eigen::MatrixXd jac(n, n);
    std::vector<double> probe = x;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(std::abs(x[j]), 1.0 / static_cast<double>(n));
      probe[j] = x[j] + h;
      const auto up = dyn.velocity(probe);
      probe[j] = x[j] - h;
      const auto down = dyn.velocity(probe);
      probe[j] = x[j];
      for (std::size_t i = 0; i < n; ++i) jac(i, j) = (up[i] - down[i]) / (2.0 * h);
    }
    Eigen::VectorXd rhs(n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rhs(i) = -v[i];
      mass += x[i];
    }
    jac.row(0).setOnes();
    rhs(0) = 1.0 - mass;
    const Eigen::VectorXd delta = jac.partialPivLu().solve(rhs);

    std::vector<double> candidate(n);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      candidate[i] = x[i] + delta(i);
      if (!std::isfinite(candidate[i]) || candidate[i] < 0.0) ok = false;
    }
    if (!ok) break;
    const double cand_residual = l1_norm(dyn.velocity(candidate));
    if (!(cand_residual < residual)) break;
    x = std::move(candidate);
    residual = cand_residual;
    ++steps;
  }
  return steps;
}

bool tail_nonincreasing(const std::vector<double>& curve, std::size_t from) {
  for (std::size_t m = std::max<std::size_t>(from, 1); m < curve.size(); ++m) {
    if (curve[m] > curve[m - 1] + 1e-12) return false;
  }
  return true;
}

}  // namespace

PayoffKernel GameSpec::on(const std::vector<double>& support) const {
  if (!scale_by_resolution) return kernel;
  return scaled_tabulation(kernel, support, static_cast<double>(support.size()));
}

Discretization discretize(const InitSpec& init, std::size_t n) {
  Discretization d;
  if (const auto* grid = std::get_if<GridInit>(&init)) {
    d.support = grid_points(n, grid->placement);
    d.x0.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.x0[i] = evaluate_density(grid->density, d.support[i]);
    normalize_or_throw(d.x0, "grid initial state");
    d.lambda = uniform_weights(n);
    return d;
  }
  const auto& sampled = std::get<SampledInit>(init);
  const DiscreteMeasure ref = sample_measure(sampled.reference, n, sampled.seed);
  d.support = ref.points();
  d.lambda = ref.weights();
  d.x0.resize(d.support.size());
  for (std::size_t i = 0; i < d.support.size(); ++i) {
    const double p_ref = evaluate_density(sampled.reference, d.support[i]);
    const double p0 = evaluate_density(sampled.density, d.support[i]);
    d.x0[i] = p_ref > 0.0 ? d.lambda[i] * p0 / p_ref : 0.0;
  }
  normalize_or_throw(d.x0, "sampled initial state");
  return d;
}

std::vector<double> bl_curve(const Trajectory& a, const Trajectory& b) {
  if (a.times.size() != b.times.size()) {
    throw InvalidInput("bl_curve: trajectories are not on a shared time grid");
  }
  std::vector<double> out(a.times.size());
  for (std::size_t m = 0; m < out.size(); ++m) {
    if (std::abs(a.times[m] - b.times[m]) > 1e-12 * std::max(1.0, std::abs(a.times[m]))) {
      throw InvalidInput("bl_curve: trajectories are not on a shared time grid");
    }
    out[m] = bl_distance(as_measure(a.support, a.states[m]), as_measure(b.support, b.states[m]))
                 .distance;
  }
  return out;
}

ConvergenceReport convergence_study(const GameSpec& game, const RevisionProtocol& protocol,
                                    const std::vector<std::size_t>& resolutions,
                                    const ConvergenceReference& reference, const InitSpec& init,
                                    const IntegratorConfig& integrator, std::size_t jobs) {
  validate_integrator_config(integrator);
  if (integrator.emission_points < 2) {
    throw InvalidInput("convergence_study: a shared emission grid (emission_points >= 2) is required");
  }
  if (resolutions.empty()) throw InvalidInput("convergence_study: no resolutions");
  for (std::size_t k = 0; k < resolutions.size(); ++k) {
    if (resolutions[k] == 0 || (k > 0 && resolutions[k] <= resolutions[k - 1])) {
      throw InvalidInput("convergence_study: resolutions must be positive and strictly increasing");
    }
  }
  const auto* ref_run = std::get_if<ReferenceRun>(&reference);
  if (ref_run && ref_run->n <= resolutions.back()) {
    throw InvalidInput("convergence_study: reference_n must exceed every resolution");
  }

  std::vector<std::size_t> sizes = resolutions;
  if (ref_run) sizes.push_back(ref_run->n);
  std::vector<std::optional<Trajectory>> runs(sizes.size());
  std::vector<std::string> errors(sizes.size());

  parallel_for(sizes.size(), jobs, [&](std::size_t k) {
    try {
      const auto d = discretize(init, sizes[k]);
      const MeanDynamics dyn(game.on(d.support), protocol, d.support, d.lambda);
      runs[k] = integrate(dyn, d.x0, integrator);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });

  ConvergenceReport report;
  report.horizon = integrator.t_end;
  if (ref_run) {
    report.reference_n = ref_run->n;
    if (!runs.back()) {
      throw NumericalError("convergence_study: reference run failed: " + errors.back());
    }
    report.reference_trajectory = std::move(runs.back());
  }

  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < resolutions.size(); ++k) {
    if (runs[k]) {
      kept.push_back(k);
    } else {
      report.excluded.push_back(resolutions[k]);
      report.warnings.push_back("resolution " + std::to_string(resolutions[k]) +
                                " excluded: " + errors[k]);
    }
  }

  std::vector<double> sups(kept.size());
  parallel_for(kept.size(), jobs, [&](std::size_t q) {
    const Trajectory& run = *runs[kept[q]];
    double sup = 0.0;
    if (report.reference_trajectory) {
      for (double d : bl_curve(run, *report.reference_trajectory)) sup = std::max(sup, d);
    } else {
      const DiscreteMeasure start = as_measure(run.support, run.states.front());
      for (const auto& state : run.states) {
        sup = std::max(sup, bl_distance(as_measure(run.support, state), start).distance);
      }
    }
    sups[q] = sup;
  });

  for (std::size_t q = 0; q < kept.size(); ++q) {
    report.resolutions.push_back(resolutions[kept[q]]);
    report.sup_bl.push_back(sups[q]);
    report.trajectories.push_back(std::move(*runs[kept[q]]));
  }
  for (std::size_t q = 1; q < report.sup_bl.size(); ++q) {
    const double prev = report.sup_bl[q - 1];
    report.decay_ratios.push_back(prev > 0.0 ? report.sup_bl[q] / prev
                                             : std::numeric_limits<double>::quiet_NaN());
  }
  if (!report.trajectories.empty()) report.times = report.trajectories.front().times;
  else if (report.reference_trajectory) report.times = report.reference_trajectory->times;
  return report;
}

double nash_gap(const MeanDynamics& dynamics, std::span<const double> theta) {
  const auto rho = dynamics.payoffs(theta);
  double mean = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) mean += theta[i] * rho[i];
  const double best = *std::max_element(rho.begin(), rho.end());
  return std::max(0.0, best - mean);
}

EquilibriumReport equilibrium_run(const MeanDynamics& dynamics, std::span<const double> x0,
                                  const CertificationConfig& cert, const IntegratorConfig& base) {
  if (!(cert.residual_tol > 0.0)) throw InvalidInput("equilibrium_run: residual_tol must be positive");
  if (!(cert.t_max > 0.0)) throw InvalidInput("equilibrium_run: t_max must be positive");
  validate_simplex_state(x0, "equilibrium_run initial state");

  EquilibriumReport report;
  std::vector<double> x(x0.begin(), x0.end());
  double residual = l1_norm(dynamics.velocity(x));
  double t = 0.0;
  double window = 1.0;
  while (residual >= cert.residual_tol && t < cert.t_max) {
    const double length = std::min(window, cert.t_max - t);
    const auto traj = integrate(dynamics, x, windowed(base, length, cert.dt_max));
    x = traj.states.back();
    t += length;
    residual = l1_norm(dynamics.velocity(x));
    window *= 2.0;
  }
  report.converged = residual < cert.residual_tol;
  if (report.converged && cert.polish && residual > 0.0) {
    report.newton_steps = polish_rest_point(dynamics, x, residual);
  }
  report.time = t;
  report.residual = residual;
  report.nash_gap = nash_gap(dynamics, x);
  report.final_state = std::move(x);
  return report;
}

EquilibriumReport equilibrium_run(const PayoffKernel& kernel, const RevisionProtocol& protocol,
                                  std::span<const double> support, std::span<const double> x0,
                                  std::span<const double> lambda0, double residual_tol,
                                  double t_max) {
  std::vector<double> lambda;
  if (protocol.reference_mode() == ReferenceMode::Fixed) lambda.assign(lambda0.begin(), lambda0.end());
  const MeanDynamics dyn(kernel, protocol, std::vector<double>(support.begin(), support.end()),
                         std::move(lambda));
  CertificationConfig cert;
  cert.residual_tol = residual_tol;
  cert.t_max = t_max;
  return equilibrium_run(dyn, x0, cert);
}

bool stability_poke(const MeanDynamics& dynamics, std::span<const double> xbar,
                    const CertificationConfig& cert, std::uint64_t seed,
                    const IntegratorConfig& base) {
  const std::size_t n = xbar.size();
  if (n < 2) return true;
  std::mt19937_64 rng(seed);
  const auto target = sample_simplex(rng, n);
  const double spread = l1_state_distance(target, xbar);
  if (!(spread > 0.0)) return true;
  const double alpha = std::min(1.0, cert.poke / spread);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = (1.0 - alpha) * xbar[i] + alpha * target[i];

  double t = 0.0;
  double window = 1.0;
  while (t < cert.t_max) {
    const double length = std::min(window, cert.t_max - t);
    const auto traj = integrate(dynamics, x, windowed(base, length, cert.dt_max));
    x = traj.states.back();
    t += length;
    if (l1_state_distance(x, xbar) <= cert.poke_return) return true;
    window *= 2.0;
  }
  return false;
}

std::size_t section4_block(double epsilon, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(n) / 2.0));
}

std::vector<double> section4_initial_state(double epsilon, std::size_t n) {
  if (!(epsilon > 0.0)) throw InvalidInput("section-4 family: epsilon must be positive");
  if (n == 0) throw InvalidInput("section-4 family: n must be positive");
  const std::size_t m = section4_block(epsilon, n);
  if (2 * m > n) {
    throw InvalidInput("section-4 family: epsilon too large for n = " + std::to_string(n));
  }
  const double base = 1.0 / static_cast<double>(n);
  const double shift = epsilon / (2.0 * static_cast<double>(m));
  std::vector<double> x(n, base);
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = base + shift;
    x[m + i] = base - shift;
  }
  return x;
}

std::vector<double> envelope_of(const std::vector<ResolutionOutcome>& outcomes) {
  std::vector<double> env;
  for (const auto& o : outcomes) {
    if (!o.certified) continue;
    const auto& states = o.trajectory.states;
    if (env.empty()) env.assign(states.size(), 0.0);
    if (states.size() != env.size()) {
      throw InvalidInput("envelope: trajectories are not on a shared time grid");
    }
    for (std::size_t m = 0; m < states.size(); ++m) {
      env[m] = std::max(env[m], l1_state_distance(states[m], o.equilibrium.final_state));
    }
  }
  return env;
}

MobilityReport paralysis_study(const GameSpec& game, const RevisionProtocol& protocol,
                               const FamilySpec& family, const IntegratorConfig& integrator,
                               const CertificationConfig& cert, std::size_t jobs) {
  validate_integrator_config(integrator);
  if (integrator.emission_points < 2) {
    throw InvalidInput("paralysis_study: a shared emission grid (emission_points >= 2) is required");
  }
  if (family.resolutions.empty()) throw InvalidInput("paralysis_study: no resolutions");
  if (!family.init) throw InvalidInput("paralysis_study: missing initial-condition family");
  if (!(family.threshold > 0.0)) throw InvalidInput("paralysis_study: threshold must be positive");

  const std::size_t count = family.resolutions.size();
  std::vector<ResolutionOutcome> outcomes(count);
  std::vector<std::string> errors(count);

  parallel_for(count, jobs, [&](std::size_t k) {
    const std::size_t n = family.resolutions[k];
    auto& out = outcomes[k];
    out.n = n;
    try {
      auto support = grid_points(n, family.placement);
      const auto x0 = family.init(n);
      if (x0.size() != n) throw InvalidInput("initial-condition family returned the wrong length");
      const MeanDynamics dyn(game.on(support), protocol, support, uniform_weights(n));

      const auto v0 = dyn.velocity(x0);
      out.initial_speed = l1_norm(v0);
      if (dyn.game().is_discrete_anticoordination() && protocol.kind == ProtocolKind::Replicator) {
        double sq = 0.0;
        for (double v : x0) sq += v * v;
        out.quadratic_bound = 2.0 * sq;
      }
      out.protocol_cap = 2.0 * (dyn.game().max_entry() - dyn.game().min_entry());

      out.trajectory = integrate(dyn, x0, integrator);
      out.equilibrium = equilibrium_run(dyn, out.trajectory.states.back(), cert, integrator);
      if (out.equilibrium.converged) {
        const std::uint64_t poke_seed = cert.seed ^ (0x9E3779B97F4A7C15ULL * (n + 1));
        out.poke_returned = stability_poke(dyn, out.equilibrium.final_state, cert, poke_seed,
                                           integrator);
      }
      out.certified = out.equilibrium.converged && out.poke_returned;
      if (!out.certified) {
        errors[k] = out.equilibrium.converged ? "limit failed the stability poke"
                                              : "did not come to rest before t_max";
      }
    } catch (const std::exception& e) {
      out.certified = false;
      errors[k] = e.what();
    }
  });

  MobilityReport report;
  report.threshold = family.threshold;
  for (std::size_t k = 0; k < count; ++k) {
    if (!outcomes[k].certified) {
      report.excluded.push_back(outcomes[k].n);
      report.warnings.push_back("resolution " + std::to_string(outcomes[k].n) +
                                " uncertified: " + errors[k]);
    }
  }
  report.envelope = envelope_of(outcomes);
  if (report.envelope.empty()) {
    throw NumericalError("paralysis_study: no resolution produced a certified limit");
  }

  const ResolutionOutcome* largest = nullptr;
  for (const auto& o : outcomes) {
    if (!o.certified) continue;
    if (report.times.empty()) report.times = o.trajectory.times;
    if (!largest || o.n > largest->n) largest = &o;
  }
  report.epsilon_floor = *std::min_element(report.envelope.begin(), report.envelope.end());
  report.verdict = report.epsilon_floor >= report.threshold ? MobilityVerdict::ParalysisDetected
                                                            : MobilityVerdict::MobileOnTestedFamily;

  CoincidenceCheck check;
  check.n = largest->n;
  const DiscreteMeasure limit = as_measure(largest->trajectory.support, largest->equilibrium.final_state);
  for (const auto& state : largest->trajectory.states) {
    check.limit_distance.push_back(
        bl_distance(limit, as_measure(largest->trajectory.support, state)).distance);
  }
  const std::size_t tail_start = check.limit_distance.size() * 3 / 4;
  check.tail_nonincreasing = tail_nonincreasing(check.limit_distance, tail_start);
  const double tail_first = check.limit_distance[tail_start];
  const double tail_last = check.limit_distance.back();
  check.plateau = tail_last > 1e-6 && tail_first - tail_last <= 0.01 * tail_first;
  report.coincidence = std::move(check);

  report.outcomes = std::move(outcomes);
  return report;
}

std::vector<VelocityBoundSample> velocity_bound_check(const Trajectory& trajectory,
                                                      const MeanDynamics& dynamics) {
  const bool quadratic = dynamics.game().is_discrete_anticoordination() &&
                         dynamics.protocol().kind == ProtocolKind::Replicator;
  std::vector<VelocityBoundSample> out;
  out.reserve(trajectory.times.size());
  for (std::size_t m = 0; m < trajectory.times.size(); ++m) {
    const auto& x = trajectory.states[m];
    VelocityBoundSample s;
    s.t = trajectory.times[m];
    const auto rho = dynamics.payoffs(x);
    s.speed = l1_norm(dynamics.velocity(x));
    if (quadratic) {
      double sq = 0.0;
      for (double v : x) sq += v * v;
      s.quadratic_bound = 2.0 * sq;
    }
    s.rate_cap_bound = 2.0 * max_switch_rate(dynamics.protocol(), x, rho);
    out.push_back(s);
  }
  return out;
}

}  // namespace evodyn

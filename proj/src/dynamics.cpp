#include "evodyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "evodyn/errors.hpp"
#include "evodyn/fingerprint.hpp"

namespace evodyn {

namespace {

// Indices of rho in ascending payoff order.
struct PayoffOrder {
  std::vector<std::size_t> idx;
};

PayoffOrder sort_by_payoff(std::span<const double> rho) {
  PayoffOrder order;
  order.idx.resize(rho.size());
  std::iota(order.idx.begin(), order.idx.end(), std::size_t{0});
  std::sort(order.idx.begin(), order.idx.end(), [&](std::size_t a, std::size_t b) {
    return rho[a] < rho[b] || (rho[a] == rho[b] && a < b);
  });
  return order;
}

// Pairwise-comparison flows with rate(i -> j) = max{0, rho_j - rho_i}:
//   inflow_i  = ref_i * sum_{rho_j < rho_i} (rho_i - rho_j) x_j
//   outflow_i = x_i   * sum_{rho_j > rho_i} (rho_j - rho_i) ref_j
void pairwise_flows(std::span<const double> x, std::span<const double> ref,
                    std::span<const double> rho, std::span<double> out) {
  const std::size_t n = x.size();
  const auto order = sort_by_payoff(rho);

  std::vector<double> net_in(n, 0.0);
  // Ascending sweep: sums over strictly smaller payoffs.
  double mass_below = 0.0;
  double weighted_below = 0.0;
  for (std::size_t p = 0; p < n;) {
    std::size_t q = p;
    while (q < n && rho[order.idx[q]] == rho[order.idx[p]]) ++q;
    for (std::size_t r = p; r < q; ++r) {
      const std::size_t i = order.idx[r];
      net_in[i] = ref[i] * (rho[i] * mass_below - weighted_below);
    }
    for (std::size_t r = p; r < q; ++r) {
      const std::size_t j = order.idx[r];
      mass_below += x[j];
      weighted_below += rho[j] * x[j];
    }
    p = q;
  }
  // Descending sweep: sums over strictly larger payoffs.
  double ref_above = 0.0;
  double weighted_above = 0.0;
  for (std::size_t p = n; p > 0;) {
    std::size_t q = p;
    while (q > 0 && rho[order.idx[q - 1]] == rho[order.idx[p - 1]]) --q;
    for (std::size_t r = q; r < p; ++r) {
      const std::size_t i = order.idx[r];
      out[i] = net_in[i] - x[i] * (weighted_above - rho[i] * ref_above);
    }
    for (std::size_t r = q; r < p; ++r) {
      const std::size_t j = order.idx[r];
      ref_above += ref[j];
      weighted_above += rho[j] * ref[j];
    }
    p = q;
  }
}

std::string describe_kernel(const PayoffKernel& kernel) {
  std::ostringstream os;
  os << kernel.name();
  if (const auto* b = std::get_if<AnticoordinationBump>(&kernel.kind())) {
    os << "(w=" << format_real(b->width) << ")";
  } else if (const auto* t = std::get_if<TabulatedGrid>(&kernel.kind())) {
    std::ostringstream body;
    for (double p : t->points) body << format_real(p) << ',';
    body << ';';
    for (double v : t->matrix) body << format_real(v) << ',';
    os << "(" << fingerprint_of(body.str()) << ")";
  }
  return os.str();
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void validate_simplex_state(std::span<const double> x, const char* what) {
  if (x.empty()) throw InvalidInput(std::string(what) + ": empty state");
  double sum = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite entry");
    if (v < -kSimplexNegativeFloor) throw InvalidInput(std::string(what) + ": negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexMassTolerance) {
    throw InvalidInput(std::string(what) + ": entries do not sum to 1");
  }
}

std::vector<double> mean_dynamics_rhs(std::span<const double> x, std::span<const double> lambda,
                                      const RevisionProtocol& protocol,
                                      std::span<const double> rho) {
  const std::size_t n = x.size();
  if (lambda.size() != n || rho.size() != n) {
    throw InvalidInput("mean_dynamics_rhs: x, lambda and rho differ in length");
  }
  if (protocol.reference_mode() == ReferenceMode::StateCoupled) {
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(lambda[i] - x[i]) > 1e-12) {
        throw InvalidInput("mean_dynamics_rhs: " + protocol.name() +
                           " couples the reference measure to the state, lambda must equal x");
      }
    }
  }
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double inflow = 0.0;
    double outflow = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      inflow += switch_rate(protocol, j, i, x, rho) * x[j];
      outflow += switch_rate(protocol, i, j, x, rho) * lambda[j];
    }
    v[i] = lambda[i] * inflow - x[i] * outflow;
  }
  return v;
}

void fast_rhs(const RevisionProtocol& protocol, std::span<const double> x,
              std::span<const double> lambda, std::span<const double> rho, std::span<double> out) {
  const std::size_t n = x.size();
  if (rho.size() != n || out.size() != n) {
    throw InvalidInput("fast_rhs: x, rho and out differ in length");
  }
  switch (protocol.kind) {
    case ProtocolKind::Replicator:
      pairwise_flows(x, x, rho, out);
      return;
    case ProtocolKind::Smith:
      if (lambda.size() != n) throw InvalidInput("fast_rhs: lambda length mismatch");
      pairwise_flows(x, lambda, rho, out);
      return;
    case ProtocolKind::BNN: {
      if (lambda.size() != n) throw InvalidInput("fast_rhs: lambda length mismatch");
      double mass = 0.0;
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        mass += x[k];
        mean += x[k] * rho[k];
      }
      double outflow_rate = 0.0;
      for (std::size_t k = 0; k < n; ++k) outflow_rate += std::max(0.0, rho[k] - mean) * lambda[k];
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = lambda[i] * std::max(0.0, rho[i] - mean) * mass - x[i] * outflow_rate;
      }
      return;
    }
  }
}

MeanDynamics::MeanDynamics(const PayoffKernel& kernel, RevisionProtocol protocol,
                           std::vector<double> support, std::vector<double> lambda)
    : game_(kernel, std::move(support)), protocol_(protocol) {
  if (protocol_.reference_mode() == ReferenceMode::Fixed) {
    if (lambda.size() != game_.size()) {
      throw InvalidInput("mean dynamics: reference weights do not match the support");
    }
    validate_simplex_state(lambda, "reference weights");
    lambda_ = std::move(lambda);
  }
  std::ostringstream os;
  os << describe_kernel(kernel) << '|' << protocol_.name() << "|n=" << game_.size() << "|support=";
  std::ostringstream pts;
  for (double s : game_.support()) pts << format_real(s) << ',';
  pts << "|lambda=";
  for (double l : lambda_) pts << format_real(l) << ',';
  os << fingerprint_of(pts.str());
  description_ = os.str();
}

void MeanDynamics::velocity(std::span<const double> x, std::span<double> out) const {
  std::vector<double> rho(x.size());
  game_.apply(x, rho);
  fast_rhs(protocol_, x, lambda_, rho, out);
}

std::vector<double> MeanDynamics::velocity(std::span<const double> x) const {
  std::vector<double> out(x.size());
  velocity(x, out);
  return out;
}

std::vector<double> MeanDynamics::payoffs(std::span<const double> x) const {
  return game_.apply(x);
}

void validate_integrator_config(const IntegratorConfig& cfg) {
  if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) {
    throw InvalidInput("integrator: t_end must be positive");
  }
  if (cfg.renorm_every == 0) throw InvalidInput("integrator: renorm_every must be positive");
  if (!(cfg.negative_clip > 0.0)) throw InvalidInput("integrator: negative_clip must be positive");
  if (cfg.emission_points == 1) {
    throw InvalidInput("integrator: emission_points must be 0 or at least 2");
  }
  if (const auto* rk4 = std::get_if<Rk4Fixed>(&cfg.method)) {
    if (!(rk4->dt > 0.0)) throw InvalidInput("integrator: dt must be positive");
  } else {
    const auto& rk45 = std::get<Rk45Adaptive>(cfg.method);
    if (!(rk45.rel_tol > 0.0) || !(rk45.abs_tol > 0.0) || !(rk45.dt_max > 0.0)) {
      throw InvalidInput("integrator: tolerances and dt_max must be positive");
    }
  }
}

double renormalize(std::span<double> x, double negative_clip) {
  double sum = 0.0;
  for (double v : x) sum += v;
  const double drift = std::abs(sum - 1.0);
  for (double& v : x) {
    if (v < 0.0) {
      if (v < -negative_clip) {
        throw NumericalError("state component " + format_real(v) +
                             " fell below the negative clip tolerance");
      }
      v = 0.0;
    }
  }
  sum = 0.0;
  for (double v : x) sum += v;
  for (double& v : x) v /= sum;
  return drift;
}

namespace {

class Stepper {
 public:
  Stepper(const MeanDynamics& dyn, IntegrationStats& stats)
      : dyn_(dyn), stats_(stats), n_(dyn.size()) {
    for (auto& k : k_) k.resize(n_);
    tmp_.resize(n_);
  }

  void eval(std::span<const double> x, std::vector<double>& out) {
    dyn_.velocity(x, out);
    ++stats_.rhs_evaluations;
    for (double v : out) {
      if (!std::isfinite(v)) throw NumericalError("non-finite velocity encountered");
    }
  }

  // Classical RK4 step of size h, in place.
  void rk4(std::vector<double>& x, double h) {
    eval(x, k_[0]);
    offset(x, 0.5 * h, k_[0]);
    eval(tmp_, k_[1]);
    offset(x, 0.5 * h, k_[1]);
    eval(tmp_, k_[2]);
    offset(x, h, k_[2]);
    eval(tmp_, k_[3]);
    for (std::size_t i = 0; i < n_; ++i) {
      x[i] += h / 6.0 * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
    }
  }

  // Dormand-Prince 5(4) trial step. Writes the 5th-order solution to x_new and
  // returns the scaled RMS error estimate.
  double dopri(const std::vector<double>& x, double h, std::vector<double>& x_new,
               const Rk45Adaptive& tol, bool have_k1) {
    static constexpr double a[6][6] = {
        {1.0 / 5},
        {3.0 / 40, 9.0 / 40},
        {44.0 / 45, -56.0 / 15, 32.0 / 9},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
        {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
    };
    static constexpr double e[7] = {71.0 / 57600,     0.0,          -71.0 / 16695, 71.0 / 1920,
                                    -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
    if (!have_k1) eval(x, k_[0]);
    for (std::size_t s = 1; s <= 6; ++s) {
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t m = 0; m < s; ++m) acc += a[s - 1][m] * k_[m][i];
        tmp_[i] = x[i] + h * acc;
      }
      if (s == 6) {
        x_new = tmp_;
      }
      eval(tmp_, k_[s]);
    }
    double err = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double ei = 0.0;
      for (std::size_t m = 0; m < 7; ++m) ei += e[m] * k_[m][i];
      ei *= h;
      const double scale = tol.abs_tol + tol.rel_tol * std::max(std::abs(x[i]), std::abs(x_new[i]));
      err += (ei / scale) * (ei / scale);
    }
    return std::sqrt(err / static_cast<double>(n_));
  }

  // First-same-as-last: the last stage of an accepted step is f(x_new).
  void promote_last_stage() { std::swap(k_[0], k_[6]); }

  const std::vector<double>& k1() const { return k_[0]; }

 private:
  // tmp_ = x + h k
  void offset(const std::vector<double>& x, double h, const std::vector<double>& k) {
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * k[i];
  }

  const MeanDynamics& dyn_;
  IntegrationStats& stats_;
  std::size_t n_;
  std::vector<double> k_[7];
  std::vector<double> tmp_;
};

double scaled_norm(std::span<const double> v, std::span<const double> y, const Rk45Adaptive& tol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double s = tol.abs_tol + tol.rel_tol * std::abs(y[i]);
    acc += (v[i] / s) * (v[i] / s);
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

Trajectory integrate(const MeanDynamics& dynamics, std::span<const double> x0,
                     const IntegratorConfig& cfg) {
  validate_integrator_config(cfg);
  if (x0.size() != dynamics.size()) {
    throw InvalidInput("integrate: initial state does not match the support");
  }
  validate_simplex_state(x0, "initial state");

  Trajectory traj;
  traj.support = dynamics.support();

  std::ostringstream fp;
  fp << dynamics.description() << "|t_end=" << format_real(cfg.t_end)
     << "|renorm=" << cfg.renorm_every << "|clip=" << format_real(cfg.negative_clip)
     << "|emit=" << cfg.emission_points << '|';
  if (const auto* rk4 = std::get_if<Rk4Fixed>(&cfg.method)) {
    fp << "rk4(" << format_real(rk4->dt) << ")";
  } else {
    const auto& m = std::get<Rk45Adaptive>(cfg.method);
    fp << "rk45(" << format_real(m.rel_tol) << ',' << format_real(m.abs_tol) << ','
       << format_real(m.dt_max) << ")";
  }
  fp << "|x0=";
  for (double v : x0) fp << format_real(v) << ',';
  traj.config_fingerprint = fingerprint_of(fp.str());

  std::vector<double> emit_times;
  if (cfg.emission_points >= 2) {
    emit_times.resize(cfg.emission_points);
    const double last = static_cast<double>(cfg.emission_points - 1);
    for (std::size_t m = 0; m < cfg.emission_points; ++m) {
      emit_times[m] = (m + 1 == cfg.emission_points) ? cfg.t_end
                                                      : cfg.t_end * static_cast<double>(m) / last;
    }
  }
  const bool every_step = emit_times.empty();

  std::vector<double> x(x0.begin(), x0.end());
  auto& stats = traj.stats;
  auto emit = [&](double t) {
    stats.max_mass_drift = std::max(stats.max_mass_drift, renormalize(x, cfg.negative_clip));
    traj.times.push_back(t);
    traj.states.push_back(x);
  };

  double t = 0.0;
  emit(0.0);
  std::size_t next_emit = 1;
  std::size_t since_renorm = 0;
  const double landing_slack = 1e-12 * cfg.t_end;
  const double min_step = 1e-12 * cfg.t_end;

  Stepper stepper(dynamics, stats);
  std::vector<double> x_new(x.size());

  // Step proposal, kept separate from steps shortened to hit an emission time.
  double h_prop = 0.0;
  bool have_k1 = false;
  const auto* adaptive = std::get_if<Rk45Adaptive>(&cfg.method);
  if (adaptive) {
    std::vector<double> f0(x.size());
    stepper.eval(x, f0);
    const double d0 = scaled_norm(x, x, *adaptive);
    const double d1 = scaled_norm(f0, x, *adaptive);
    h_prop = (d0 > 1e-5 && d1 > 1e-5) ? 0.01 * d0 / d1 : 1e-6 * cfg.t_end;
    h_prop = std::min({h_prop, adaptive->dt_max, cfg.t_end});
  } else {
    h_prop = std::get<Rk4Fixed>(cfg.method).dt;
  }

  while (t < cfg.t_end) {
    const double target = every_step ? cfg.t_end : emit_times[next_emit];
    double h = std::min(h_prop, target - t);
    bool lands = (t + h >= target - landing_slack);
    if (lands) h = target - t;

    if (!adaptive) {
      stepper.rk4(x, h);
      ++stats.accepted_steps;
    } else {
      const double err = stepper.dopri(x, h, x_new, *adaptive, have_k1);
      have_k1 = true;
      const double factor = (err == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (err > 1.0) {
        ++stats.rejected_steps;
        h_prop = h * std::max(factor, 0.2);
        if (h_prop < min_step) {
          throw NumericalError("step size underflow at t = " + format_real(t));
        }
        continue;
      }
      ++stats.accepted_steps;
      x.swap(x_new);
      stepper.promote_last_stage();
      const double grown = h * factor;
      // A step clipped to an emission time says nothing about the achievable size.
      h_prop = std::min(lands ? std::max(grown, h_prop) : grown, adaptive->dt_max);
    }

    t = lands ? target : t + h;
    if (++since_renorm >= cfg.renorm_every) {
      stats.max_mass_drift = std::max(stats.max_mass_drift, renormalize(x, cfg.negative_clip));
      since_renorm = 0;
      have_k1 = false;
    }
    if (every_step || lands) {
      emit(t);
      have_k1 = false;
      if (!every_step) ++next_emit;
    }
  }
  return traj;
}

Trajectory integrate(const PayoffKernel& kernel, const RevisionProtocol& protocol,
                     std::span<const double> support, std::span<const double> x0,
                     std::span<const double> lambda0, const IntegratorConfig& cfg) {
  std::vector<double> lambda;
  if (protocol.reference_mode() == ReferenceMode::Fixed) lambda.assign(lambda0.begin(), lambda0.end());
  const MeanDynamics dyn(kernel, protocol, std::vector<double>(support.begin(), support.end()),
                         std::move(lambda));
  return integrate(dyn, x0, cfg);
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out) {
  out << 't';
  for (double s : trajectory.support) out << ',' << format_real(s);
  out << '\n';
  for (std::size_t r = 0; r < trajectory.times.size(); ++r) {
    out << format_real(trajectory.times[r]);
    for (double w : trajectory.states[r]) out << ',' << format_real(w);
    out << '\n';
  }
}

}  // namespace evodyn

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "evodyn/games.hpp"
#include "evodyn/protocols.hpp"

namespace evodyn {

inline constexpr double kSimplexNegativeFloor = 1e-12;
inline constexpr double kSimplexMassTolerance = 1e-9;

// Throws InvalidInput unless x is a simplex point within the floors above.
void validate_simplex_state(std::span<const double> x, const char* what);

/// Mean-dynamics velocity evaluated term by term from switch rates:
///   v_i = lambda_i sum_j rate(j -> i) x_j - x_i sum_j rate(i -> j) lambda_j.
/// O(n^2). For state-coupled protocols lambda must equal x componentwise
/// (within 1e-12); anything else is a contract violation.
std::vector<double> mean_dynamics_rhs(std::span<const double> x, std::span<const double> lambda,
                                      const RevisionProtocol& protocol,
                                      std::span<const double> rho);

/// Same velocity through closed forms: O(n) for BNN, O(n log n) for Smith and
/// replicator (payoff-sorted prefix sums, ties contribute nothing, so equal
/// payoffs give an exactly zero velocity). For state-coupled protocols lambda
/// is ignored and x stands in for it.
void fast_rhs(const RevisionProtocol& protocol, std::span<const double> x,
              std::span<const double> lambda, std::span<const double> rho, std::span<double> out);

/// A finite game, protocol and reference weights on one support: the right-hand
/// side of the n-strategy ODE.
class MeanDynamics {
 public:
  MeanDynamics(const PayoffKernel& kernel, RevisionProtocol protocol, std::vector<double> support,
               std::vector<double> lambda);

  void velocity(std::span<const double> x, std::span<double> out) const;
  std::vector<double> velocity(std::span<const double> x) const;
  std::vector<double> payoffs(std::span<const double> x) const;

  const DiscretizedGame& game() const { return game_; }
  const RevisionProtocol& protocol() const { return protocol_; }
  const std::vector<double>& support() const { return game_.support(); }
  const std::vector<double>& lambda() const { return lambda_; }
  std::size_t size() const { return game_.size(); }
  const std::string& description() const { return description_; }

 private:
  DiscretizedGame game_;
  RevisionProtocol protocol_;
  std::vector<double> lambda_;
  std::string description_;
};

struct Rk4Fixed {
  double dt = 0.01;
};

struct Rk45Adaptive {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double dt_max = 0.1;
};

struct IntegratorConfig {
  std::variant<Rk4Fixed, Rk45Adaptive> method = Rk45Adaptive{};
  double t_end = 1.0;
  std::size_t renorm_every = 16;
  double negative_clip = 1e-12;
  // 0: emit every accepted step plus t_end. Otherwise this many equispaced
  // times on [0, t_end], both ends included, and steps land exactly on them.
  std::size_t emission_points = 0;
};

void validate_integrator_config(const IntegratorConfig& cfg);

struct IntegrationStats {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
  // Largest |sum x - 1| seen just before a renormalization.
  double max_mass_drift = 0.0;
};

struct Trajectory {
  std::vector<double> support;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::string config_fingerprint;
  IntegrationStats stats;
};

/// Clips entries in [-negative_clip, 0) to zero and rescales to unit mass.
/// Returns |sum - 1| before the correction. Throws NumericalError on an entry
/// below -negative_clip.
double renormalize(std::span<double> x, double negative_clip);

/// Integrates the dynamics from x0 over [0, cfg.t_end]. Every emitted state is
/// renormalized, and the running state is renormalized every renorm_every
/// accepted steps.
Trajectory integrate(const MeanDynamics& dynamics, std::span<const double> x0,
                     const IntegratorConfig& cfg);

// Builds the dynamics from its parts; lambda0 is ignored for state-coupled protocols.
Trajectory integrate(const PayoffKernel& kernel, const RevisionProtocol& protocol,
                     std::span<const double> support, std::span<const double> x0,
                     std::span<const double> lambda0, const IntegratorConfig& cfg);

// Header `t,s_1,...,s_n` with the support points as labels, then one row per time.
void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out);

// %.17g rendering used by every CSV writer.
std::string format_real(double value);

}  // namespace evodyn

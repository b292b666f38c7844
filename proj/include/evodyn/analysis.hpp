#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "evodyn/dynamics.hpp"
#include "evodyn/games.hpp"
#include "evodyn/measures.hpp"
#include "evodyn/protocols.hpp"

namespace evodyn {

/// The game of a study. With scale_by_resolution the kernel is tabulated on
/// each support and multiplied by n, which multiplies every switch rate by n.
struct GameSpec {
  PayoffKernel kernel;
  bool scale_by_resolution = false;

  PayoffKernel on(const std::vector<double>& support) const;
};

// Support, initial state and reference weights of one resolution.
struct Discretization {
  std::vector<double> support;
  std::vector<double> x0;
  std::vector<double> lambda;
};

// Grid support; x0 proportional to the density at the grid points; lambda uniform.
struct GridInit {
  GridPlacement placement = GridPlacement::Endpoints;
  DensitySpec density = UniformDensity{};
};

// i.i.d. support drawn from the reference density with weights 1/n; x0 is
// reweighted by the ratio of the initial density to the reference density.
struct SampledInit {
  DensitySpec reference = UniformDensity{};
  DensitySpec density = UniformDensity{};
  std::uint64_t seed = 0;
};

using InitSpec = std::variant<GridInit, SampledInit>;

Discretization discretize(const InitSpec& init, std::size_t n);

// ---------------------------------------------------------------------------
// Finite-time convergence across resolutions.

// Compare against a high-resolution run of the same study.
struct ReferenceRun {
  std::size_t n = 0;
};

// Compare each run against its own initial measure. This is the exact
// solution when the continuum dynamics are stationary at the initial state.
struct InitialMeasure {};

using ConvergenceReference = std::variant<ReferenceRun, InitialMeasure>;

struct ConvergenceReport {
  std::vector<std::size_t> resolutions;
  std::optional<std::size_t> reference_n;
  std::vector<double> sup_bl;  // aligned with resolutions
  double horizon = 0.0;
  std::vector<double> decay_ratios;
  std::vector<double> times;
  std::vector<std::size_t> excluded;
  std::vector<std::string> warnings;
  // Not serialized: kept for CSV output and post-hoc checks.
  std::vector<Trajectory> trajectories;
  std::optional<Trajectory> reference_trajectory;
};

/// Bounded-Lipschitz distance between two trajectories at each shared time.
std::vector<double> bl_curve(const Trajectory& a, const Trajectory& b);

/// Integrates every resolution (and the reference run) on the shared emission
/// grid of `integrator` and records sup_t d_BL(mu_n(t), mu_ref(t)).
/// A failing reference aborts; a failing resolution is excluded with a warning.
ConvergenceReport convergence_study(const GameSpec& game, const RevisionProtocol& protocol,
                                    const std::vector<std::size_t>& resolutions,
                                    const ConvergenceReference& reference, const InitSpec& init,
                                    const IntegratorConfig& integrator, std::size_t jobs = 0);

// ---------------------------------------------------------------------------
// Equilibria.

struct CertificationConfig {
  double residual_tol = 1e-10;
  double t_max = 20000.0;
  // Step cap while running to rest; the dynamics slow down like 1/n near rest.
  double dt_max = 20.0;
  double poke = 1e-6;
  double poke_return = 1e-7;
  bool polish = true;
  std::uint64_t seed = 0;
};

struct EquilibriumReport {
  std::vector<double> final_state;
  double residual = 0.0;  // ||rhs||_1 at the final state
  double nash_gap = 0.0;  // max_i rho_i - theta . rho
  bool converged = false;
  double time = 0.0;
  std::size_t newton_steps = 0;
};

double nash_gap(const MeanDynamics& dynamics, std::span<const double> theta);

/// Integrates in windows of doubling length (1, 2, 4, ...) until the velocity
/// 1-norm drops below residual_tol or t_max is reached. A converged interior
/// state is then refined by Newton steps on the simplex, each kept
/// only if it lowers the residual and stays nonnegative.
EquilibriumReport equilibrium_run(const MeanDynamics& dynamics, std::span<const double> x0,
                                  const CertificationConfig& cert,
                                  const IntegratorConfig& base = {});

EquilibriumReport equilibrium_run(const PayoffKernel& kernel, const RevisionProtocol& protocol,
                                  std::span<const double> support, std::span<const double> x0,
                                  std::span<const double> lambda0, double residual_tol,
                                  double t_max);

/// Perturbs xbar by cert.poke in l1 towards a random simplex point and checks
/// that the dynamics come back within cert.poke_return before t_max.
bool stability_poke(const MeanDynamics& dynamics, std::span<const double> xbar,
                    const CertificationConfig& cert, std::uint64_t seed,
                    const IntegratorConfig& base = {});

// ---------------------------------------------------------------------------
// Choice mobility and paralysis.

using InitFamily = std::function<std::vector<double>(std::size_t n)>;

// m_n = ceil(epsilon n / 2).
std::size_t section4_block(double epsilon, std::size_t n);

/// x_n(0) = ((1/n + e/(2m)) 1_m, (1/n - e/(2m)) 1_m, (1/n) 1_{n-2m}), which
/// sits at l1 distance e from the uniform state.
std::vector<double> section4_initial_state(double epsilon, std::size_t n);

struct FamilySpec {
  std::vector<std::size_t> resolutions;
  InitFamily init;
  std::string init_name;
  double epsilon = 0.0;
  double threshold = 0.0;
  GridPlacement placement = GridPlacement::Endpoints;
};

enum class MobilityVerdict { MobileOnTestedFamily, ParalysisDetected };

struct ResolutionOutcome {
  std::size_t n = 0;
  bool certified = false;
  bool poke_returned = false;
  EquilibriumReport equilibrium;
  double initial_speed = 0.0;
  std::optional<double> quadratic_bound;  // 2 ||x(0)||_2^2, for -theta payoffs + replicator
  double protocol_cap = 0.0;              // M_n = 2 (max f - min f)
  Trajectory trajectory;
};

struct CoincidenceCheck {
  std::size_t n = 0;
  std::vector<double> limit_distance;  // d_BL(limit measure, mu_n(t)) per emission time
  bool tail_nonincreasing = false;
  bool plateau = false;
};

struct MobilityReport {
  std::vector<ResolutionOutcome> outcomes;  // every requested resolution
  std::vector<std::size_t> excluded;
  std::vector<std::string> warnings;
  std::vector<double> times;
  std::vector<double> envelope;
  double epsilon_floor = 0.0;
  double threshold = 0.0;
  MobilityVerdict verdict = MobilityVerdict::MobileOnTestedFamily;
  std::optional<CoincidenceCheck> coincidence;
};

/// Runs every member of the family to the horizon on the emission grid,
/// certifies each per-n limit (equilibrium_run from the horizon state plus a
/// stability poke) and builds the envelope max_n ||x_n(t) - xbar_n||_1 over the
/// certified members. The floor is the smallest envelope value on the grid;
/// paralysis is reported when it stays at or above the threshold.
MobilityReport paralysis_study(const GameSpec& game, const RevisionProtocol& protocol,
                               const FamilySpec& family, const IntegratorConfig& integrator,
                               const CertificationConfig& cert, std::size_t jobs = 0);

// Recomputes the envelope from stored trajectories and limits.
std::vector<double> envelope_of(const std::vector<ResolutionOutcome>& outcomes);

// ---------------------------------------------------------------------------
// Velocity bounds.

struct VelocityBoundSample {
  double t = 0.0;
  double speed = 0.0;                     // ||v||_1
  std::optional<double> quadratic_bound;  // 2 ||x||_2^2 when payoffs are -theta under replicator
  double rate_cap_bound = 0.0;            // 2 max_{i,j} switch rate
};

std::vector<VelocityBoundSample> velocity_bound_check(const Trajectory& trajectory,
                                                      const MeanDynamics& dynamics);

}  // namespace evodyn

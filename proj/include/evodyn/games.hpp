#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace evodyn {

// f(s, s') = -1 if s == s', else 0.
struct AnticoordinationDiscrete {};

// f(s, s') = -h(|s - s'|) with the quartic bump h(r) = (1 - (r/w)^2)^2 on r < w.
struct AnticoordinationBump {
  double width;
};

// Square table on its own support points; bilinear in between, clamped outside.
struct TabulatedGrid {
  std::vector<double> points;
  std::vector<double> matrix;  // row-major, points.size()^2 entries
};

struct ConstantZero {};

double bump(double r, double width);
double bump_derivative(double r, double width);

/// Payoff kernel f of a linear game F(mu)(s) = int f(s, s') dmu(s').
class PayoffKernel {
 public:
  using Variant = std::variant<AnticoordinationDiscrete, AnticoordinationBump, TabulatedGrid,
                               ConstantZero>;

  explicit PayoffKernel(Variant kind);

  static PayoffKernel anticoordination() { return PayoffKernel(AnticoordinationDiscrete{}); }
  static PayoffKernel bump(double width) { return PayoffKernel(AnticoordinationBump{width}); }
  static PayoffKernel zero() { return PayoffKernel(ConstantZero{}); }
  static PayoffKernel tabulated(std::vector<double> points, std::vector<double> matrix);

  double operator()(double s, double s_prime) const;

  const Variant& kind() const { return kind_; }
  std::string name() const;

 private:
  Variant kind_;
};

/// F restricted to discrete measures on support: values_i = sum_j f(s_i, s_j) theta_j.
/// Evaluated straight from the kernel definition, O(n^2).
std::vector<double> payoff_vector(const PayoffKernel& kernel, std::span<const double> support,
                                  std::span<const double> theta);

/// Tabulates a kernel on a support, multiplying every entry by factor.
PayoffKernel scaled_tabulation(const PayoffKernel& kernel, std::span<const double> support,
                               double factor);

/// Precomputed payoff operator on a fixed support, used in the integration
/// inner loop. The discrete anticoordination kernel on distinct points is the
/// map theta -> -theta and is applied without a matrix.
class DiscretizedGame {
 public:
  DiscretizedGame(const PayoffKernel& kernel, std::vector<double> support);

  void apply(std::span<const double> theta, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> theta) const;

  const std::vector<double>& support() const { return support_; }
  std::size_t size() const { return support_.size(); }

  // Smallest and largest f(s_i, s_j) over the support.
  double min_entry() const { return min_entry_; }
  double max_entry() const { return max_entry_; }
  bool is_discrete_anticoordination() const { return mode_ == Mode::Negate; }

 private:
  enum class Mode { Negate, Zero, Dense };
  Mode mode_;
  std::vector<double> support_;
  std::vector<double> matrix_;
  double min_entry_ = 0.0;
  double max_entry_ = 0.0;
};

struct ProbeReport {
  double bound_estimate = 0.0;
  double lip_s_estimate = 0.0;
  // Estimates at the coarse (1e-3) and fine (1e-6) probe separations.
  double lip_s_coarse = 0.0;
  double lip_s_fine = 0.0;
  double lip_measure_estimate = 0.0;
  bool diverging = false;
};

inline constexpr double kProbeCoarseSeparation = 1e-3;
inline constexpr double kProbeFineSeparation = 1e-6;
inline constexpr double kProbeDivergenceRatio = 10.0;
inline constexpr std::size_t kProbeMeasureGrid = 32;

/// Heuristic Monte-Carlo probe of boundedness and Lipschitz continuity of a
/// kernel. The estimates are lower bounds on the true constants.
///
/// Difference quotients are sampled at the two separations above, both off
/// the diagonal and on it (s' = s), where discontinuous kernels blow up. The
/// kernel is flagged as diverging when the fine-separation estimate is at least
/// ten times the coarse one. The measure-Lipschitz estimate compares sup-norm
/// payoff differences to bounded-Lipschitz distances of random simplex points on
/// a 32-point grid.
ProbeReport assumption1_probe(const PayoffKernel& kernel, std::size_t sample_count,
                              std::uint64_t seed);

}  // namespace evodyn

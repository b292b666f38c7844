#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace evodyn {

// Support points closer than this are treated as one point.
inline constexpr double kPointMergeTolerance = 1e-12;
inline constexpr double kMassTolerance = 1e-12;

/// Finitely supported probability measure on [0, 1].
///
/// Points are strictly increasing; near-duplicate points are merged by summing
/// their weights, and the weights are rescaled to unit mass when the input sum
/// is off by more than kMassTolerance.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<double> points, std::vector<double> weights);

  static DiscreteMeasure dirac(double point);

  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return points_.size(); }

  double total_mass() const;

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
};

enum class GridPlacement { Endpoints, Midpoints };

// Grid points only; Endpoints needs n >= 2.
std::vector<double> grid_points(std::size_t n, GridPlacement placement);

// Uniform weights 1/n on the grid.
DiscreteMeasure make_grid_measure(std::size_t n, GridPlacement placement);

struct UniformDensity {};

// Piecewise-constant density: values[k] on [breaks[k], breaks[k+1]), zero
// outside [breaks.front(), breaks.back()]. Mass is normalized on construction.
class PiecewiseDensity {
 public:
  PiecewiseDensity(std::vector<double> breaks, std::vector<double> values);

  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double s) const;
  double inverse_cdf(double u) const;

 private:
  std::vector<double> breaks_;
  std::vector<double> values_;
  std::vector<double> cdf_;  // cdf_[k] = mass on [breaks[0], breaks[k])
};

using DensitySpec = std::variant<UniformDensity, PiecewiseDensity>;

double evaluate_density(const DensitySpec& density, double s);

/// n i.i.d. inverse-CDF draws with weight 1/n each. A pure function of
/// (density, n, seed): the generator is std::mt19937_64 and uniforms are built
/// from its top 53 bits, so the result does not depend on the standard library.
DiscreteMeasure sample_measure(const DensitySpec& density, std::size_t n, std::uint64_t seed);

// Deterministic uniform in [0, 1) from a 64-bit draw.
inline double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform draw from the simplex (flat Dirichlet) via normalized exponentials.
std::vector<double> sample_simplex(std::mt19937_64& rng, std::size_t n);

}  // namespace evodyn

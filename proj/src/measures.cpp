#include "evodyn/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "evodyn/errors.hpp"

namespace evodyn {

DiscreteMeasure::DiscreteMeasure(std::vector<double> points, std::vector<double> weights) {
  if (points.size() != weights.size()) {
    throw InvalidInput("measure: points and weights differ in length");
  }
  if (points.empty()) {
    throw InvalidInput("measure: empty support");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i]) || points[i] < 0.0 || points[i] > 1.0) {
      throw InvalidInput("measure: support point outside [0,1]: " + std::to_string(points[i]));
    }
    if (!std::isfinite(weights[i]) || weights[i] < 0.0) {
      throw InvalidInput("measure: negative or non-finite weight");
    }
  }

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });

  points_.reserve(points.size());
  weights_.reserve(points.size());
  for (std::size_t idx : order) {
    if (!points_.empty() && points[idx] - points_.back() < kPointMergeTolerance) {
      weights_.back() += weights[idx];
    } else {
      points_.push_back(points[idx]);
      weights_.push_back(weights[idx]);
    }
  }

  const double sum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (!(sum > 0.0)) {
    throw InvalidInput("measure: total mass must be positive");
  }
  if (std::abs(sum - 1.0) > kMassTolerance) {
    for (double& w : weights_) w /= sum;
  }
}

DiscreteMeasure DiscreteMeasure::dirac(double point) { return DiscreteMeasure({point}, {1.0}); }

double DiscreteMeasure::total_mass() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

std::vector<double> grid_points(std::size_t n, GridPlacement placement) {
  if (n == 0) throw InvalidInput("grid: n must be positive");
  std::vector<double> pts(n);
  switch (placement) {
    case GridPlacement::Endpoints:
      if (n < 2) throw InvalidInput("grid: Endpoints placement needs n >= 2");
      for (std::size_t i = 0; i < n; ++i) {
        pts[i] = static_cast<double>(i) / static_cast<double>(n - 1);
      }
      break;
    case GridPlacement::Midpoints:
      for (std::size_t i = 0; i < n; ++i) {
        pts[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      }
      break;
  }
  return pts;
}

DiscreteMeasure make_grid_measure(std::size_t n, GridPlacement placement) {
  auto pts = grid_points(n, placement);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  return DiscreteMeasure(std::move(pts), std::move(w));
}

PiecewiseDensity::PiecewiseDensity(std::vector<double> breaks, std::vector<double> values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
  if (breaks_.size() < 2 || values_.size() + 1 != breaks_.size()) {
    throw InvalidInput("piecewise density: need k+1 breaks for k values");
  }
  for (std::size_t k = 0; k < breaks_.size(); ++k) {
    if (!std::isfinite(breaks_[k]) || breaks_[k] < 0.0 || breaks_[k] > 1.0) {
      throw InvalidInput("piecewise density: breaks must lie in [0,1]");
    }
    if (k > 0 && !(breaks_[k] > breaks_[k - 1])) {
      throw InvalidInput("piecewise density: breaks must be strictly increasing");
    }
  }
  double mass = 0.0;
  cdf_.assign(breaks_.size(), 0.0);
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k]) || values_[k] < 0.0) {
      throw InvalidInput("piecewise density: negative value");
    }
    mass += values_[k] * (breaks_[k + 1] - breaks_[k]);
    cdf_[k + 1] = mass;
  }
  if (!(mass > 0.0)) throw InvalidInput("piecewise density: zero total mass");
  for (double& v : values_) v /= mass;
  for (double& c : cdf_) c /= mass;
}

double PiecewiseDensity::operator()(double s) const {
  if (s < breaks_.front() || s > breaks_.back()) return 0.0;
  if (s == breaks_.back()) return values_.back();
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
  return values_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
}

double PiecewiseDensity::inverse_cdf(double u) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
  k = std::clamp<std::size_t>(k, 1, values_.size()) - 1;
  // Rounding in the cdf can leave u past the last positive piece.
  while (values_[k] == 0.0 && k > 0) --k;
  const double s = breaks_[k] + (u - cdf_[k]) / values_[k];
  return std::clamp(s, breaks_[k], breaks_[k + 1]);
}

double evaluate_density(const DensitySpec& density, double s) {
  if (const auto* pw = std::get_if<PiecewiseDensity>(&density)) return (*pw)(s);
  return (s >= 0.0 && s <= 1.0) ? 1.0 : 0.0;
}

DiscreteMeasure sample_measure(const DensitySpec& density, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidInput("sample_measure: n must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> pts(n);
  for (auto& p : pts) {
    const double u = unit_uniform(rng());
    if (const auto* pw = std::get_if<PiecewiseDensity>(&density)) {
      p = pw->inverse_cdf(u);
    } else {
      p = u;
    }
  }
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  return DiscreteMeasure(std::move(pts), std::move(w));
}

std::vector<double> sample_simplex(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> x(n);
  double sum = 0.0;
  for (auto& v : x) {
    v = -std::log1p(-unit_uniform(rng()));
    sum += v;
  }
  if (!(sum > 0.0)) {
    x.assign(n, 1.0 / static_cast<double>(n));
    return x;
  }
  for (auto& v : x) v /= sum;
  return x;
}

}  // namespace evodyn

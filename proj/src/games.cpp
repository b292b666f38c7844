#include "evodyn/games.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "evodyn/errors.hpp"
#include "evodyn/measures.hpp"
#include "evodyn/metric.hpp"

namespace evodyn {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_increasing(std::span<const double> pts, const char* what) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(pts[i])) throw InvalidInput(std::string(what) + ": non-finite point");
    if (i > 0 && !(pts[i] > pts[i - 1])) {
      throw InvalidInput(std::string(what) + ": support must be strictly increasing");
    }
  }
}

// Position of s in the table: lower index and interpolation fraction.
std::pair<std::size_t, double> locate(const std::vector<double>& pts, double s) {
  if (pts.size() == 1 || s <= pts.front()) return {0, 0.0};
  if (s >= pts.back()) return {pts.size() - 1, 0.0};
  auto it = std::upper_bound(pts.begin(), pts.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - pts.begin()) - 1;
  return {k, (s - pts[k]) / (pts[k + 1] - pts[k])};
}

double tabulated_value(const TabulatedGrid& tab, double s, double sp) {
  const std::size_t n = tab.points.size();
  auto [i, a] = locate(tab.points, s);
  auto [j, b] = locate(tab.points, sp);
  auto at = [&](std::size_t r, std::size_t c) { return tab.matrix[r * n + c]; };
  const std::size_t i1 = std::min(i + 1, n - 1);
  const std::size_t j1 = std::min(j + 1, n - 1);
  double v = (1.0 - a) * (1.0 - b) * at(i, j);
  if (b > 0.0) v += (1.0 - a) * b * at(i, j1);
  if (a > 0.0) v += a * (1.0 - b) * at(i1, j);
  if (a > 0.0 && b > 0.0) v += a * b * at(i1, j1);
  return v;
}

}  // namespace

double bump(double r, double width) {
  r = std::abs(r);
  if (r >= width) return 0.0;
  const double q = r / width;
  const double u = 1.0 - q * q;
  return u * u;
}

double bump_derivative(double r, double width) {
  if (std::abs(r) >= width) return 0.0;
  const double q = r / width;
  return -4.0 * q / width * (1.0 - q * q);
}

PayoffKernel::PayoffKernel(Variant kind) : kind_(std::move(kind)) {
  std::visit(Overloaded{
                 [](const AnticoordinationBump& b) {
                   if (!(b.width > 0.0 && b.width <= 1.0)) {
                     throw InvalidInput("bump kernel: width must lie in (0, 1]");
                   }
                 },
                 [](const TabulatedGrid& t) {
                   if (t.points.empty()) throw InvalidInput("tabulated kernel: empty support");
                   require_increasing(t.points, "tabulated kernel");
                   if (t.matrix.size() != t.points.size() * t.points.size()) {
                     throw InvalidInput("tabulated kernel: matrix must be square over the points");
                   }
                   for (double v : t.matrix) {
                     if (!std::isfinite(v)) throw InvalidInput("tabulated kernel: non-finite entry");
                   }
                 },
                 [](const auto&) {},
             },
             kind_);
}

PayoffKernel PayoffKernel::tabulated(std::vector<double> points, std::vector<double> matrix) {
  return PayoffKernel(TabulatedGrid{std::move(points), std::move(matrix)});
}

double PayoffKernel::operator()(double s, double s_prime) const {
  return std::visit(Overloaded{
                        [&](const AnticoordinationDiscrete&) { return s == s_prime ? -1.0 : 0.0; },
                        [&](const AnticoordinationBump& b) { return -evodyn::bump(s - s_prime, b.width); },
                        [&](const TabulatedGrid& t) { return tabulated_value(t, s, s_prime); },
                        [](const ConstantZero&) { return 0.0; },
                    },
                    kind_);
}

std::string PayoffKernel::name() const {
  return std::visit(Overloaded{
                        [](const AnticoordinationDiscrete&) { return std::string("anticoordination"); },
                        [](const AnticoordinationBump&) { return std::string("bump"); },
                        [](const TabulatedGrid&) { return std::string("tabulated"); },
                        [](const ConstantZero&) { return std::string("zero"); },
                    },
                    kind_);
}

std::vector<double> payoff_vector(const PayoffKernel& kernel, std::span<const double> support,
                                  std::span<const double> theta) {
  if (support.size() != theta.size()) {
    throw InvalidInput("payoff_vector: support and theta differ in length");
  }
  const std::size_t n = support.size();
  std::vector<double> values(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += kernel(support[i], support[j]) * theta[j];
    values[i] = acc;
  }
  return values;
}

PayoffKernel scaled_tabulation(const PayoffKernel& kernel, std::span<const double> support,
                               double factor) {
  const std::size_t n = support.size();
  std::vector<double> matrix(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) matrix[i * n + j] = factor * kernel(support[i], support[j]);
  }
  return PayoffKernel::tabulated(std::vector<double>(support.begin(), support.end()),
                                 std::move(matrix));
}

DiscretizedGame::DiscretizedGame(const PayoffKernel& kernel, std::vector<double> support)
    : support_(std::move(support)) {
  if (support_.empty()) throw InvalidInput("discretized game: empty support");
  require_increasing(support_, "discretized game");
  const std::size_t n = support_.size();
  if (std::holds_alternative<AnticoordinationDiscrete>(kernel.kind())) {
    mode_ = Mode::Negate;
    min_entry_ = -1.0;
    max_entry_ = n > 1 ? 0.0 : -1.0;
    return;
  }
  if (std::holds_alternative<ConstantZero>(kernel.kind())) {
    mode_ = Mode::Zero;
    return;
  }
  mode_ = Mode::Dense;
  matrix_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) matrix_[i * n + j] = kernel(support_[i], support_[j]);
  }
  auto [lo, hi] = std::minmax_element(matrix_.begin(), matrix_.end());
  min_entry_ = *lo;
  max_entry_ = *hi;
}

void DiscretizedGame::apply(std::span<const double> theta, std::span<double> out) const {
  const std::size_t n = support_.size();
  if (theta.size() != n || out.size() != n) {
    throw InvalidInput("discretized game: state length does not match support");
  }
  switch (mode_) {
    case Mode::Negate:
      for (std::size_t i = 0; i < n; ++i) out[i] = -theta[i];
      break;
    case Mode::Zero:
      std::fill(out.begin(), out.end(), 0.0);
      break;
    case Mode::Dense:
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = matrix_.data() + i * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * theta[j];
        out[i] = acc;
      }
      break;
  }
}

std::vector<double> DiscretizedGame::apply(std::span<const double> theta) const {
  std::vector<double> out(support_.size());
  apply(theta, out);
  return out;
}

ProbeReport assumption1_probe(const PayoffKernel& kernel, std::size_t sample_count,
                              std::uint64_t seed) {
  if (sample_count < 2) throw InvalidInput("assumption1_probe: sample_count must be >= 2");
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return unit_uniform(rng()); };

  ProbeReport report;
  for (std::size_t k = 0; k < sample_count; ++k) {
    const double s = uniform();
    const double sp = uniform();
    report.bound_estimate =
        std::max({report.bound_estimate, std::abs(kernel(s, sp)), std::abs(kernel(s, s))});

    for (double sep : {kProbeCoarseSeparation, kProbeFineSeparation}) {
      const double t = (s + sep <= 1.0) ? s + sep : s - sep;
      const double gap = std::abs(s - t);
      if (gap < kProbeFineSeparation * (1.0 - 1e-9)) continue;
      double q = 0.0;
      for (double anchor : {sp, s}) {
        q = std::max(q, std::abs(kernel(s, anchor) - kernel(t, anchor)) / gap);
      }
      double& slot = (sep == kProbeCoarseSeparation) ? report.lip_s_coarse : report.lip_s_fine;
      slot = std::max(slot, q);
    }
  }
  report.lip_s_estimate = std::max(report.lip_s_coarse, report.lip_s_fine);
  report.diverging = report.lip_s_fine > 0.0 &&
                     report.lip_s_fine >= kProbeDivergenceRatio * report.lip_s_coarse;

  const auto grid = grid_points(kProbeMeasureGrid, GridPlacement::Endpoints);
  const DiscretizedGame game(kernel, grid);
  for (std::size_t k = 0; k < sample_count; ++k) {
    const auto a = sample_simplex(rng, grid.size());
    const auto b = sample_simplex(rng, grid.size());
    const double d = bl_distance(DiscreteMeasure(grid, a), DiscreteMeasure(grid, b)).distance;
    if (!(d > 1e-12)) continue;
    const auto fa = game.apply(a);
    const auto fb = game.apply(b);
    double sup = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) sup = std::max(sup, std::abs(fa[i] - fb[i]));
    report.lip_measure_estimate = std::max(report.lip_measure_estimate, sup / d);
  }
  return report;
}

}  // namespace evodyn

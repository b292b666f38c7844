#include "evodyn/metric.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "evodyn/errors.hpp"

namespace evodyn {

namespace {

// One linear piece of a concave value function on [-1, 1]. Pieces are kept in
// order of strictly decreasing slope, left to right.
struct Segment {
  double slope;
  double length;
};

struct ArgmaxInterval {
  double lo;
  double hi;
};

ArgmaxInterval argmax_of(const std::deque<Segment>& segs) {
  double lo = -1.0;
  double plateau = 0.0;
  for (const auto& s : segs) {
    if (s.slope > 0.0) {
      lo += s.length;
    } else {
      if (s.slope == 0.0) plateau = s.length;
      break;
    }
  }
  lo = std::clamp(lo, -1.0, 1.0);
  return {lo, std::clamp(lo + plateau, -1.0, 1.0)};
}

}  // namespace

BLResult bl_chain_lp(std::span<const double> points, std::span<const double> signed_mass) {
  const std::size_t k = points.size();
  if (k == 0 || signed_mass.size() != k) {
    throw InvalidInput("bl_chain_lp: points and masses must be non-empty and equal in length");
  }
  for (std::size_t i = 1; i < k; ++i) {
    if (!(points[i] > points[i - 1])) {
      throw InvalidInput("bl_chain_lp: points must be strictly increasing");
    }
  }

  // V_0(g) = c_0 g on [-1, 1], stored as its value at g = -1 plus slopes.
  std::deque<Segment> segs{{signed_mass[0], 2.0}};
  double left_value = -signed_mass[0];
  std::vector<ArgmaxInterval> argmax(k);

  for (std::size_t i = 1; i < k; ++i) {
    argmax[i - 1] = argmax_of(segs);
    const double gap = points[i] - points[i - 1];

    // W(g) = max_{|g' - g| <= gap} V(g'): the rising part slides left, the
    // falling part slides right and the peak widens into a plateau.
    double rem = gap;
    while (rem > 0.0 && !segs.empty() && segs.front().slope > 0.0) {
      auto& front = segs.front();
      const double take = std::min(front.length, rem);
      left_value += front.slope * take;
      front.length -= take;
      rem -= take;
      if (front.length <= 0.0) segs.pop_front();
    }
    rem = gap;
    while (rem > 0.0 && !segs.empty() && segs.back().slope < 0.0) {
      auto& back = segs.back();
      const double take = std::min(back.length, rem);
      back.length -= take;
      rem -= take;
      if (back.length <= 0.0) segs.pop_back();
    }
    double total = 0.0;
    for (const auto& s : segs) total += s.length;
    const double plateau = 2.0 - total;
    if (plateau > 0.0) {
      auto pos = std::find_if(segs.begin(), segs.end(),
                              [](const Segment& s) { return s.slope <= 0.0; });
      if (pos != segs.end() && pos->slope == 0.0) {
        pos->length += plateau;
      } else {
        segs.insert(pos, Segment{0.0, plateau});
      }
    }

    for (auto& s : segs) s.slope += signed_mass[i];
    left_value -= signed_mass[i];
  }
  argmax[k - 1] = argmax_of(segs);

  double best = left_value;
  for (const auto& s : segs) {
    if (s.slope <= 0.0) break;
    best += s.slope * s.length;
  }

  BLResult result;
  result.support.assign(points.begin(), points.end());
  result.witness.assign(k, 0.0);
  result.witness[k - 1] = std::clamp(0.0, argmax[k - 1].lo, argmax[k - 1].hi);
  for (std::size_t i = k - 1; i-- > 0;) {
    const double next = result.witness[i + 1];
    const double gap = points[i + 1] - points[i];
    const double g = std::clamp(next, argmax[i].lo, argmax[i].hi);
    result.witness[i] = std::clamp(g, next - gap, next + gap);
  }
  result.distance = std::clamp(best, 0.0, 2.0);
  // Total mass zero makes the optimum shift-invariant, so the witness is never
  // unique; only a vanishing objective leaves it meaningless.
  double largest = 0.0;
  for (double c : signed_mass) largest = std::max(largest, std::abs(c));
  result.status = largest <= kMassTolerance ? SolverStatus::Degenerate : SolverStatus::Optimal;
  return result;
}

BLResult bl_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto& pa = mu.points();
  const auto& wa = mu.weights();
  const auto& pb = nu.points();
  const auto& wb = nu.weights();

  std::vector<double> pts;
  std::vector<double> mass;
  pts.reserve(pa.size() + pb.size());
  mass.reserve(pa.size() + pb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < pa.size() || j < pb.size()) {
    if (j == pb.size() || (i < pa.size() && pa[i] < pb[j] - kPointMergeTolerance)) {
      pts.push_back(pa[i]);
      mass.push_back(wa[i]);
      ++i;
    } else if (i == pa.size() || pb[j] < pa[i] - kPointMergeTolerance) {
      pts.push_back(pb[j]);
      mass.push_back(-wb[j]);
      ++j;
    } else {
      pts.push_back(pa[i]);
      mass.push_back(wa[i] - wb[j]);
      ++i;
      ++j;
    }
  }

  if (std::all_of(mass.begin(), mass.end(), [](double m) { return m == 0.0; })) {
    BLResult zero;
    zero.support = std::move(pts);
    zero.witness.assign(zero.support.size(), 0.0);
    return zero;
  }
  return bl_chain_lp(pts, mass);
}

double l1_state_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("l1_state_distance: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d += std::abs(x[i] - y[i]);
  return d;
}

}  // namespace evodyn

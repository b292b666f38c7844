#pragma once

#include <span>
#include <vector>

#include "evodyn/measures.hpp"

namespace evodyn {

enum class SolverStatus { Optimal, Degenerate };

struct BLResult {
  double distance = 0.0;
  // Optimal test function values, one per union-support point (ascending).
  std::vector<double> witness;
  std::vector<double> support;
  SolverStatus status = SolverStatus::Optimal;
};

/// Bounded-Lipschitz distance sup{ int g d(mu - nu) : |g| <= 1, Lip(g) <= 1 }.
///
/// On a line the Lipschitz constraints reduce to adjacent pairs of the sorted
/// union support, so the LP is a chain: maximize sum c_i g_i subject to
/// |g_i| <= 1 and |g_{i+1} - g_i| <= gap_i. It is solved exactly by dynamic
/// programming over concave piecewise-linear value functions. The witness is
/// recovered by backtracking and is the optimum closest to g = 0 at the last
/// point. Status is Degenerate when every signed mass is below kMassTolerance,
/// so that any feasible g is optimal.
BLResult bl_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// The chain LP itself on sorted, distinct points with signed masses c.
BLResult bl_chain_lp(std::span<const double> points, std::span<const double> signed_mass);

double l1_state_distance(std::span<const double> x, std::span<const double> y);

}  // namespace evodyn

#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace evodyn {

enum class ProtocolKind { Replicator, BNN, Smith };

// StateCoupled: the reference measure is the current state (lambda = x).
enum class ReferenceMode { StateCoupled, Fixed };

struct RevisionProtocol {
  ProtocolKind kind = ProtocolKind::Replicator;

  ReferenceMode reference_mode() const {
    return kind == ProtocolKind::Replicator ? ReferenceMode::StateCoupled : ReferenceMode::Fixed;
  }
  std::string name() const;
};

RevisionProtocol parse_protocol(const std::string& name);

/// Rate of switching from strategy i to strategy j (0-based) at state theta
/// with payoffs rho.
///
/// Replicator and Smith: max{0, rho_j - rho_i}.
/// BNN: max{0, rho_j - theta . rho}.
double switch_rate(const RevisionProtocol& protocol, std::size_t i, std::size_t j,
                   std::span<const double> theta, std::span<const double> rho);

// max_{i,j} switch_rate, computed in O(n).
double max_switch_rate(const RevisionProtocol& protocol, std::span<const double> theta,
                       std::span<const double> rho);

}  // namespace evodyn

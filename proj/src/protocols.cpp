#include "evodyn/protocols.hpp"

#include <algorithm>

#include "evodyn/errors.hpp"

namespace evodyn {

namespace {

double mean_payoff(std::span<const double> theta, std::span<const double> rho) {
  double m = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) m += theta[k] * rho[k];
  return m;
}

}  // namespace

std::string RevisionProtocol::name() const {
  switch (kind) {
    case ProtocolKind::Replicator:
      return "replicator";
    case ProtocolKind::BNN:
      return "bnn";
    case ProtocolKind::Smith:
      return "smith";
  }
  return "unknown";
}

RevisionProtocol parse_protocol(const std::string& name) {
  if (name == "replicator") return {ProtocolKind::Replicator};
  if (name == "bnn") return {ProtocolKind::BNN};
  if (name == "smith") return {ProtocolKind::Smith};
  throw InvalidInput("unknown protocol '" + name + "' (expected replicator, bnn or smith)");
}

double switch_rate(const RevisionProtocol& protocol, std::size_t i, std::size_t j,
                   std::span<const double> theta, std::span<const double> rho) {
  if (theta.size() != rho.size()) throw InvalidInput("switch_rate: theta and rho differ in length");
  if (i >= rho.size() || j >= rho.size()) throw InvalidInput("switch_rate: index out of range");
  switch (protocol.kind) {
    case ProtocolKind::Replicator:
    case ProtocolKind::Smith:
      return std::max(0.0, rho[j] - rho[i]);
    case ProtocolKind::BNN:
      return std::max(0.0, rho[j] - mean_payoff(theta, rho));
  }
  return 0.0;
}

double max_switch_rate(const RevisionProtocol& protocol, std::span<const double> theta,
                       std::span<const double> rho) {
  if (theta.size() != rho.size()) {
    throw InvalidInput("max_switch_rate: theta and rho differ in length");
  }
  if (rho.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(rho.begin(), rho.end());
  if (protocol.kind == ProtocolKind::BNN) return std::max(0.0, *hi - mean_payoff(theta, rho));
  return *hi - *lo;
}

}  // namespace evodyn

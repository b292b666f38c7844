#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evodyn/analysis.hpp"
#include "evodyn/errors.hpp"
#include "json.hpp"

namespace evodyn {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::size_t kDefaultEmissionPoints = 200;

class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

enum class Study { Simulate, Converge, Paralysis, Equilibrium, BlDist, Probe };

std::string study_name(Study study);
std::optional<Study> parse_study(const std::string& name);

// Piecewise parsers for the JSON schema; all throw ConfigError.
PayoffKernel parse_kernel(const Json& j);
DensitySpec parse_density(const Json& j);
GridPlacement parse_placement(const std::string& s);
DiscreteMeasure parse_measure(const Json& j);

Json kernel_to_json(const PayoffKernel& kernel);
Json density_to_json(const DensitySpec& density);
std::string placement_name(GridPlacement placement);

/// Initial condition for one resolution on a grid or sampled support.
struct StateInit {
  enum class Kind { Grid, Samples, Section4, Explicit, Random };
  Kind kind = Kind::Grid;
  InitSpec spec = GridInit{};
  double epsilon = 0.0;          // Section4
  std::vector<double> weights;   // Explicit
  std::uint64_t seed = 0;        // Random: uniform draw from the simplex
  GridPlacement placement = GridPlacement::Endpoints;

  Discretization build(std::size_t n) const;
};

/// A validated run configuration. `resolved` echoes every setting with its
/// default filled in; it excludes output_dir so that relocating outputs does
/// not change the fingerprint.
struct RunConfig {
  Study study = Study::Simulate;
  Json resolved;
  std::string fingerprint;
  std::string output_dir;
  std::optional<std::uint64_t> seed_override;

  std::optional<GameSpec> game;
  RevisionProtocol protocol;
  GridPlacement placement = GridPlacement::Endpoints;
  IntegratorConfig integrator;
  std::uint64_t seed = 0;
  bool write_trajectories = true;

  std::size_t n = 0;                     // simulate, equilibrium
  StateInit init;                        // simulate, converge, equilibrium, paralysis family
  std::vector<std::size_t> resolutions;  // converge, paralysis
  ConvergenceReference reference = InitialMeasure{};
  double threshold = 0.0;                // paralysis
  CertificationConfig certification;     // paralysis, equilibrium
  std::size_t sample_count = 0;          // probe
  std::optional<DiscreteMeasure> mu;     // bl-dist
  std::optional<DiscreteMeasure> nu;
};

/// Validates a config document strictly (unknown keys are errors). When
/// `expected` is set, a "study" key in the document must agree with it.
RunConfig parse_run_config(const Json& doc, std::optional<Study> expected,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

Json read_json_file(const std::string& path);

struct OutputFile {
  std::string name;
  std::string content;
};

struct StudyOutput {
  Json report;
  std::vector<OutputFile> files;  // report.json, CSVs and manifest.json
};

/// Runs the configured study entirely in memory. Output content depends only
/// on the config, never on `jobs`.
StudyOutput execute(const RunConfig& config, std::size_t jobs);

// Serializers shared by the CLI and tests.
Json convergence_results(const ConvergenceReport& report);
Json mobility_results(const MobilityReport& report);
Json equilibrium_results(const EquilibriumReport& report);
std::string sup_bl_csv(const ConvergenceReport& report);
std::string envelope_csv(const MobilityReport& report);

}  // namespace evodyn

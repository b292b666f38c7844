#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "evodyn/config.hpp"
#include "evodyn/metric.hpp"

namespace fs = std::filesystem;
using namespace evodyn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("EVODYN_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  std::string s(raw);
  if (s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("EVODYN_SEED: expected a nonnegative integer");
  }
  try {
    return std::stoull(s);
  } catch (const std::out_of_range&) {
    throw ConfigError("EVODYN_SEED: out of range");
  }
}

void write_outputs(const RunConfig& config, const StudyOutput& output) {
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  for (const auto& file : output.files) {
    std::ofstream out(dir / file.name, std::ios::binary | std::ios::trunc);
    out << file.content;
    if (!out) throw std::runtime_error("cannot write " + (dir / file.name).string());
  }
}

int run_bl_dist(const std::string& mu_path, const std::string& nu_path) {
  const auto mu = parse_measure(read_json_file(mu_path));
  const auto nu = parse_measure(read_json_file(nu_path));
  std::cout << format_real(bl_distance(mu, nu).distance) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean dynamics of population games on finite strategy grids"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mu_path;
  std::string nu_path;
  std::size_t jobs = 0;
  bool dry_run = false;

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "Integrate one trajectory"},
      {"converge", "Bounded-Lipschitz convergence across resolutions"},
      {"paralysis", "Mobility envelope over an initial-state family"},
      {"equilibrium", "Run to rest and certify the equilibrium"},
      {"bl-dist", "Bounded-Lipschitz distance between two measures"},
      {"probe", "Heuristic Lipschitz probe of a payoff kernel"},
  };
  for (const auto& [name, about] : commands) {
    auto* sub = app.add_subcommand(name, about);
    auto* cfg = sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--jobs", jobs, "Parallel integration tasks (default: all cores)");
    sub->add_flag("--dry-run", dry_run, "Validate and print the resolved config");
    if (std::string(name) == "bl-dist") {
      auto* mu = sub->add_option("--mu", mu_path, "Measure JSON {points, weights}");
      auto* nu = sub->add_option("--nu", nu_path, "Measure JSON {points, weights}");
      mu->needs(nu);
      nu->needs(mu);
      mu->excludes(cfg);
      nu->excludes(cfg);
    } else {
      cfg->required();
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  const Study study = *parse_study(sub);

  try {
    if (study == Study::BlDist && config_path.empty()) {
      if (mu_path.empty()) throw ConfigError("bl-dist needs --config or both --mu and --nu");
      return run_bl_dist(mu_path, nu_path);
    }
    const RunConfig config = parse_run_config(read_json_file(config_path), study, seed_from_env());
    if (dry_run) {
      std::cout << config.resolved.dump(2) << "\n";
      return 0;
    }
    const StudyOutput output = execute(config, jobs);
    if (!config.output_dir.empty()) write_outputs(config, output);
    if (study == Study::BlDist) {
      std::cout << format_real(output.report.at("results").at("distance").get<double>()) << "\n";
    }
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "evodyn: numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidInput& e) {
    std::cerr << "evodyn: invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "evodyn: " << e.what() << "\n";
    return 1;
  }
}

#include "evodyn/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "evodyn/fingerprint.hpp"
#include "evodyn/metric.hpp"

namespace evodyn {

namespace {

using Keys = std::initializer_list<const char*>;

void check_keys(const Json& obj, Keys allowed, const std::string& ctx) {
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError(ctx + ": unknown key '" + item.key() + "'");
  }
}

const Json& require(const Json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key)) throw ConfigError(ctx + ": missing required key '" + key + "'");
  return obj.at(key);
}

double as_real(const Json& v, const std::string& ctx) {
  if (!v.is_number()) throw ConfigError(ctx + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(ctx + ": expected a finite number");
  return d;
}

double positive_real(const Json& v, const std::string& ctx) {
  const double d = as_real(v, ctx);
  if (!(d > 0.0)) throw ConfigError(ctx + ": must be positive");
  return d;
}

std::size_t positive_int(const Json& v, const std::string& ctx) {
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ConfigError(ctx + ": expected a positive integer");
  }
  return v.get<std::size_t>();
}

std::uint64_t seed_value(const Json& v, const std::string& ctx) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                  v.get<long long>() < 0)) {
    throw ConfigError(ctx + ": expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<double> real_list(const Json& v, const std::string& ctx) {
  if (!v.is_array()) throw ConfigError(ctx + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_real(e, ctx));
  return out;
}

std::string as_string(const Json& v, const std::string& ctx) {
  if (!v.is_string()) throw ConfigError(ctx + ": expected a string");
  return v.get<std::string>();
}

// Re-throws library validation failures as configuration errors.
template <class Fn>
auto guarded(const std::string& ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

IntegratorConfig parse_integrator(const Json* block, double t_end, std::size_t emission_points,
                                  Json& resolved) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.emission_points = emission_points;
  const Json empty = Json::object();
  const Json& b = block ? *block : empty;
  const std::string method = b.contains("method") ? as_string(b.at("method"), "integrator.method")
                                                  : std::string("rk45");
  if (method == "rk45") {
    check_keys(b, {"method", "rel_tol", "abs_tol", "dt_max", "renorm_every", "negative_clip"},
               "integrator");
    Rk45Adaptive m;
    if (b.contains("rel_tol")) m.rel_tol = positive_real(b.at("rel_tol"), "integrator.rel_tol");
    if (b.contains("abs_tol")) m.abs_tol = positive_real(b.at("abs_tol"), "integrator.abs_tol");
    if (b.contains("dt_max")) m.dt_max = positive_real(b.at("dt_max"), "integrator.dt_max");
    cfg.method = m;
    resolved = {{"method", "rk45"}, {"rel_tol", m.rel_tol}, {"abs_tol", m.abs_tol},
                {"dt_max", m.dt_max}};
  } else if (method == "rk4") {
    check_keys(b, {"method", "dt", "renorm_every", "negative_clip"}, "integrator");
    Rk4Fixed m;
    if (b.contains("dt")) m.dt = positive_real(b.at("dt"), "integrator.dt");
    cfg.method = m;
    resolved = {{"method", "rk4"}, {"dt", m.dt}};
  } else {
    throw ConfigError("integrator.method: expected 'rk45' or 'rk4'");
  }
  if (b.contains("renorm_every")) {
    cfg.renorm_every = positive_int(b.at("renorm_every"), "integrator.renorm_every");
  }
  if (b.contains("negative_clip")) {
    cfg.negative_clip = positive_real(b.at("negative_clip"), "integrator.negative_clip");
  }
  resolved["renorm_every"] = cfg.renorm_every;
  resolved["negative_clip"] = cfg.negative_clip;
  guarded("integrator", [&] {
    validate_integrator_config(cfg);
    return 0;
  });
  return cfg;
}

CertificationConfig parse_certification(const Json* block, std::uint64_t seed, Json& resolved) {
  CertificationConfig cert;
  cert.seed = seed;
  if (block) {
    const Json& b = *block;
    check_keys(b, {"residual_tol", "t_max", "dt_max", "poke", "poke_return", "polish"},
               "certification");
    if (b.contains("residual_tol")) {
      cert.residual_tol = positive_real(b.at("residual_tol"), "certification.residual_tol");
    }
    if (b.contains("t_max")) cert.t_max = positive_real(b.at("t_max"), "certification.t_max");
    if (b.contains("dt_max")) cert.dt_max = positive_real(b.at("dt_max"), "certification.dt_max");
    if (b.contains("poke")) cert.poke = positive_real(b.at("poke"), "certification.poke");
    if (b.contains("poke_return")) {
      cert.poke_return = positive_real(b.at("poke_return"), "certification.poke_return");
    }
    if (b.contains("polish")) {
      if (!b.at("polish").is_boolean()) throw ConfigError("certification.polish: expected a boolean");
      cert.polish = b.at("polish").get<bool>();
    }
  }
  resolved = {{"residual_tol", cert.residual_tol}, {"t_max", cert.t_max},
              {"dt_max", cert.dt_max},             {"poke", cert.poke},
              {"poke_return", cert.poke_return},   {"polish", cert.polish}};
  return cert;
}

StateInit parse_init(const Json& j, GridPlacement placement, std::uint64_t seed,
                     const std::string& ctx, Json& resolved) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  const std::string kind = as_string(require(j, "kind", ctx), ctx + ".kind");
  StateInit init;
  init.placement = placement;
  if (kind == "grid") {
    check_keys(j, {"kind", "density"}, ctx);
    GridInit g;
    g.placement = placement;
    if (j.contains("density")) g.density = parse_density(j.at("density"));
    init.kind = StateInit::Kind::Grid;
    init.spec = g;
    resolved = {{"kind", "grid"}, {"density", density_to_json(g.density)}};
  } else if (kind == "samples") {
    check_keys(j, {"kind", "reference", "density"}, ctx);
    SampledInit s;
    s.seed = seed;
    if (j.contains("reference")) s.reference = parse_density(j.at("reference"));
    if (j.contains("density")) s.density = parse_density(j.at("density"));
    init.kind = StateInit::Kind::Samples;
    init.spec = s;
    resolved = {{"kind", "samples"},
                {"reference", density_to_json(s.reference)},
                {"density", density_to_json(s.density)}};
  } else if (kind == "section4") {
    check_keys(j, {"kind", "epsilon"}, ctx);
    init.kind = StateInit::Kind::Section4;
    init.epsilon = positive_real(require(j, "epsilon", ctx), ctx + ".epsilon");
    if (init.epsilon > 1.0) throw ConfigError(ctx + ".epsilon: must not exceed 1");
    resolved = {{"kind", "section4"}, {"epsilon", init.epsilon}};
  } else if (kind == "explicit") {
    check_keys(j, {"kind", "weights"}, ctx);
    init.kind = StateInit::Kind::Explicit;
    init.weights = real_list(require(j, "weights", ctx), ctx + ".weights");
    resolved = {{"kind", "explicit"}, {"weights", init.weights}};
  } else if (kind == "random") {
    check_keys(j, {"kind"}, ctx);
    init.kind = StateInit::Kind::Random;
    init.seed = seed;
    resolved = {{"kind", "random"}};
  } else {
    throw ConfigError(ctx + ".kind: expected grid, samples, section4, explicit or random");
  }
  return init;
}

std::vector<std::size_t> parse_resolutions(const Json& v) {
  if (!v.is_array() || v.empty()) throw ConfigError("resolutions: expected a non-empty array");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(positive_int(e, "resolutions"));
  for (std::size_t k = 1; k < out.size(); ++k) {
    if (out[k] <= out[k - 1]) throw ConfigError("resolutions: must be strictly increasing");
  }
  return out;
}

Json velocity_summary(const std::vector<VelocityBoundSample>& samples) {
  double max_speed = 0.0;
  double cap_excess = -std::numeric_limits<double>::infinity();
  std::optional<double> quad_excess;
  for (const auto& s : samples) {
    max_speed = std::max(max_speed, s.speed);
    cap_excess = std::max(cap_excess, s.speed - s.rate_cap_bound);
    if (s.quadratic_bound) {
      const double e = s.speed - *s.quadratic_bound;
      quad_excess = quad_excess ? std::max(*quad_excess, e) : e;
    }
  }
  Json j = {{"max_speed", max_speed}, {"max_rate_cap_excess", cap_excess}};
  j["max_quadratic_excess"] = quad_excess ? Json(*quad_excess) : Json(nullptr);
  return j;
}

Json stats_json(const IntegrationStats& s) {
  return {{"accepted_steps", s.accepted_steps},
          {"rejected_steps", s.rejected_steps},
          {"rhs_evaluations", s.rhs_evaluations},
          {"max_mass_drift", s.max_mass_drift}};
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  write_trajectory_csv(t, os);
  return os.str();
}

Json real_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string verdict_name(MobilityVerdict v) {
  return v == MobilityVerdict::ParalysisDetected ? "ParalysisDetected" : "MobileOnTestedFamily";
}

MeanDynamics dynamics_for(const RunConfig& cfg, const Discretization& d) {
  return MeanDynamics(cfg.game->on(d.support), cfg.protocol, d.support, d.lambda);
}

}  // namespace

std::string study_name(Study study) {
  switch (study) {
    case Study::Simulate:
      return "simulate";
    case Study::Converge:
      return "converge";
    case Study::Paralysis:
      return "paralysis";
    case Study::Equilibrium:
      return "equilibrium";
    case Study::BlDist:
      return "bl-dist";
    case Study::Probe:
      return "probe";
  }
  return "unknown";
}

std::optional<Study> parse_study(const std::string& name) {
  for (Study s : {Study::Simulate, Study::Converge, Study::Paralysis, Study::Equilibrium,
                  Study::BlDist, Study::Probe}) {
    if (study_name(s) == name) return s;
  }
  return std::nullopt;
}

PayoffKernel parse_kernel(const Json& j) {
  if (!j.is_object()) throw ConfigError("game: expected an object");
  const std::string kind = as_string(require(j, "kind", "game"), "game.kind");
  if (kind == "anticoordination") {
    check_keys(j, {"kind"}, "game");
    return PayoffKernel::anticoordination();
  }
  if (kind == "zero") {
    check_keys(j, {"kind"}, "game");
    return PayoffKernel::zero();
  }
  if (kind == "bump") {
    check_keys(j, {"kind", "width"}, "game");
    const double w = as_real(require(j, "width", "game"), "game.width");
    return guarded("game", [&] { return PayoffKernel::bump(w); });
  }
  if (kind == "tabulated") {
    check_keys(j, {"kind", "points", "matrix"}, "game");
    auto points = real_list(require(j, "points", "game"), "game.points");
    const Json& rows = require(j, "matrix", "game");
    if (!rows.is_array() || rows.size() != points.size()) {
      throw ConfigError("game.matrix: expected one row per point");
    }
    std::vector<double> flat;
    for (const auto& row : rows) {
      auto r = real_list(row, "game.matrix");
      if (r.size() != points.size()) throw ConfigError("game.matrix: rows must be square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return guarded("game", [&] { return PayoffKernel::tabulated(std::move(points), std::move(flat)); });
  }
  throw ConfigError("game.kind: expected anticoordination, bump, tabulated or zero");
}

Json kernel_to_json(const PayoffKernel& kernel) {
  if (const auto* b = std::get_if<AnticoordinationBump>(&kernel.kind())) {
    return {{"kind", "bump"}, {"width", b->width}, {"profile", "quartic"}};
  }
  if (const auto* t = std::get_if<TabulatedGrid>(&kernel.kind())) {
    Json rows = Json::array();
    const std::size_t n = t->points.size();
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back(std::vector<double>(t->matrix.begin() + static_cast<std::ptrdiff_t>(i * n),
                                         t->matrix.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
    }
    return {{"kind", "tabulated"}, {"points", t->points}, {"matrix", rows}};
  }
  return {{"kind", kernel.name()}};
}

DensitySpec parse_density(const Json& j) {
  if (!j.is_object()) throw ConfigError("density: expected an object");
  const std::string kind = as_string(require(j, "kind", "density"), "density.kind");
  if (kind == "uniform") {
    check_keys(j, {"kind"}, "density");
    return UniformDensity{};
  }
  if (kind == "piecewise") {
    check_keys(j, {"kind", "breaks", "values"}, "density");
    auto breaks = real_list(require(j, "breaks", "density"), "density.breaks");
    auto values = real_list(require(j, "values", "density"), "density.values");
    return guarded("density", [&] {
      return DensitySpec(PiecewiseDensity(std::move(breaks), std::move(values)));
    });
  }
  throw ConfigError("density.kind: expected uniform or piecewise");
}

Json density_to_json(const DensitySpec& density) {
  if (const auto* pw = std::get_if<PiecewiseDensity>(&density)) {
    return {{"kind", "piecewise"}, {"breaks", pw->breaks()}, {"values", pw->values()}};
  }
  return {{"kind", "uniform"}};
}

GridPlacement parse_placement(const std::string& s) {
  if (s == "endpoints") return GridPlacement::Endpoints;
  if (s == "midpoints") return GridPlacement::Midpoints;
  throw ConfigError("placement: expected endpoints or midpoints");
}

std::string placement_name(GridPlacement placement) {
  return placement == GridPlacement::Endpoints ? "endpoints" : "midpoints";
}

DiscreteMeasure parse_measure(const Json& j) {
  check_keys(j, {"points", "weights"}, "measure");
  auto points = real_list(require(j, "points", "measure"), "measure.points");
  auto weights = real_list(require(j, "weights", "measure"), "measure.weights");
  return guarded("measure", [&] { return DiscreteMeasure(std::move(points), std::move(weights)); });
}

Discretization StateInit::build(std::size_t n) const {
  switch (kind) {
    case Kind::Grid:
    case Kind::Samples:
      return discretize(spec, n);
    case Kind::Section4:
    case Kind::Explicit:
    case Kind::Random: {
      Discretization d;
      d.support = grid_points(n, placement);
      d.lambda.assign(n, 1.0 / static_cast<double>(n));
      if (kind == Kind::Section4) {
        d.x0 = section4_initial_state(epsilon, n);
      } else if (kind == Kind::Random) {
        std::mt19937_64 rng(seed);
        d.x0 = sample_simplex(rng, n);
      } else {
        d.x0 = weights;
      }
      if (d.x0.size() != n) throw InvalidInput("explicit initial state: expected " +
                                               std::to_string(n) + " weights");
      validate_simplex_state(d.x0, "initial state");
      return d;
    }
  }
  throw InvalidInput("unknown initial-state kind");
}

RunConfig parse_run_config(const Json& doc, std::optional<Study> expected,
                           std::optional<std::uint64_t> seed_override) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig cfg;
  if (doc.contains("study")) {
    const auto named = parse_study(as_string(doc.at("study"), "study"));
    if (!named) throw ConfigError("study: unknown study name");
    if (expected && *expected != *named) {
      throw ConfigError("study: config is for '" + study_name(*named) + "' but '" +
                        study_name(*expected) + "' was requested");
    }
    cfg.study = *named;
  } else if (expected) {
    cfg.study = *expected;
  } else {
    throw ConfigError("study: not given in the config or on the command line");
  }

  const Study st = cfg.study;
  switch (st) {
    case Study::Simulate:
      check_keys(doc, {"study", "game", "payoff_scale", "protocol", "placement", "seed", "output_dir",
                       "n", "init", "T", "emission_points", "integrator", "write_trajectories"},
                 "config");
      break;
    case Study::Converge:
      check_keys(doc, {"study", "game", "payoff_scale", "protocol", "placement", "seed", "output_dir",
                       "resolutions", "reference", "init", "T", "emission_points", "integrator",
                       "write_trajectories"},
                 "config");
      break;
    case Study::Paralysis:
      check_keys(doc, {"study", "game", "payoff_scale", "protocol", "placement", "seed", "output_dir",
                       "resolutions", "family", "threshold", "T", "emission_points", "integrator",
                       "certification", "write_trajectories"},
                 "config");
      break;
    case Study::Equilibrium:
      check_keys(doc, {"study", "game", "payoff_scale", "protocol", "placement", "seed", "output_dir",
                       "n", "init", "integrator", "certification"},
                 "config");
      break;
    case Study::Probe:
      check_keys(doc, {"study", "game", "seed", "output_dir", "sample_count"}, "config");
      break;
    case Study::BlDist:
      check_keys(doc, {"study", "mu", "nu", "output_dir"}, "config");
      break;
  }

  Json& r = cfg.resolved;
  r = Json::object();
  r["study"] = study_name(st);

  if (doc.contains("output_dir")) cfg.output_dir = as_string(doc.at("output_dir"), "output_dir");
  if (cfg.output_dir.empty() && st != Study::BlDist) {
    throw ConfigError("config: missing required key 'output_dir'");
  }

  if (st == Study::BlDist) {
    cfg.mu = parse_measure(require(doc, "mu", "config"));
    cfg.nu = parse_measure(require(doc, "nu", "config"));
    r["mu"] = {{"points", cfg.mu->points()}, {"weights", cfg.mu->weights()}};
    r["nu"] = {{"points", cfg.nu->points()}, {"weights", cfg.nu->weights()}};
    cfg.fingerprint = fingerprint_of(r.dump());
    return cfg;
  }

  if (doc.contains("seed")) cfg.seed = seed_value(doc.at("seed"), "seed");
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.seed_override = seed_override;
  }
  r["seed"] = cfg.seed;

  const PayoffKernel kernel = parse_kernel(require(doc, "game", "config"));
  r["game"] = kernel_to_json(kernel);

  if (st == Study::Probe) {
    cfg.game = GameSpec{kernel, false};
    cfg.sample_count = doc.contains("sample_count")
                           ? positive_int(doc.at("sample_count"), "sample_count")
                           : std::size_t{10000};
    if (cfg.sample_count < 2) throw ConfigError("sample_count: must be at least 2");
    r["sample_count"] = cfg.sample_count;
    cfg.fingerprint = fingerprint_of(r.dump());
    return cfg;
  }

  bool scale = false;
  if (doc.contains("payoff_scale")) {
    const auto s = as_string(doc.at("payoff_scale"), "payoff_scale");
    if (s == "resolution") {
      scale = true;
    } else if (s != "none") {
      throw ConfigError("payoff_scale: expected none or resolution");
    }
  }
  r["payoff_scale"] = scale ? "resolution" : "none";
  cfg.game = GameSpec{kernel, scale};

  cfg.protocol = guarded("protocol", [&] {
    return parse_protocol(as_string(require(doc, "protocol", "config"), "protocol"));
  });
  r["protocol"] = cfg.protocol.name();

  if (doc.contains("placement")) {
    cfg.placement = parse_placement(as_string(doc.at("placement"), "placement"));
  }
  r["placement"] = placement_name(cfg.placement);

  double horizon = 1.0;
  std::size_t emission_points = kDefaultEmissionPoints;
  if (st != Study::Equilibrium) {
    horizon = positive_real(require(doc, "T", "config"), "T");
    r["T"] = horizon;
    if (doc.contains("emission_points")) {
      const Json& e = doc.at("emission_points");
      if (!e.is_number_integer() || e.get<long long>() < 0) {
        throw ConfigError("emission_points: expected a nonnegative integer");
      }
      emission_points = e.get<std::size_t>();
    }
    if (st != Study::Simulate && emission_points < 2) {
      throw ConfigError("emission_points: studies need a shared grid of at least 2 points");
    }
    r["emission_points"] = emission_points;
    if (doc.contains("write_trajectories")) {
      if (!doc.at("write_trajectories").is_boolean()) {
        throw ConfigError("write_trajectories: expected a boolean");
      }
      cfg.write_trajectories = doc.at("write_trajectories").get<bool>();
    }
    r["write_trajectories"] = cfg.write_trajectories;
  }

  Json integrator_resolved;
  cfg.integrator = parse_integrator(doc.contains("integrator") ? &doc.at("integrator") : nullptr,
                                    horizon, emission_points, integrator_resolved);
  r["integrator"] = integrator_resolved;

  if (st == Study::Simulate || st == Study::Equilibrium) {
    cfg.n = positive_int(require(doc, "n", "config"), "n");
    r["n"] = cfg.n;
    Json init_resolved;
    cfg.init = parse_init(require(doc, "init", "config"), cfg.placement, cfg.seed, "init",
                          init_resolved);
    r["init"] = init_resolved;
    guarded("init", [&] { return cfg.init.build(cfg.n); });
  }

  if (st == Study::Equilibrium || st == Study::Paralysis) {
    Json cert_resolved;
    cfg.certification = parse_certification(
        doc.contains("certification") ? &doc.at("certification") : nullptr, cfg.seed,
        cert_resolved);
    r["certification"] = cert_resolved;
  }

  if (st == Study::Converge) {
    cfg.resolutions = parse_resolutions(require(doc, "resolutions", "config"));
    r["resolutions"] = cfg.resolutions;
    Json init_resolved;
    cfg.init = parse_init(require(doc, "init", "config"), cfg.placement, cfg.seed, "init",
                          init_resolved);
    if (cfg.init.kind != StateInit::Kind::Grid && cfg.init.kind != StateInit::Kind::Samples) {
      throw ConfigError("init: convergence studies need a grid or samples initial condition");
    }
    r["init"] = init_resolved;
    const Json& ref = require(doc, "reference", "config");
    if (!ref.is_object()) throw ConfigError("reference: expected an object");
    const std::string kind = as_string(require(ref, "kind", "reference"), "reference.kind");
    if (kind == "run") {
      check_keys(ref, {"kind", "n"}, "reference");
      const std::size_t n = positive_int(require(ref, "n", "reference"), "reference.n");
      if (n <= cfg.resolutions.back()) {
        throw ConfigError("reference.n: must exceed every resolution");
      }
      cfg.reference = ReferenceRun{n};
      r["reference"] = {{"kind", "run"}, {"n", n}};
    } else if (kind == "initial") {
      check_keys(ref, {"kind"}, "reference");
      cfg.reference = InitialMeasure{};
      r["reference"] = {{"kind", "initial"}};
    } else {
      throw ConfigError("reference.kind: expected run or initial");
    }
    for (std::size_t n : cfg.resolutions) guarded("init", [&] { return cfg.init.build(n); });
  }

  if (st == Study::Paralysis) {
    cfg.resolutions = parse_resolutions(require(doc, "resolutions", "config"));
    r["resolutions"] = cfg.resolutions;
    Json family_resolved;
    cfg.init = parse_init(require(doc, "family", "config"), cfg.placement, cfg.seed, "family",
                          family_resolved);
    r["family"] = family_resolved;
    for (std::size_t n : cfg.resolutions) guarded("family", [&] { return cfg.init.build(n); });
    if (doc.contains("threshold")) {
      cfg.threshold = positive_real(doc.at("threshold"), "threshold");
    } else if (cfg.init.kind == StateInit::Kind::Section4) {
      cfg.threshold = 0.5 * cfg.init.epsilon;
    } else {
      throw ConfigError("threshold: required unless the family is section4");
    }
    r["threshold"] = cfg.threshold;
  }

  cfg.fingerprint = fingerprint_of(r.dump());
  return cfg;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

Json convergence_results(const ConvergenceReport& report) {
  Json ratios = Json::array();
  for (double d : report.decay_ratios) ratios.push_back(real_or_null(d));
  Json j = {{"resolutions", report.resolutions},
            {"horizon", report.horizon},
            {"sup_bl", report.sup_bl},
            {"decay_ratios", ratios},
            {"emission_points", report.times.size()},
            {"excluded", report.excluded},
            {"warnings", report.warnings}};
  j["reference_n"] = report.reference_n ? Json(*report.reference_n) : Json(nullptr);
  return j;
}

Json equilibrium_results(const EquilibriumReport& report) {
  return {{"final_state", report.final_state}, {"residual", report.residual},
          {"nash_gap", report.nash_gap},       {"converged", report.converged},
          {"time", report.time},               {"newton_steps", report.newton_steps}};
}

Json mobility_results(const MobilityReport& report) {
  Json per = Json::array();
  for (const auto& o : report.outcomes) {
    Json e = {{"n", o.n},
              {"certified", o.certified},
              {"poke_returned", o.poke_returned},
              {"initial_speed", o.initial_speed},
              {"protocol_cap", o.protocol_cap},
              {"equilibrium", equilibrium_results(o.equilibrium)}};
    e["quadratic_bound"] = o.quadratic_bound ? Json(*o.quadratic_bound) : Json(nullptr);
    per.push_back(std::move(e));
  }
  Json j = {{"per_resolution", per},
            {"excluded", report.excluded},
            {"warnings", report.warnings},
            {"times", report.times},
            {"envelope", report.envelope},
            {"epsilon_floor", report.epsilon_floor},
            {"threshold", report.threshold},
            {"verdict", verdict_name(report.verdict)}};
  if (report.coincidence) {
    const auto& c = *report.coincidence;
    j["coincidence"] = {{"n", c.n},
                        {"limit_distance", c.limit_distance},
                        {"tail_nonincreasing", c.tail_nonincreasing},
                        {"plateau", c.plateau}};
  }
  return j;
}

std::string sup_bl_csv(const ConvergenceReport& report) {
  std::string out = "n,sup_bl\n";
  for (std::size_t k = 0; k < report.resolutions.size(); ++k) {
    out += std::to_string(report.resolutions[k]) + "," + format_real(report.sup_bl[k]) + "\n";
  }
  return out;
}

std::string envelope_csv(const MobilityReport& report) {
  std::string out = "t,envelope\n";
  for (std::size_t m = 0; m < report.envelope.size(); ++m) {
    out += format_real(report.times[m]) + "," + format_real(report.envelope[m]) + "\n";
  }
  return out;
}

StudyOutput execute(const RunConfig& cfg, std::size_t jobs) {
  StudyOutput out;
  Json results;
  std::string report_study = study_name(cfg.study);

  switch (cfg.study) {
    case Study::Simulate: {
      const auto d = cfg.init.build(cfg.n);
      const auto dyn = dynamics_for(cfg, d);
      const auto traj = integrate(dyn, d.x0, cfg.integrator);
      results = {{"n", d.support.size()},
                 {"trajectory_fingerprint", traj.config_fingerprint},
                 {"stats", stats_json(traj.stats)},
                 {"final_state", traj.states.back()},
                 {"velocity", velocity_summary(velocity_bound_check(traj, dyn))}};
      out.files.push_back({"trajectory.csv", trajectory_csv(traj)});
      break;
    }
    case Study::Converge: {
      report_study = "convergence";
      const auto report = convergence_study(*cfg.game, cfg.protocol, cfg.resolutions, cfg.reference,
                                            cfg.init.spec, cfg.integrator, jobs);
      results = convergence_results(report);
      Json velocity = Json::array();
      for (const auto& traj : report.trajectories) {
        const auto d = cfg.init.build(traj.support.size());
        Json v = velocity_summary(velocity_bound_check(traj, dynamics_for(cfg, d)));
        v["n"] = traj.support.size();
        velocity.push_back(std::move(v));
      }
      results["velocity"] = velocity;
      out.files.push_back({"sup_bl.csv", sup_bl_csv(report)});
      if (cfg.write_trajectories) {
        for (const auto& traj : report.trajectories) {
          out.files.push_back({"trajectory_n" + std::to_string(traj.support.size()) + ".csv",
                               trajectory_csv(traj)});
        }
        if (report.reference_trajectory) {
          out.files.push_back({"trajectory_reference.csv", trajectory_csv(*report.reference_trajectory)});
        }
      }
      break;
    }
    case Study::Paralysis: {
      FamilySpec family;
      family.resolutions = cfg.resolutions;
      family.placement = cfg.placement;
      family.epsilon = cfg.init.epsilon;
      family.threshold = cfg.threshold;
      family.init_name = cfg.resolved.at("family").at("kind").get<std::string>();
      const StateInit init = cfg.init;
      family.init = [init](std::size_t n) { return init.build(n).x0; };
      const auto report =
          paralysis_study(*cfg.game, cfg.protocol, family, cfg.integrator, cfg.certification, jobs);
      results = mobility_results(report);
      Json velocity = Json::array();
      for (const auto& o : report.outcomes) {
        if (o.trajectory.states.empty()) continue;
        const auto d = cfg.init.build(o.n);
        Json v = velocity_summary(velocity_bound_check(o.trajectory, dynamics_for(cfg, d)));
        v["n"] = o.n;
        velocity.push_back(std::move(v));
      }
      results["velocity"] = velocity;
      out.files.push_back({"envelope.csv", envelope_csv(report)});
      if (cfg.write_trajectories) {
        for (const auto& o : report.outcomes) {
          if (o.trajectory.states.empty()) continue;
          out.files.push_back({"trajectory_n" + std::to_string(o.n) + ".csv", trajectory_csv(o.trajectory)});
        }
      }
      break;
    }
    case Study::Equilibrium: {
      const auto d = cfg.init.build(cfg.n);
      const auto dyn = dynamics_for(cfg, d);
      const auto report = equilibrium_run(dyn, d.x0, cfg.certification, cfg.integrator);
      results = equilibrium_results(report);
      bool poke = false;
      if (report.converged) {
        poke = stability_poke(dyn, report.final_state, cfg.certification, cfg.seed, cfg.integrator);
      }
      results["poke_returned"] = poke;
      results["certified"] = report.converged && poke;
      break;
    }
    case Study::Probe: {
      const auto p = assumption1_probe(cfg.game->kernel, cfg.sample_count, cfg.seed);
      results = {{"bound_estimate", p.bound_estimate},
                 {"lip_s_estimate", p.lip_s_estimate},
                 {"lip_s_coarse", p.lip_s_coarse},
                 {"lip_s_fine", p.lip_s_fine},
                 {"lip_measure_estimate", p.lip_measure_estimate},
                 {"diverging", p.diverging},
                 {"heuristic", true}};
      break;
    }
    case Study::BlDist: {
      const auto bl = bl_distance(*cfg.mu, *cfg.nu);
      results = {{"distance", bl.distance},
                 {"support", bl.support},
                 {"witness", bl.witness},
                 {"status", bl.status == SolverStatus::Optimal ? "Optimal" : "Degenerate"}};
      break;
    }
  }

  out.report = {{"study", report_study},
                {"config", cfg.resolved},
                {"results", results},
                {"fingerprint", cfg.fingerprint}};
  out.files.insert(out.files.begin(), {"report.json", out.report.dump(2) + "\n"});

  Json files = Json::array();
  for (const auto& f : out.files) files.push_back(f.name);
  files.push_back("manifest.json");
  Json manifest = {{"tool", "evodyn"},
                   {"version", kToolVersion},
                   {"study", study_name(cfg.study)},
                   {"config", cfg.resolved},
                   {"output_dir", cfg.output_dir},
                   {"fingerprint", cfg.fingerprint},
                   {"files", files}};
  manifest["seed_override"] = cfg.seed_override ? Json(*cfg.seed_override) : Json(nullptr);
  out.files.push_back({"manifest.json", manifest.dump(2) + "\n"});
  return out;
}

}  // namespace evodyn

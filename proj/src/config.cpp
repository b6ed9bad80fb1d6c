#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "avl/errors.hpp"
#include "avl/experiments.hpp"

namespace avl {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be a table", where));
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ConfigError(fmt::format("unknown key '{}.{}'", where, key));
}

template <class T>
void read(const json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("'{}.{}' has the wrong type", where, key));
  }
}

void finite(double v, const std::string& name) {
  if (!std::isfinite(v)) throw ConfigError(fmt::format("'{}' must be finite", name));
}

void increasing(const std::vector<double>& v, const std::string& name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    finite(v[i], name);
    if (i > 0 && !(v[i] > v[i - 1]))
      throw ConfigError(fmt::format("'{}' must be strictly increasing", name));
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  ScenarioConfig c;
  expect_object(j, "config",
                {"dimension", "chart", "potential", "ensemble", "integrator", "experiment", "output"});
  read(j, "dimension", "config", c.dimension);
  read(j, "chart", "config", c.chart);

  if (j.contains("potential")) {
    const json& p = j.at("potential");
    expect_object(p, "potential", {"name", "params"});
    read(p, "name", "potential", c.potential.name);
    if (p.contains("params")) {
      expect_object(p.at("params"), "potential.params",
                    [&] {
                      std::set<std::string> keys;
                      for (const auto& [k, v] : p.at("params").items()) keys.insert(k);
                      return keys;
                    }());
      for (const auto& [k, v] : p.at("params").items()) {
        if (!v.is_number()) throw ConfigError(fmt::format("'potential.params.{}' must be a number", k));
        c.potential.params[k] = v.get<double>();
      }
    }
  }
  if (j.contains("ensemble")) {
    const json& e = j.at("ensemble");
    const std::string w = "ensemble";
    expect_object(e, w,
                  {"count", "energy", "spread", "seed", "direction", "bunch_width", "antithetic"});
    read(e, "count", w, c.ensemble.count);
    read(e, "energy", w, c.ensemble.energy);
    read(e, "spread", w, c.ensemble.spread);
    read(e, "seed", w, c.ensemble.seed);
    read(e, "direction", w, c.ensemble.direction);
    read(e, "bunch_width", w, c.ensemble.bunch_width);
    read(e, "antithetic", w, c.ensemble.antithetic);
  }
  if (j.contains("integrator")) {
    const json& i = j.at("integrator");
    const std::string w = "integrator";
    expect_object(i, w, {"step", "duration", "reproject"});
    read(i, "step", w, c.integrator.step);
    read(i, "duration", w, c.integrator.duration);
    read(i, "reproject", w, c.integrator.reproject);
  }
  if (j.contains("experiment")) {
    const json& x = j.at("experiment");
    const std::string w = "experiment";
    expect_object(x, w,
                  {"kind", "probe_offset", "lab_time", "steps", "time_samples", "spread_sweep",
                   "energy_sweep", "floor", "synthetic", "time", "grid", "kernel_radius",
                   "slice_step", "start_offset", "gap_time", "gap_samples", "start"});
    auto& e = c.experiment;
    read(x, "kind", w, e.kind);
    read(x, "probe_offset", w, e.probe_offset);
    read(x, "lab_time", w, e.lab_time);
    read(x, "steps", w, e.steps);
    read(x, "time_samples", w, e.time_samples);
    read(x, "spread_sweep", w, e.spread_sweep);
    read(x, "energy_sweep", w, e.energy_sweep);
    read(x, "floor", w, e.floor);
    read(x, "synthetic", w, e.synthetic);
    read(x, "time", w, e.time);
    read(x, "kernel_radius", w, e.kernel_radius);
    read(x, "slice_step", w, e.slice_step);
    read(x, "start_offset", w, e.start_offset);
    read(x, "gap_time", w, e.gap_time);
    read(x, "gap_samples", w, e.gap_samples);
    read(x, "start", w, e.start);
    if (x.contains("grid")) {
      const json& g = x.at("grid");
      expect_object(g, "experiment.grid", {"cells", "half_width", "time_step"});
      read(g, "cells", "experiment.grid", e.grid.cells);
      read(g, "half_width", "experiment.grid", e.grid.half_width);
      read(g, "time_step", "experiment.grid", e.grid.time_step);
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    expect_object(o, "output", {"directory", "formats"});
    read(o, "directory", "output", c.output.directory);
    read(o, "formats", "output", c.output.formats);
  }
  c.validate();
  return c;
}

json ScenarioConfig::to_json() const {
  json params = json::object();
  for (const auto& [k, v] : potential.params) params[k] = v;
  return json{
      {"dimension", dimension},
      {"chart", chart},
      {"potential", {{"name", potential.name}, {"params", params}}},
      {"ensemble",
       {{"count", ensemble.count},
        {"energy", ensemble.energy},
        {"spread", ensemble.spread},
        {"seed", ensemble.seed},
        {"direction", ensemble.direction},
        {"bunch_width", ensemble.bunch_width},
        {"antithetic", ensemble.antithetic}}},
      {"integrator",
       {{"step", integrator.step},
        {"duration", integrator.duration},
        {"reproject", integrator.reproject}}},
      {"experiment",
       {{"kind", experiment.kind},
        {"probe_offset", experiment.probe_offset},
        {"lab_time", experiment.lab_time},
        {"steps", experiment.steps},
        {"time_samples", experiment.time_samples},
        {"spread_sweep", experiment.spread_sweep},
        {"energy_sweep", experiment.energy_sweep},
        {"floor", experiment.floor},
        {"synthetic", experiment.synthetic},
        {"time", experiment.time},
        {"grid",
         {{"cells", experiment.grid.cells},
          {"half_width", experiment.grid.half_width},
          {"time_step", experiment.grid.time_step}}},
        {"kernel_radius", experiment.kernel_radius},
        {"slice_step", experiment.slice_step},
        {"start_offset", experiment.start_offset},
        {"gap_time", experiment.gap_time},
        {"gap_samples", experiment.gap_samples},
        {"start", experiment.start}}},
      {"output", {{"directory", output.directory}, {"formats", output.formats}}},
  };
}

void ScenarioConfig::validate() const {
  if (dimension < 2 || dimension > kMaxDim)
    throw ConfigError(fmt::format("dimension {} outside [2, {}]", dimension, kMaxDim));
  make_chart(chart, dimension);
  field();

  const auto& e = ensemble;
  if (e.count < 1) throw ConfigError("ensemble.count must be >= 1");
  finite(e.energy, "ensemble.energy");
  finite(e.spread, "ensemble.spread");
  finite(e.bunch_width, "ensemble.bunch_width");
  if (!(e.energy >= 1.0)) throw ConfigError("ensemble.energy must be >= 1");
  if (e.spread < 0.0 || e.bunch_width < 0.0)
    throw ConfigError("ensemble.spread and ensemble.bunch_width must be >= 0");
  if (static_cast<int>(e.direction.size()) != dimension - 1)
    throw ConfigError(fmt::format("ensemble.direction needs {} components", dimension - 1));
  double n = 0.0;
  for (double v : e.direction) {
    finite(v, "ensemble.direction");
    n += v * v;
  }
  if (n == 0.0) throw ConfigError("ensemble.direction must be non-zero");

  finite(integrator.step, "integrator.step");
  finite(integrator.duration, "integrator.duration");
  if (!(integrator.step > 0.0)) throw ConfigError("integrator.step must be > 0");
  if (!(integrator.duration > 0.0)) throw ConfigError("integrator.duration must be > 0");

  const auto& x = experiment;
  static const std::set<std::string> kinds{"simulate", "compare", "scale", "residual", "fluid",
                                           "validate"};
  if (!kinds.contains(x.kind)) throw ConfigError(fmt::format("unknown experiment.kind '{}'", x.kind));
  for (double v : {x.probe_offset, x.lab_time, x.floor, x.time, x.kernel_radius, x.slice_step,
                   x.start_offset, x.gap_time, x.grid.half_width, x.grid.time_step})
    finite(v, "experiment");
  if (!(x.lab_time > 0.0) || x.steps < 1 || x.time_samples < 2)
    throw ConfigError("experiment.lab_time > 0, steps >= 1 and time_samples >= 2 are required");
  if (!(x.time > 0.0) || !(x.slice_step > 0.0) || !(x.gap_time > 0.0) || x.gap_samples < 2)
    throw ConfigError("experiment.time, slice_step, gap_time must be > 0 and gap_samples >= 2");
  if (x.grid.cells < 1 || !(x.grid.half_width > 0.0) || !(x.grid.time_step > 0.0))
    throw ConfigError("experiment.grid needs cells >= 1, half_width > 0, time_step > 0");
  if (x.kernel_radius < 0.0) throw ConfigError("experiment.kernel_radius must be >= 0");
  increasing(x.spread_sweep, "experiment.spread_sweep");
  increasing(x.energy_sweep, "experiment.energy_sweep");
  for (double s : x.spread_sweep)
    if (s < 0.0) throw ConfigError("experiment.spread_sweep entries must be >= 0");
  for (double E : x.energy_sweep)
    if (E < 1.0) throw ConfigError("experiment.energy_sweep entries must be >= 1");
  if (!x.start.empty() && static_cast<int>(x.start.size()) != dimension)
    throw ConfigError(fmt::format("experiment.start needs {} components", dimension));

  for (const auto& f : output.formats)
    if (f != "csv" && f != "json") throw ConfigError(fmt::format("unknown output format '{}'", f));
}

FieldConfiguration ScenarioConfig::field() const {
  return FieldConfiguration::from_catalog(potential.name, potential.params, dimension);
}

Vector ScenarioConfig::direction() const {
  return Vector::Map(ensemble.direction.data(), static_cast<Eigen::Index>(ensemble.direction.size()));
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  return ScenarioConfig::from_json(j);
}

std::string config_hash(const ScenarioConfig& config) {
  const std::string text = config.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace avl

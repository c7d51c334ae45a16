#pragma once

// Run configuration: JSON schema, named presets, validation, and assembly of
// a Scenario from a validated config.

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/objectives.hpp"
#include "m1rt/optimizer.hpp"
#include "m1rt/physics.hpp"
#include "m1rt/scenario.hpp"
#include "m1rt/transport.hpp"

namespace m1rt {

using json = nlohmann::ordered_json;

inline constexpr double kDefaultC2 = 1e-2;
inline constexpr double kDefaultFinalTime = 5.0;

enum class PresetVariant { Baseline, LowRisk, Blocked };

inline std::string_view to_string(PresetVariant v) {
  switch (v) {
    case PresetVariant::Baseline: return "baseline";
    case PresetVariant::LowRisk: return "low_risk";
    case PresetVariant::Blocked: return "blocked";
  }
  return "?";
}

struct RunConfig {
  std::string name = "custom";
  int nx = 100;
  int ny = 100;
  TargetCase target = TargetCase::Basic;
  std::optional<TargetGeometry> geometry;  // default: the target case's rectangles
  ObjectiveKind objective = ObjectiveKind::Tracking;

  MediumParams tissue = kTissueMedium;
  MediumParams void_medium = kVoidMedium;
  double g = kDefaultMeanCosine;
  double T = kDefaultFinalTime;
  double cfl = kDefaultCfl;

  TrackingWeights tracking;
  std::optional<double> tumor_dose;  // D-bar on the tumor, default T
  SurvivalWeights survival;
  RegionLq lq;
  double c2 = kDefaultC2;

  std::optional<double> q_max;  // default 1/eps
  std::optional<double> eps;    // default min(dx, dy)
  std::optional<double> delta;  // default 1e-4 min(dx, dy)
  EdgeSet blocked;

  bool stationary = true;
  AdjointKind adjoint = AdjointKind::Discrete;
  OptimizerConfig optimizer;
  int checkpoint_every = 0;  // iterations between control checkpoints, 0 = off
  std::string restart_from;  // control checkpoint to start from instead of q = 0

  std::string output_dir;  // default runs/<name>
  bool export_fields = true;
  int sn_angles = 16;  // oracle subcommand

  // Defaults that depend on the grid.
  double resolved_eps() const { return eps.value_or(default_eps(build_grid(nx, ny))); }
  double resolved_delta() const { return delta.value_or(default_delta(build_grid(nx, ny))); }
  double resolved_q_max() const { return q_max.value_or(1.0 / resolved_eps()); }
  TargetGeometry resolved_geometry() const { return geometry.value_or(TargetGeometry::preset(target)); }
  double resolved_tumor_dose() const { return tumor_dose.value_or(T); }
  std::string resolved_output_dir() const { return output_dir.empty() ? "runs/" + name : output_dir; }
};

// ---------------------------------------------------------------------------
// Presets: <target>-<objective>-<variant>

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const char* t : {"basic", "intermediate", "complex"})
      for (const char* o : {"tracking", "sf"})
        for (const char* v : {"baseline", "low_risk", "blocked"}) out.push_back(std::string(t) + "-" + o + "-" + v);
    return out;
  }();
  return names;
}

inline RunConfig preset_config(std::string_view name) {
  const std::string s(name);
  const auto a = s.find('-');
  const auto b = a == std::string::npos ? std::string::npos : s.find('-', a + 1);
  if (b == std::string::npos) throw ValidationError("unknown preset '" + s + "'");
  RunConfig c;
  c.name = s;
  try {
    c.target = parse_target_case(s.substr(0, a));
  } catch (const ValidationError&) {
    throw ValidationError("unknown preset '" + s + "'");
  }
  const std::string obj = s.substr(a + 1, b - a - 1);
  const std::string var = s.substr(b + 1);
  if (obj == "tracking") {
    c.objective = ObjectiveKind::Tracking;
  } else if (obj == "sf") {
    c.objective = ObjectiveKind::SurvivingFraction;
  } else {
    throw ValidationError("unknown preset '" + s + "'");
  }
  if (var == "baseline") {
  } else if (var == "low_risk") {
    c.tracking.risk = 50.0;
    c.survival.risk = 1000.0;
  } else if (var == "blocked") {
    c.blocked.insert(c.target == TargetCase::Complex ? Edge::Right : Edge::Left);
  } else {
    throw ValidationError("unknown preset '" + s + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON schema. Every object rejects keys it does not know.

namespace detail {

class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + label() + "' must be an object");
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError("config: unknown key '" + qualified(key) + "'");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ValidationError("config: '" + qualified(key) + "' must be a number");
    return v.get<double>();
  }

  int integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ValidationError("config: '" + qualified(key) + "' must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_boolean()) throw ValidationError("config: '" + qualified(key) + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ValidationError("config: '" + qualified(key) + "' must be a string");
    return v.get<std::string>();
  }

  Section sub(const std::string& key) { return Section(raw(key), qualified(key)); }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_if(Section& s, const std::string& key, double& out) {
  if (s.has(key)) out = s.number(key);
}
inline void read_if(Section& s, const std::string& key, int& out) {
  if (s.has(key)) out = s.integer(key);
}
inline void read_if(Section& s, const std::string& key, bool& out) {
  if (s.has(key)) out = s.boolean(key);
}
inline void read_if(Section& s, const std::string& key, std::optional<double>& out) {
  if (s.has(key)) out = s.number(key);
}

// A medium must name both cross-sections.
inline MediumParams read_medium(Section& parent, const std::string& key) {
  Section s = parent.sub(key);
  MediumParams m;
  if (!s.has("sigma_a"))
    throw ValidationError("config: '" + s.qualified("sigma_a") +
                          "' is required (coercivity hypothesis: sigma_a > 0 on every medium)");
  if (!s.has("sigma_s")) throw ValidationError("config: '" + s.qualified("sigma_s") + "' is required");
  m.sigma_a = s.number("sigma_a");
  m.sigma_s = s.number("sigma_s");
  return m;
}

// [[x0, x1, y0, y1], ...]
inline std::vector<Rect> read_rects(const json& j, const std::string& where) {
  const std::string msg = "config: '" + where + "' must be an array of [x0, x1, y0, y1] boxes";
  if (!j.is_array()) throw ValidationError(msg);
  std::vector<Rect> out;
  for (const json& b : j) {
    if (!b.is_array() || b.size() != 4) throw ValidationError(msg);
    for (const json& v : b)
      if (!v.is_number()) throw ValidationError(msg);
    Rect r{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    if (!(r.x0 < r.x1 && r.y0 < r.y1)) throw ValidationError("config: '" + where + "' has a box with x0 >= x1 or y0 >= y1");
    out.push_back(r);
  }
  return out;
}

inline LqParams read_lq(Section s, LqParams p) {
  read_if(s, "alpha", p.alpha);
  read_if(s, "beta", p.beta);
  return p;
}

}  // namespace detail

// Validates everything that can be checked without solving. Throws
// ValidationError naming the offending key.
inline void validate(const RunConfig& c) {
  require(c.nx >= 2 && c.ny >= 2, "config: nx and ny must be >= 2");
  require(c.nx <= 4000 && c.ny <= 4000, "config: nx and ny must be <= 4000");
  require(!c.resolved_geometry().tumor.empty(), "config: 'regions.tumor' needs at least one box");
  validate_medium(c.tissue, "config: materials.tissue");
  validate_medium(c.void_medium, "config: materials.void");
  require(std::isfinite(c.g) && std::abs(c.g) < 1.0, "config: 'g' must satisfy |g| < 1");
  require(std::isfinite(c.T) && c.T > 0.0, "config: 'T' must be > 0");
  require(c.cfl > 0.0 && c.cfl <= kDefaultCfl, "config: 'cfl' must lie in (0, 0.45]");
  for (double w : {c.tracking.tumor, c.tracking.risk, c.tracking.normal})
    require(std::isfinite(w) && w > 0.0, "config: tracking weights must be > 0");
  for (double w : {c.survival.tumor, c.survival.risk, c.survival.normal})
    require(std::isfinite(w) && w > 0.0, "config: survival weights must be > 0");
  for (const LqParams* p : {&c.lq.tumor, &c.lq.risk, &c.lq.normal})
    require(p->alpha > 0.0 && p->beta > 0.0, "config: lq alpha and beta must be > 0");
  require(std::isfinite(c.c2) && c.c2 > 0.0, "config: 'c2' must be > 0");
  require(std::isfinite(c.resolved_tumor_dose()) && c.resolved_tumor_dose() >= 0.0,
          "config: 'tumor_dose' must be >= 0");
  require(c.resolved_eps() > 0.0, "config: 'eps' must be > 0");
  require(c.resolved_delta() > 0.0, "config: 'delta' must be > 0");
  require(c.resolved_q_max() > c.resolved_delta(), "config: 'q_max' must exceed 'delta'");
  require(!c.blocked.all(), "config: 'blocked' cannot contain all four edges");
  require(c.checkpoint_every >= 0, "config: 'checkpoint_every' must be >= 0");
  require(c.sn_angles == 8 || c.sn_angles == 16 || c.sn_angles == 32, "config: 'sn_angles' must be 8, 16 or 32");
  c.optimizer.validate();
}

inline RunConfig parse_config(const json& j) {
  detail::Section root(j, "");
  RunConfig c;
  if (root.has("preset")) c = preset_config(root.string("preset"));
  if (root.has("name")) c.name = root.string("name");
  read_if(root, "nx", c.nx);
  read_if(root, "ny", c.ny);
  if (root.has("target")) c.target = parse_target_case(root.string("target"));
  if (root.has("regions")) {
    detail::Section r = root.sub("regions");
    TargetGeometry geo = c.resolved_geometry();
    if (r.has("tumor")) geo.tumor = detail::read_rects(r.raw("tumor"), r.qualified("tumor"));
    if (r.has("risk")) geo.risk = detail::read_rects(r.raw("risk"), r.qualified("risk"));
    c.geometry = geo;
  }
  if (root.has("objective")) {
    const std::string o = root.string("objective");
    if (o == "tracking") {
      c.objective = ObjectiveKind::Tracking;
    } else if (o == "sf") {
      c.objective = ObjectiveKind::SurvivingFraction;
    } else {
      throw ValidationError("config: 'objective' must be \"tracking\" or \"sf\"");
    }
  }
  if (root.has("materials")) {
    detail::Section m = root.sub("materials");
    if (m.has("tissue")) c.tissue = detail::read_medium(m, "tissue");
    if (m.has("void")) c.void_medium = detail::read_medium(m, "void");
  }
  read_if(root, "g", c.g);
  read_if(root, "T", c.T);
  read_if(root, "cfl", c.cfl);
  if (root.has("tracking_weights")) {
    detail::Section w = root.sub("tracking_weights");
    read_if(w, "tumor", c.tracking.tumor);
    read_if(w, "risk", c.tracking.risk);
    read_if(w, "normal", c.tracking.normal);
  }
  read_if(root, "tumor_dose", c.tumor_dose);
  if (root.has("survival_weights")) {
    detail::Section w = root.sub("survival_weights");
    read_if(w, "tumor", c.survival.tumor);
    read_if(w, "risk", c.survival.risk);
    read_if(w, "normal", c.survival.normal);
  }
  if (root.has("lq")) {
    detail::Section l = root.sub("lq");
    if (l.has("tumor")) c.lq.tumor = detail::read_lq(l.sub("tumor"), c.lq.tumor);
    if (l.has("risk")) c.lq.risk = detail::read_lq(l.sub("risk"), c.lq.risk);
    if (l.has("normal")) c.lq.normal = detail::read_lq(l.sub("normal"), c.lq.normal);
  }
  read_if(root, "c2", c.c2);
  read_if(root, "q_max", c.q_max);
  read_if(root, "eps", c.eps);
  read_if(root, "delta", c.delta);
  if (root.has("blocked")) {
    const json& b = root.raw("blocked");
    if (!b.is_array()) throw ValidationError("config: 'blocked' must be an array of edge names");
    c.blocked = EdgeSet{};
    for (const json& e : b) {
      if (!e.is_string()) throw ValidationError("config: 'blocked' must be an array of edge names");
      c.blocked.insert(parse_edge(e.get<std::string>()));
    }
  }
  if (root.has("control")) {
    const std::string m = root.string("control");
    if (m == "stationary") {
      c.stationary = true;
    } else if (m == "time_varying") {
      c.stationary = false;
    } else {
      throw ValidationError("config: 'control' must be \"stationary\" or \"time_varying\"");
    }
  }
  if (root.has("adjoint")) {
    const std::string a = root.string("adjoint");
    if (a == "discrete") {
      c.adjoint = AdjointKind::Discrete;
    } else if (a == "continuous") {
      c.adjoint = AdjointKind::Continuous;
    } else {
      throw ValidationError("config: 'adjoint' must be \"discrete\" or \"continuous\"");
    }
  }
  if (root.has("optimizer")) {
    detail::Section o = root.sub("optimizer");
    read_if(o, "max_iterations", c.optimizer.max_iterations);
    read_if(o, "tol", c.optimizer.tol);
    read_if(o, "initial_step", c.optimizer.initial_step);
    read_if(o, "shrink", c.optimizer.shrink);
    read_if(o, "sufficient_decrease", c.optimizer.sufficient_decrease);
    read_if(o, "max_backtracks", c.optimizer.max_backtracks);
    read_if(o, "warm_start", c.optimizer.warm_start);
    read_if(o, "bb_step", c.optimizer.bb_step);
    read_if(o, "stall_window", c.optimizer.stall_window);
    read_if(o, "stall_rtol", c.optimizer.stall_rtol);
  }
  read_if(root, "checkpoint_every", c.checkpoint_every);
  if (root.has("restart_from")) c.restart_from = root.string("restart_from");
  if (root.has("output_dir")) c.output_dir = root.string("output_dir");
  read_if(root, "export_fields", c.export_fields);
  read_if(root, "sn_angles", c.sn_angles);
  validate(c);
  return c;
}

inline RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig parse_config(const std::string& text) { return parse_config(std::string_view(text)); }

// Fully resolved config (every default filled in). Parsing it back yields the same run.
inline json to_json(const RunConfig& c) {
  auto medium = [](const MediumParams& m) { return json{{"sigma_a", m.sigma_a}, {"sigma_s", m.sigma_s}}; };
  auto lq = [](const LqParams& p) { return json{{"alpha", p.alpha}, {"beta", p.beta}}; };
  json blocked = json::array();
  for (Edge e : kAllEdges)
    if (c.blocked.contains(e)) blocked.push_back(std::string(to_string(e)));
  json j;
  j["name"] = c.name;
  j["nx"] = c.nx;
  j["ny"] = c.ny;
  j["target"] = std::string(to_string(c.target));
  auto rects = [](const std::vector<Rect>& v) {
    json a = json::array();
    for (const Rect& r : v) a.push_back({r.x0, r.x1, r.y0, r.y1});
    return a;
  };
  const TargetGeometry geo = c.resolved_geometry();
  j["regions"] = {{"tumor", rects(geo.tumor)}, {"risk", rects(geo.risk)}};
  j["objective"] = std::string(to_string(c.objective));
  j["materials"] = {{"tissue", medium(c.tissue)}, {"void", medium(c.void_medium)}};
  j["g"] = c.g;
  j["T"] = c.T;
  j["cfl"] = c.cfl;
  j["tracking_weights"] = {{"tumor", c.tracking.tumor}, {"risk", c.tracking.risk}, {"normal", c.tracking.normal}};
  j["tumor_dose"] = c.resolved_tumor_dose();
  j["survival_weights"] = {{"tumor", c.survival.tumor}, {"risk", c.survival.risk}, {"normal", c.survival.normal}};
  j["lq"] = {{"tumor", lq(c.lq.tumor)}, {"risk", lq(c.lq.risk)}, {"normal", lq(c.lq.normal)}};
  j["c2"] = c.c2;
  j["q_max"] = c.resolved_q_max();
  j["eps"] = c.resolved_eps();
  j["delta"] = c.resolved_delta();
  j["blocked"] = blocked;
  j["control"] = c.stationary ? "stationary" : "time_varying";
  j["adjoint"] = std::string(to_string(c.adjoint));
  const OptimizerConfig& o = c.optimizer;
  j["optimizer"] = {{"max_iterations", o.max_iterations}, {"tol", o.tol},
                    {"initial_step", o.initial_step},     {"shrink", o.shrink},
                    {"sufficient_decrease", o.sufficient_decrease},
                    {"max_backtracks", o.max_backtracks}, {"warm_start", o.warm_start},
                    {"bb_step", o.bb_step},               {"stall_window", o.stall_window},
                    {"stall_rtol", o.stall_rtol}};
  j["checkpoint_every"] = c.checkpoint_every;
  j["restart_from"] = c.restart_from;
  j["output_dir"] = c.resolved_output_dir();
  j["export_fields"] = c.export_fields;
  j["sn_angles"] = c.sn_angles;
  return j;
}

// ---------------------------------------------------------------------------

inline Scenario build_scenario(const RunConfig& c) {
  validate(c);
  Scenario s;
  s.grid = build_grid(c.nx, c.ny);
  s.target = c.target;
  s.regions = classify_regions(s.grid, c.resolved_geometry());
  s.materials = materials_from_regions(s.regions, c.void_medium, c.tissue, c.g);
  s.caps = source_cap(s.grid, c.resolved_q_max(), c.resolved_eps(), c.resolved_delta(), c.blocked);
  s.time = make_time_grid(s.grid, c.T, c.cfl);
  s.objective = c.objective;
  s.tracking = make_tracking_spec(s.regions, c.tracking, c.resolved_tumor_dose(), c.c2);
  s.cells = make_cell_model(s.regions, c.lq, c.survival, c.c2);
  s.lq = c.lq;
  s.solver.cfl = c.cfl;
  s.adjoint = c.adjoint;
  s.stationary = c.stationary;
  return s;
}

}  // namespace m1rt

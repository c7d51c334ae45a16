#pragma once

// One planning run end to end: manifest, optimization with streamed log and
// checkpoints, field exports and the summary report.
//
// Needs OpenSSL's libcrypto (manifest hash).

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "m1rt/config.hpp"
#include "m1rt/errors.hpp"
#include "m1rt/io.hpp"
#include "m1rt/objectives.hpp"
#include "m1rt/optimizer.hpp"
#include "m1rt/scenario.hpp"
#include "m1rt/sn_reference.hpp"

namespace m1rt {

inline constexpr const char* kVersion = "m1rt 1.0.0";
inline constexpr const char* kPartialMarker = "PARTIAL";

// git's object id for a blob with this content
inline std::string git_blob_sha1(const std::string& content) {
  std::string data = "blob " + std::to_string(content.size());
  data.push_back('\0');
  data += content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw SolverError("sha1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

inline json make_manifest(const RunConfig& c) {
  json cfg = to_json(c);
  const std::string canonical = cfg.dump(2) + "\n";
  return json{{"version", kVersion}, {"config_sha1", git_blob_sha1(canonical)}, {"config", cfg}};
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_for_write(path);
  out << text;
  finish_write(out, path);
}

// ---------------------------------------------------------------------------
// Derived display fields

// Average q0 over time (q0 itself for a stationary control).
inline std::vector<double> time_average_q0(const ControlField& q) {
  std::vector<double> v(q.cells(), 0.0);
  for (const MomentField& s : q.steps)
    for (std::size_t c = 0; c < v.size(); ++c) v[c] += s.psi0[c] / static_cast<double>(q.snapshots());
  return v;
}

// Integral over [0,T] of q1, per component.
inline std::pair<std::vector<double>, std::vector<double>> time_integrated_q1(const ControlField& q,
                                                                              const TimeGrid& time) {
  std::vector<double> x(q.cells(), 0.0), y(q.cells(), 0.0);
  const double w = control_time_weight(q, time);
  for (const MomentField& s : q.steps) {
    for (std::size_t c = 0; c < x.size(); ++c) {
      x[c] += w * s.psi1x[c];
      y[c] += w * s.psi1y[c];
    }
  }
  return {x, y};
}

// Band index floor(v / step), the isoline spacing of the dose and survival maps.
inline std::vector<double> band_map(const std::vector<double>& v, double step) {
  require(step > 0.0, "band_map: step must be > 0");
  std::vector<double> b(v.size());
  for (std::size_t c = 0; c < v.size(); ++c) b[c] = std::floor(std::max(v[c], 0.0) / step);
  return b;
}

inline json region_json(const RegionDoseStats& s) {
  return json{{"cells", s.cells},         {"area", s.area},
              {"mean_dose", s.mean_dose}, {"min_dose", s.min_dose},
              {"max_dose", s.max_dose},   {"mean_survival", s.mean_survival},
              {"survival_percent", 100.0 * s.mean_survival}, {"killed_percent", 100.0 * (1.0 - s.mean_survival)}};
}

inline json region_summary(const DoseMap& d, const Scenario& s) {
  json out;
  out["tumor"] = region_json(region_stats(d, s.regions, Region::Tumor, s.lq.tumor, s.grid));
  out["risk"] = region_json(region_stats(d, s.regions, Region::Risk, s.lq.risk, s.grid));
  out["normal"] = region_json(region_stats(d, s.regions, Region::Normal, s.lq.normal, s.grid));
  return out;
}

// ---------------------------------------------------------------------------

struct RunOutcome {
  fs::path dir;
  OptimizationResult optimization;
  DoseMap dose;
  json summary;
};

namespace detail {

inline ControlField initial_control(const RunConfig& c, const Scenario& s) {
  if (c.restart_from.empty()) return s.zero_control();
  ControlField q = read_control(c.restart_from);
  require(q.cells() == s.grid.size(), "restart_from: control does not match the grid");
  require(q.stationary == s.stationary, "restart_from: stationary/time-varying mode differs from config");
  validate_control(q, s.grid, s.time);
  return q;
}

inline void export_all(const fs::path& dir, const Scenario& s, const RunConfig& c, const ControlField& q,
                       const DoseMap& d) {
  export_field(s.grid, region_codes(s.regions), dir / "regions.csv");
  export_field(s.grid, s.caps.cap, dir / "source_cap.csv");
  export_field(s.grid, time_average_q0(q), dir / "q0.csv");
  const auto [q1x, q1y] = time_integrated_q1(q, s.time);
  export_vector_field(s.grid, q1x, q1y, dir / "q1.csv");
  export_field(s.grid, d.values, dir / "dose.csv");
  const double target_max = c.resolved_tumor_dose();
  if (target_max > 0.0) export_field(s.grid, band_map(d.values, 0.05 * target_max), dir / "dose_bands.csv");
  const std::vector<double> sf = survival_map(d, s.regions, s.lq);
  export_field(s.grid, sf, dir / "survival.csv");
  export_field(s.grid, band_map(sf, 0.1), dir / "survival_bands.csv");
}

}  // namespace detail

// Throws ValidationError for a bad config (nothing written) and SolverError
// for failures during the run (the output directory then holds PARTIAL).
inline RunOutcome run_scenario(const RunConfig& config, const IterationObserver& progress = {}) {
  validate(config);
  const Scenario scenario = build_scenario(config);
  RunOutcome out;
  out.dir = config.resolved_output_dir();
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  if (ec) throw SolverError("cannot create output directory " + out.dir.string() + ": " + ec.message());
  fs::remove(out.dir / kPartialMarker, ec);

  try {
    const auto t0 = std::chrono::steady_clock::now();
    write_text(out.dir / "manifest.json", make_manifest(config).dump(2) + "\n");
    const ControlField initial = detail::initial_control(config, scenario);

    ReducedObjective objective(scenario);
    IterationLog log(out.dir / "iterations.csv");
    auto observer = [&](const IterationRecord& rec, const ControlField& q) {
      if (!is_admissible(q, scenario.caps, 1e-12))
        throw SolverError("iterate " + std::to_string(rec.iteration) + " is not admissible");
      log.append(rec);
      if (config.checkpoint_every > 0 && rec.iteration % config.checkpoint_every == 0)
        write_control(q, out.dir / "control_checkpoint.txt");
      if (progress) progress(rec, q);
    };
    out.optimization = optimize(objective, scenario.caps, initial, config.optimizer, observer);
    write_control(out.optimization.control, out.dir / "control_final.txt");

    const ReducedObjective::Evaluation& e = objective.evaluate(out.optimization.control);
    out.dose = e.dose;
    if (config.export_fields) detail::export_all(out.dir, scenario, config, out.optimization.control, out.dose);

    const StepStats& st = objective.solve_stats();
    json summary;
    summary["name"] = config.name;
    summary["status"] = std::string(to_string(out.optimization.status));
    summary["iterations"] = out.optimization.history.back().iteration;
    summary["objective"] = e.value;
    summary["projected_gradient"] = out.optimization.final_residual();
    summary["regions"] = region_summary(out.dose, scenario);
    summary["solver"] = {{"forward_solves", objective.forward_solves()},
                         {"gradients", objective.gradients()},
                         {"steps", st.steps},
                         {"clamped_cells", st.clamped_cells},
                         {"realizability_failures", st.realizability_failures},
                         {"max_relative_violation", st.max_violation}};
    summary["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(out.dir / "summary.json", summary.dump(2) + "\n");
    out.summary = std::move(summary);
    return out;
  } catch (const std::exception& ex) {
    std::ofstream marker(out.dir / kPartialMarker);
    marker << "run aborted: " << ex.what() << "\n";
    throw;
  }
}

// ---------------------------------------------------------------------------
// S_N cross-check on a config's scenario.

struct OracleReport {
  double l1_relative = 0.0;
  std::vector<double> m1;
  std::vector<double> sn;
};

// Compares time-integrated psi0 of M1 and S_N for `control` (default: an
// isotropic source at the cap everywhere).
inline OracleReport oracle_compare(const Scenario& s, const ControlField& control, const SnOptions& opt) {
  OracleReport r;
  r.m1 = dose(solve_state(control, s.materials, s.grid, s.time, s.solver)).values;
  r.sn = sn_reference_solve(control, s.materials, s.grid, s.time.T, opt);
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < r.sn.size(); ++c) {
    num += std::abs(r.m1[c] - r.sn[c]);
    den += std::abs(r.sn[c]);
  }
  r.l1_relative = den > 0.0 ? num / den : 0.0;
  return r;
}

inline ControlField saturated_isotropic_control(const Scenario& s) {
  ControlField q = s.zero_control();
  for (MomentField& m : q.steps) m.psi0 = s.caps.cap;
  return q;
}

}  // namespace m1rt

// m1rt: treatment planning runs on the M1 transport model.
//
//   m1rt run <config.json>
//   m1rt preset <name> [--nx N] [--ny N] [--max-iter K] [--out DIR] [--print]
//   m1rt preset --list
//   m1rt validate <config.json>
//   m1rt oracle <config.json> [--angles N]
//
// Exit codes: 0 ok, 2 invalid input, 3 solver or I/O failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "m1rt/config.hpp"
#include "m1rt/errors.hpp"
#include "m1rt/io.hpp"
#include "m1rt/run.hpp"

using namespace m1rt;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitSolver = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_config(const RunConfig& cfg, bool quiet) {
  auto progress = [&](const IterationRecord& r, const ControlField&) {
    if (quiet) return;
    std::fprintf(stderr, "iter %5d  J=%.10g  |res|=%.3e  step=%.3e  bt=%d\n", r.iteration, r.objective,
                 r.projected_grad, r.step_size, r.backtracks);
  };
  RunOutcome out = run_scenario(cfg, progress);
  const json& reg = out.summary["regions"];
  std::printf("%s: %s after %d iterations, J=%.10g\n", cfg.name.c_str(),
              out.summary["status"].get<std::string>().c_str(), out.summary["iterations"].get<int>(),
              out.summary["objective"].get<double>());
  for (const char* r : {"tumor", "risk", "normal"}) {
    std::printf("  %-6s mean dose %8.4f  survival %6.2f%%\n", r, reg[r]["mean_dose"].get<double>(),
                reg[r]["survival_percent"].get<double>());
  }
  std::printf("artifacts in %s\n", out.dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"M1 transport treatment planning"};
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "optimize the scenario described by a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_flag("-q,--quiet", quiet, "no per-iteration progress");

  std::string preset_name;
  int nx = 0, ny = 0, max_iter = -1;
  std::string out_dir;
  bool list = false, print = false;
  auto* preset = app.add_subcommand("preset", "run a named preset");
  preset->add_option("name", preset_name, "e.g. basic-sf-baseline");
  preset->add_option("--nx", nx, "grid cells in x");
  preset->add_option("--ny", ny, "grid cells in y");
  preset->add_option("--max-iter", max_iter, "optimizer iteration limit");
  preset->add_option("--out", out_dir, "output directory");
  preset->add_flag("--list", list, "list preset names");
  preset->add_flag("--print", print, "print the resolved config instead of running");
  preset->add_flag("-q,--quiet", quiet, "no per-iteration progress");

  auto* val = app.add_subcommand("validate", "check a config without solving");
  val->add_option("config", config_path, "config file")->required();

  int angles = 0;
  auto* oracle = app.add_subcommand("oracle", "compare M1 against the discrete-ordinates reference");
  oracle->add_option("config", config_path, "config file")->required();
  oracle->add_option("--angles", angles, "8, 16 or 32 (default: config sn_angles)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*run) return run_config(parse_config(slurp(config_path)), quiet);

    if (*preset) {
      if (list) {
        for (const std::string& n : preset_names()) std::printf("%s\n", n.c_str());
        return 0;
      }
      if (preset_name.empty()) throw ValidationError("preset: name required (see --list)");
      RunConfig cfg = preset_config(preset_name);
      if (nx > 0) cfg.nx = nx;
      if (ny > 0) cfg.ny = ny;
      if (max_iter >= 0) cfg.optimizer.max_iterations = max_iter;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      validate(cfg);
      if (print) {
        std::printf("%s\n", to_json(cfg).dump(2).c_str());
        return 0;
      }
      return run_config(cfg, quiet);
    }

    if (*val) {
      const RunConfig cfg = parse_config(slurp(config_path));
      build_scenario(cfg);
      std::printf("%s\n", to_json(cfg).dump(2).c_str());
      return 0;
    }

    if (*oracle) {
      const RunConfig cfg = parse_config(slurp(config_path));
      const Scenario s = build_scenario(cfg);
      SnOptions opt;
      opt.n_angles = angles > 0 ? angles : cfg.sn_angles;
      opt.polar_levels = 0;
      opt.cfl = cfg.cfl;
      const ControlField q =
          cfg.restart_from.empty() ? saturated_isotropic_control(s) : read_control(cfg.restart_from);
      const OracleReport r = oracle_compare(s, q, opt);
      const fs::path dir = cfg.resolved_output_dir();
      export_field(s.grid, r.m1, dir / "oracle_m1_dose.csv");
      export_field(s.grid, r.sn, dir / "oracle_sn_dose.csv");
      std::printf("M1 vs S%d time-integrated psi0: relative L1 difference %.4f\n", opt.n_angles, r.l1_relative);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitInvalid;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return 0;
}

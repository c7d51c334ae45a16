#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "m1rt/run.hpp"

using namespace m1rt;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "m1rt_test_run" / name;
  fs::remove_all(d);
  return d;
}

RunConfig small(const std::string& preset, const std::string& dir, int iterations) {
  RunConfig c = preset_config(preset);
  c.nx = c.ny = 12;
  c.optimizer.max_iterations = iterations;
  c.output_dir = fresh_dir(dir).string();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST(GitBlobSha1, KnownObjectIds) {
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(RunScenario, ZeroIterationsGivesZeroDose) {
  const RunConfig c = small("basic-sf-baseline", "zero", 0);
  const RunOutcome out = run_scenario(c);
  EXPECT_EQ(out.optimization.status, OptimizerStatus::MaxIterations);
  for (double d : read_field_csv(out.dir / "dose.csv").values) EXPECT_EQ(d, 0.0);
  const json s = read_json(out.dir / "summary.json");
  EXPECT_EQ(s["iterations"], 0);
  EXPECT_EQ(s["regions"]["tumor"]["mean_survival"].get<double>(), 1.0);
  EXPECT_EQ(s["regions"]["tumor"]["killed_percent"].get<double>(), 0.0);
  EXPECT_EQ(s["solver"]["realizability_failures"], 0);
  EXPECT_FALSE(fs::exists(out.dir / kPartialMarker));
}

TEST(RunScenario, WritesEveryArtifact) {
  RunConfig c = small("intermediate-tracking-blocked", "artifacts", 4);
  c.checkpoint_every = 2;
  const RunOutcome out = run_scenario(c);
  for (const char* f : {"manifest.json", "iterations.csv", "control_final.txt", "control_checkpoint.txt",
                        "regions.csv", "source_cap.csv", "q0.csv", "q1_x.csv", "q1_y.csv", "dose.csv",
                        "dose_bands.csv", "survival.csv", "survival_bands.csv", "summary.json"})
    EXPECT_TRUE(fs::exists(out.dir / f)) << f;

  std::istringstream log(slurp(out.dir / "iterations.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, out.optimization.history.size() + 1);

  const Scenario s = build_scenario(c);
  EXPECT_EQ(regions_from_codes(read_field_csv(out.dir / "regions.csv").values), s.regions);
  EXPECT_TRUE(is_admissible(read_control(out.dir / "control_checkpoint.txt"), s.caps, 1e-12));
  EXPECT_EQ(read_control(out.dir / "control_final.txt"), out.optimization.control);
}

TEST(RunScenario, ExportFieldsOff) {
  RunConfig c = small("basic-tracking-baseline", "noexport", 1);
  c.export_fields = false;
  const RunOutcome out = run_scenario(c);
  EXPECT_FALSE(fs::exists(out.dir / "dose.csv"));
  EXPECT_TRUE(fs::exists(out.dir / "summary.json"));
}

TEST(RunScenario, Deterministic) {
  const RunOutcome a = run_scenario(small("complex-sf-blocked", "det_a", 6));
  const RunOutcome b = run_scenario(small("complex-sf-blocked", "det_b", 6));
  for (const char* f : {"dose.csv", "q0.csv", "q1_x.csv", "q1_y.csv", "survival.csv", "control_final.txt"})
    EXPECT_EQ(slurp(a.dir / f), slurp(b.dir / f)) << f;
  json sa = a.summary, sb = b.summary;
  sa.erase("wall_time");
  sb.erase("wall_time");
  EXPECT_EQ(sa, sb);
}

TEST(RunScenario, SummaryMatchesDoseCsv) {
  const RunConfig c = small("intermediate-sf-baseline", "summary", 5);
  const RunOutcome out = run_scenario(c);
  const Scenario s = build_scenario(c);
  const std::vector<double> d = read_field_csv(out.dir / "dose.csv").values;
  const json reg = read_json(out.dir / "summary.json")["regions"];
  for (auto [name, r] : {std::pair{"tumor", Region::Tumor}, std::pair{"risk", Region::Risk},
                         std::pair{"normal", Region::Normal}}) {
    double sum = 0.0, lo = 1e300, hi = -1e300;
    std::size_t n = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (s.regions.label[k] != r) continue;
      sum += d[k];
      lo = std::min(lo, d[k]);
      hi = std::max(hi, d[k]);
      ++n;
    }
    ASSERT_GT(n, 0u) << name;
    EXPECT_EQ(reg[name]["cells"], n);
    EXPECT_NEAR(reg[name]["mean_dose"].get<double>(), sum / n, 1e-12) << name;
    EXPECT_EQ(reg[name]["min_dose"].get<double>(), lo);
    EXPECT_EQ(reg[name]["max_dose"].get<double>(), hi);
  }
}

TEST(RunScenario, ManifestHashesCanonicalConfig) {
  const RunConfig c = small("basic-sf-low_risk", "manifest", 0);
  const RunOutcome out = run_scenario(c);
  const json m = read_json(out.dir / "manifest.json");
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_EQ(m["config"], to_json(c));
  EXPECT_EQ(m["config_sha1"], git_blob_sha1(m["config"].dump(2) + "\n"));
  // the manifest config is itself a valid config
  EXPECT_EQ(to_json(parse_config(std::string_view(m["config"].dump()))), to_json(c));
}

TEST(RunScenario, InvalidConfigWritesNothing) {
  RunConfig c = small("basic-sf-baseline", "invalid", 3);
  c.c2 = -1.0;
  EXPECT_THROW(run_scenario(c), ValidationError);
  EXPECT_FALSE(fs::exists(c.output_dir));
}

TEST(RunScenario, FailureLeavesPartialMarker) {
  RunConfig c = small("basic-sf-baseline", "partial", 3);
  c.restart_from = (fs::temp_directory_path() / "m1rt_test_run" / "no_such_control.txt").string();
  EXPECT_THROW(run_scenario(c), SolverError);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / kPartialMarker));
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "manifest.json"));

  // a later successful run in the same directory clears it
  c.restart_from.clear();
  run_scenario(c);
  EXPECT_FALSE(fs::exists(fs::path(c.output_dir) / kPartialMarker));
}

TEST(RunScenario, RestartResumesFromControl) {
  const RunOutcome first = run_scenario(small("basic-tracking-baseline", "restart_a", 8));
  RunConfig again = small("basic-tracking-baseline", "restart_b", 0);
  again.restart_from = (first.dir / "control_final.txt").string();
  const RunOutcome resumed = run_scenario(again);
  EXPECT_EQ(resumed.optimization.control, first.optimization.control);
  EXPECT_EQ(resumed.summary["objective"], first.summary["objective"]);
  EXPECT_EQ(slurp(resumed.dir / "dose.csv"), slurp(first.dir / "dose.csv"));

  RunConfig mismatch = small("basic-tracking-baseline", "restart_c", 2);
  mismatch.nx = 13;
  mismatch.restart_from = again.restart_from;
  EXPECT_THROW(run_scenario(mismatch), ValidationError);
  EXPECT_TRUE(fs::exists(fs::path(mismatch.output_dir) / kPartialMarker));
}

TEST(Oracle, SaturatedControlSitsOnCap) {
  RunConfig c = preset_config("basic-sf-baseline");
  c.nx = c.ny = 10;
  const Scenario s = build_scenario(c);
  const ControlField q = saturated_isotropic_control(s);
  EXPECT_TRUE(is_admissible(q, s.caps));
  EXPECT_EQ(q.steps[0].psi0, s.caps.cap);
  const OracleReport r = oracle_compare(s, q, {});
  EXPECT_EQ(r.m1.size(), s.grid.size());
  EXPECT_GT(r.l1_relative, 0.0);
  EXPECT_LT(r.l1_relative, 1.0);
}

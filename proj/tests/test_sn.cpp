#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "m1rt/run.hpp"
#include "m1rt/sn_reference.hpp"

using namespace m1rt;

namespace {

constexpr double kPi = std::numbers::pi;

double l1_rel(const std::vector<double>& a, const std::vector<double>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < ref.size(); ++c) {
    num += std::abs(a[c] - ref[c]);
    den += std::abs(ref[c]);
  }
  return num / den;
}

}  // namespace

TEST(SnDirections, FlatlandQuadrature) {
  for (int n : {8, 16, 32}) {
    const auto dirs = sn_directions({n, 0});
    ASSERT_EQ(dirs.size(), static_cast<std::size_t>(n));
    double w = 0, mx = 0, my = 0, xx = 0, xy = 0;
    for (const SnDirection& d : dirs) {
      EXPECT_NEAR(std::hypot(d.vx, d.vy), 1.0, 1e-15);
      EXPECT_EQ(d.vz, 0.0);
      w += d.weight;
      mx += d.weight * d.vx;
      my += d.weight * d.vy;
      xx += d.weight * d.vx * d.vx;
      xy += d.weight * d.vx * d.vy;
    }
    EXPECT_NEAR(w, 2 * kPi, 1e-13);
    EXPECT_NEAR(mx, 0.0, 1e-13);
    EXPECT_NEAR(my, 0.0, 1e-13);
    EXPECT_NEAR(xx, kPi, 1e-13);
    EXPECT_NEAR(xy, 0.0, 1e-13);
  }
}

TEST(SnDirections, SphereQuadrature) {
  const auto dirs = sn_directions({16, 4});
  ASSERT_EQ(dirs.size(), 2u * 4u * 16u);
  double w = 0, xx = 0, zz = 0;
  for (const SnDirection& d : dirs) {
    EXPECT_NEAR(d.vx * d.vx + d.vy * d.vy + d.vz * d.vz, 1.0, 1e-14);
    w += d.weight;
    xx += d.weight * d.vx * d.vx;
    zz += d.weight * d.vz * d.vz;
  }
  EXPECT_NEAR(w, 4 * kPi, 1e-12);
  EXPECT_NEAR(xx, 4 * kPi / 3, 1e-12);
  EXPECT_NEAR(zz, 4 * kPi / 3, 1e-12);
}

TEST(SnDirections, RejectsBadOptions) {
  EXPECT_THROW(sn_directions({12, 0}), ValidationError);
  EXPECT_THROW(sn_directions({16, -1}), ValidationError);
  EXPECT_THROW(sn_directions({16, 17}), ValidationError);
}

TEST(SnReference, GridGuard) {
  const Grid g = build_grid(65, 64);
  const MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  EXPECT_THROW(sn_reference_solve(ControlField::zero_stationary(g.size()), m, g, 1.0), ValidationError);
}

TEST(SnReference, ZeroControlGivesZeroDose) {
  const Grid g = build_grid(12, 12);
  const MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  for (double v : sn_reference_solve(ControlField::zero_stationary(g.size()), m, g, 2.0)) EXPECT_EQ(v, 0.0);
}

// Far from the boundary a uniform isotropic source sees an infinite medium:
// psi0 follows the explicit Euler recurrence of d/dt psi0 = -sigma_a psi0 + q0,
// scattering included.
TEST(SnReference, InteriorMatchesHomogeneousRecurrence) {
  const Grid g = build_grid(20, 20);
  const MediumParams p{0.3, 2.0};
  const MaterialField m = uniform_materials(g.size(), p, 0.6);
  MomentField q(g.size());
  std::fill(q.psi0.begin(), q.psi0.end(), 1.5);
  const double T = 0.3;
  for (int polar : {0, 3}) {
    const std::vector<double> d = sn_reference_solve(ControlField::stationary_from(q), m, g, T, {16, polar});
    const TimeGrid tg = make_time_grid(g, T);
    ASSERT_LT(tg.steps, 9);
    double psi = 0.0, expect = 0.0;
    for (int n = 0; n < tg.steps; ++n) {
      expect += tg.dt * psi;
      psi += tg.dt * (-p.sigma_a * psi + 1.5);
    }
    EXPECT_NEAR(d[g.index(9, 9)], expect, 1e-12 * expect) << "polar " << polar;
    EXPECT_NEAR(d[g.index(10, 10)], expect, 1e-12 * expect);
  }
}

TEST(SnReference, CenteredSourceIsMirrorSymmetric) {
  const Grid g = build_grid(16, 16);
  const MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  MomentField q(g.size());
  for (int j = 6; j < 10; ++j)
    for (int i = 6; i < 10; ++i) q.psi0[g.index(i, j)] = 2.0;
  const std::vector<double> d = sn_reference_solve(ControlField::stationary_from(q), m, g, 1.5);
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) {
      const double v = d[g.index(i, j)];
      EXPECT_NEAR(v, d[g.index(15 - i, j)], 1e-12 * (1.0 + v));
      EXPECT_NEAR(v, d[g.index(i, 15 - j)], 1e-12 * (1.0 + v));
      EXPECT_NEAR(v, d[g.index(j, i)], 1e-12 * (1.0 + v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(SnReference, DirectedSourcePushesDoseDownstream) {
  const Grid g = build_grid(20, 20);
  const MaterialField m = uniform_materials(g.size(), {0.2, 0.0}, 0.0);
  MomentField q(g.size());
  for (int j = 8; j < 12; ++j) q.set(g.index(2, j), {4.0, 3.9, 0.0});
  const std::vector<double> d = sn_reference_solve(ControlField::stationary_from(q), m, g, 2.0);
  double right = 0.0, left = 0.0;
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 20; ++i) {
      (i > 2 ? right : left) += d[g.index(i, j)];
    }
  }
  EXPECT_GT(right, 3.0 * left);
}

TEST(SnReference, AngularRefinementConverges) {
  RunConfig c = preset_config("basic-sf-baseline");
  c.nx = c.ny = 20;
  const Scenario s = build_scenario(c);
  MaterialField absorber = uniform_materials(s.grid.size(), {kTissueMedium.sigma_a, 0.0}, 0.0);
  const ControlField q = saturated_isotropic_control(s);
  const auto d8 = sn_reference_solve(q, absorber, s.grid, s.time.T, {8, 0});
  const auto d16 = sn_reference_solve(q, absorber, s.grid, s.time.T, {16, 0});
  const auto d32 = sn_reference_solve(q, absorber, s.grid, s.time.T, {32, 0});
  EXPECT_LT(l1_rel(d16, d32), l1_rel(d8, d32));
  EXPECT_LT(l1_rel(d16, d32), 0.05);
}

TEST(Oracle, PureAbsorberCentralSource) {
  const Grid g = build_grid(20, 20);
  const MaterialField m = uniform_materials(g.size(), {kTissueMedium.sigma_a, 0.0}, 0.0);
  MomentField q(g.size());
  for (int j = 0; j < 20; ++j)
    for (int i = 0; i < 20; ++i)
      if (std::abs(g.xc(i)) < 0.2 && std::abs(g.yc(j)) < 0.2) q.psi0[g.index(i, j)] = 1.0;
  const ControlField ctrl = ControlField::stationary_from(q);
  const std::vector<double> m1 = dose(solve_state(ctrl, m, g, make_time_grid(g, 5.0))).values;
  const std::vector<double> sn = sn_reference_solve(ctrl, m, g, 5.0, {16, 0});
  for (std::size_t k = 0; k < sn.size(); ++k) EXPECT_GE(m1[k], 0.0);
  // closure error of M1 itself: about 0.14 here and it does not shrink under
  // refinement (the strict check is in the acceptance run)
  std::printf("central source: M1 vs S16 relative L1 %.4f\n", l1_rel(m1, sn));
  EXPECT_LT(l1_rel(m1, sn), 0.25);
}

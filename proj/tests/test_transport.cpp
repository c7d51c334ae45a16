#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "m1rt/objectives.hpp"
#include "m1rt/transport.hpp"

using namespace m1rt;

namespace {

State3 random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double p = 0.01 + 3.0 * u(rng);
  const double r = p * std::sqrt(u(rng));
  const double th = 2.0 * std::numbers::pi * u(rng);
  return {p, r * std::cos(th), r * std::sin(th)};
}

double energy(const MomentField& u) {
  double e = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c)
    e += u.psi0[c] * u.psi0[c] + u.psi1x[c] * u.psi1x[c] + u.psi1y[c] * u.psi1y[c];
  return e;
}

// pulse of psi0 = 1 on the cells with center within `radius` of the origin
MomentField disc_pulse(const Grid& g, double radius) {
  MomentField u(g.size());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (std::hypot(g.xc(i), g.yc(j)) <= radius) u.psi0[g.index(i, j)] = 1.0;
  return u;
}

MomentField gaussian_pulse(const Grid& g) {
  MomentField u(g.size());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double r2 = g.xc(i) * g.xc(i) + g.yc(j) * g.yc(j);
      u.psi0[g.index(i, j)] = std::exp(-r2 / 0.02);
    }
  return u;
}

Trajectory free_run(const Grid& g, const MaterialField& m, double T, MomentField init, const SolverOptions& opt = {}) {
  const MomentField zero(g.size());
  return integrate(g, m, make_time_grid(g, T), std::move(init), [&](int) -> const MomentField& { return zero; },
                   StepMode::Forward, opt);
}

}  // namespace

TEST(NumericalFlux, ConsistentForEqualStates) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    const State3 u = random_state(rng);
    for (Axis a : {Axis::X, Axis::Y}) {
      const State3 h = numerical_flux(u, u, a);
      const State3 f = physical_flux(u, a);
      for (int v = 0; v < 3; ++v) EXPECT_DOUBLE_EQ(h[v], f[v]);
    }
  }
}

TEST(NumericalFlux, VacuumIsZero) {
  const State3 z{0.0, 0.0, 0.0};
  for (Axis a : {Axis::X, Axis::Y}) {
    const State3 h = numerical_flux(z, z, a);
    for (double v : h) EXPECT_EQ(v, 0.0);
  }
}

TEST(NumericalFlux, ReflectionSymmetry) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 1000; ++k) {
    const State3 l = random_state(rng);
    const State3 r = random_state(rng);
    const State3 lp{l[0], -l[1], l[2]};
    const State3 rp{r[0], -r[1], r[2]};
    const State3 h = numerical_flux(l, r, Axis::X);
    const State3 m = numerical_flux(rp, lp, Axis::X);
    // mirror x -> -x: mass and y-momentum fluxes flip sign, x-momentum flux keeps it
    EXPECT_NEAR(h[0], -m[0], 1e-14);
    EXPECT_NEAR(h[1], m[1], 1e-14);
    EXPECT_NEAR(h[2], -m[2], 1e-14);
  }
}

TEST(TimeGrid, RespectsCfl) {
  Grid g = build_grid(100, 100);
  TimeGrid t = make_time_grid(g, 5.0);
  EXPECT_LE(t.dt, kDefaultCfl * g.dx * (1 + 1e-14));
  EXPECT_NEAR(t.dt * t.steps, 5.0, 1e-12);
  EXPECT_THROW(make_time_grid(g, 0.0), ValidationError);
  EXPECT_THROW(make_time_grid(g, 5.0, 0.9), ValidationError);
}

TEST(Stepper, RejectsCflViolation) {
  Grid g = build_grid(10, 10);
  MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  M1Stepper st(g, m);
  MomentField u(g.size()), q(g.size());
  EXPECT_THROW(st.step(u, q, 0.5 * g.dx, StepMode::Forward), SolverError);
}

TEST(Stepper, ZeroStaysZero) {
  Grid g = build_grid(12, 9);
  MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  M1Stepper st(g, m);
  MomentField u(g.size()), q(g.size());
  for (int n = 0; n < 10; ++n) st.step(u, q, 0.4 * g.min_width(), StepMode::Forward);
  EXPECT_EQ(u, MomentField(g.size()));
}

TEST(SolveState, ZeroControlGivesZeroTrajectory) {
  Grid g = build_grid(16, 16);
  MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  TimeGrid t = make_time_grid(g, 1.0);
  Trajectory tr = solve_state(ControlField::zero_stationary(g.size()), m, g, t);
  for (const MomentField& s : tr.snapshots) EXPECT_EQ(s, MomentField(g.size()));
  EXPECT_EQ(tr.integral, MomentField(g.size()));
  EXPECT_EQ(tr.snapshot_steps.front(), 0);
  EXPECT_EQ(tr.snapshot_steps.back(), t.steps);
  EXPECT_LE(tr.snapshots.size(), static_cast<std::size_t>(kMaxSnapshots) + 1);
}

TEST(SolveState, HomogeneousOdeOracle) {
  Grid g = build_grid(20, 20);
  const double sa = 0.05;
  MaterialField m = uniform_materials(g.size(), {sa, 0.5}, 0.85);
  TimeGrid t = make_time_grid(g, 5.0);
  MomentField q(g.size());
  std::fill(q.psi0.begin(), q.psi0.end(), 1.0);
  SolverOptions opt;
  opt.boundary = Boundary::Periodic;
  Trajectory tr = solve_state(ControlField::stationary_from(q), m, g, t, opt);
  const double exact = (1.0 - std::exp(-sa * 5.0)) / sa;
  for (std::size_t c = 0; c < g.size(); ++c) {
    EXPECT_NEAR(tr.final_state.psi0[c] / exact, 1.0, 1e-3);
    EXPECT_EQ(tr.final_state.psi1x[c], 0.0);
  }
}

TEST(SolveState, IsotropicRunsAreLinear) {
  Grid g = build_grid(20, 20);
  MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  TimeGrid t = make_time_grid(g, 2.0);
  SolverOptions opt;
  opt.boundary = Boundary::Periodic;
  auto run = [&](double level) {
    MomentField q(g.size());
    std::fill(q.psi0.begin(), q.psi0.end(), level);
    return dose(solve_state(ControlField::stationary_from(q), m, g, t, opt)).values;
  };
  const auto a = run(0.7), b = run(1.9), ab = run(0.7 + 1.9);
  for (std::size_t c = 0; c < g.size(); ++c) EXPECT_NEAR(ab[c], a[c] + b[c], 1e-12 * ab[c]);
}

TEST(SolveState, EverySnapshotRealizable) {
  Grid g = build_grid(24, 24);
  RegionMap regions = classify_regions(g, TargetCase::Basic);
  MaterialField m = materials_from_regions(regions, kVoidMedium, kTissueMedium, 0.85);
  TimeGrid t = make_time_grid(g, 5.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MomentField q(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    // sources along the flux limit are the hardest case for the clamp
    const double p = 10.0 * u(rng);
    const double th = 2.0 * std::numbers::pi * u(rng);
    q.set(c, {p, kFluxLimit * p * std::cos(th), kFluxLimit * p * std::sin(th)});
  }
  long long checked = 0;
  SolverOptions opt;
  opt.observer = [&](int, const MomentField& s) {
    for (std::size_t c = 0; c < s.size(); ++c) {
      ASSERT_TRUE(is_realizable(s.psi0[c], s.psi1x[c], s.psi1y[c]));
      ++checked;
    }
  };
  Trajectory tr = solve_state(ControlField::stationary_from(q), m, g, t, opt);
  EXPECT_EQ(checked, static_cast<long long>(g.size()) * (t.steps + 1));
  EXPECT_EQ(tr.stats.realizability_failures, 0);
}

TEST(SolveState, IntegralMatchesLeftRule) {
  Grid g = build_grid(10, 10);
  MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  TimeGrid t = make_time_grid(g, 1.0);
  MomentField q(g.size());
  q.psi0[g.index(4, 5)] = 3.0;
  SolverOptions opt;
  opt.snapshot_stride = 1;
  Trajectory tr = solve_state(ControlField::stationary_from(q), m, g, t, opt);
  ASSERT_EQ(static_cast<int>(tr.snapshots.size()), t.steps + 1);
  for (std::size_t c = 0; c < g.size(); ++c) {
    double sum = 0.0;
    for (int n = 0; n < t.steps; ++n) sum += t.dt * tr.snapshots[static_cast<std::size_t>(n)].psi0[c];
    EXPECT_NEAR(tr.integral.psi0[c], sum, 1e-13);
  }
}

TEST(SolveState, TimeVaryingControlMatchesStationaryWhenConstant) {
  Grid g = build_grid(12, 12);
  MaterialField m = uniform_materials(g.size(), kTissueMedium, 0.85);
  TimeGrid t = make_time_grid(g, 0.5);
  MomentField q(g.size());
  q.set(g.index(0, 6), {2.0, 1.5, 0.0});
  ControlField tv = ControlField::zero_time_varying(g.size(), t.steps);
  for (MomentField& s : tv.steps) s = q;
  EXPECT_EQ(dose(solve_state(tv, m, g, t)).values, dose(solve_state(ControlField::stationary_from(q), m, g, t)).values);
  ControlField short_tv = ControlField::zero_time_varying(g.size(), t.steps - 1);
  EXPECT_THROW(solve_state(short_tv, m, g, t), ValidationError);
}

TEST(Dissipation, QuadraticNormNonIncreasingWithoutSources) {
  Grid g = build_grid(30, 30);
  for (MediumParams p : {MediumParams{1e-3, 0.0}, kTissueMedium, kVoidMedium}) {
    MaterialField m = uniform_materials(g.size(), p, 0.85);
    std::mt19937_64 rng(4);
    MomentField u(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) u.set(c, random_state(rng));
    M1Stepper st(g, m);
    const MomentField q(g.size());
    double prev = energy(u);
    for (int n = 0; n < 300; ++n) {
      st.step(u, q, kDefaultCfl * g.dx, StepMode::Forward);
      const double e = energy(u);
      ASSERT_LE(e, prev * (1.0 + 1e-14)) << "step " << n;
      prev = e;
    }
  }
}

TEST(Propagation, SupportGrowsAtMostOneCellPerStep) {
  Grid g = build_grid(61, 61);
  MaterialField m = uniform_materials(g.size(), {1e-3, 0.0}, 0.0);
  MomentField u(g.size());
  u.psi0[g.index(30, 30)] = 1.0;
  M1Stepper st(g, m);
  const MomentField q(g.size());
  for (int n = 1; n <= 25; ++n) {
    st.step(u, q, kDefaultCfl * g.dx, StepMode::Forward);
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        if (u.psi0[g.index(i, j)] != 0.0) {
          ASSERT_LE(std::abs(i - 30) + std::abs(j - 30), n);
        }
      }
    }
  }
}

TEST(Propagation, MassStaysWithinLightCone) {
  // mass-weighted radius of a pulse against the distance light travels, plus one cell
  Grid g = build_grid(81, 81);
  MaterialField m = uniform_materials(g.size(), {1e-3, 0.0}, 0.0);
  MomentField u = disc_pulse(g, 0.1);
  auto mean_radius = [&](const MomentField& s) {
    double num = 0.0, den = 0.0;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        num += s.psi0[g.index(i, j)] * std::hypot(g.xc(i), g.yc(j));
        den += s.psi0[g.index(i, j)];
      }
    return num / den;
  };
  const double r0 = mean_radius(u);
  M1Stepper st(g, m);
  const MomentField q(g.size());
  const double dt = kDefaultCfl * g.dx;
  for (int n = 1; n <= 40; ++n) {
    st.step(u, q, dt, StepMode::Forward);
    EXPECT_LE(mean_radius(u), r0 + n * dt + g.dx) << "step " << n;
  }
}

TEST(Convergence, PureAbsorberPulseIsFirstOrder) {
  const double T = 0.4;
  auto solve = [&](int n) {
    Grid g = build_grid(n, n);
    MaterialField m = uniform_materials(g.size(), {0.05, 0.0}, 0.0);
    return free_run(g, m, T, gaussian_pulse(g)).final_state.psi0;
  };
  const int finest = 80;
  const int ref_n = 4 * finest;
  const std::vector<double> ref = solve(ref_n);
  auto error = [&](int n) {
    const std::vector<double> u = solve(n);
    const int r = ref_n / n;
    double err = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        double avg = 0.0;
        for (int b = 0; b < r; ++b)
          for (int a = 0; a < r; ++a)
            avg += ref[static_cast<std::size_t>((j * r + b) * ref_n + i * r + a)];
        avg /= r * r;
        err += std::abs(u[static_cast<std::size_t>(j * n + i)] - avg);
      }
    return err * (2.0 / n) * (2.0 / n);
  };
  const double e20 = error(20), e40 = error(40), e80 = error(80);
  EXPECT_GE(e20 / e40, 1.4) << e20 << " " << e40;
  EXPECT_GE(e40 / e80, 1.4) << e40 << " " << e80;
}

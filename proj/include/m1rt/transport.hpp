#pragma once

// Finite-volume solver for the M1 moment system: forward state solve and the
// backward adjoint solve (run as a forward solve in reversed time).
//
// Unknowns per cell: u = (psi0, psi1x, psi1y). Flux in direction x is
// (psi1x, P_xx, P_xy), in y (psi1y, P_xy, P_yy), with P = D(f) psi0 from the
// M1 closure. Rusanov flux with wave speed 1, explicit Euler in time, vacuum
// ghost states at the domain boundary.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/physics.hpp"

namespace m1rt {

inline constexpr double kDefaultCfl = 0.45;

using State3 = std::array<double, 3>;

enum class Axis { X, Y };
enum class Boundary { Vacuum, Periodic };

struct MomentField {
  std::vector<double> psi0;
  std::vector<double> psi1x;
  std::vector<double> psi1y;

  MomentField() = default;
  explicit MomentField(std::size_t n) : psi0(n, 0.0), psi1x(n, 0.0), psi1y(n, 0.0) {}

  std::size_t size() const { return psi0.size(); }
  State3 at(std::size_t c) const { return {psi0[c], psi1x[c], psi1y[c]}; }
  void set(std::size_t c, const State3& u) {
    psi0[c] = u[0];
    psi1x[c] = u[1];
    psi1y[c] = u[2];
  }
  void fill_zero() {
    std::fill(psi0.begin(), psi0.end(), 0.0);
    std::fill(psi1x.begin(), psi1x.end(), 0.0);
    std::fill(psi1y.begin(), psi1y.end(), 0.0);
  }
  // this += s * other
  void axpy(double s, const MomentField& other) {
    for (std::size_t c = 0; c < size(); ++c) {
      psi0[c] += s * other.psi0[c];
      psi1x[c] += s * other.psi1x[c];
      psi1y[c] += s * other.psi1y[c];
    }
  }
  friend bool operator==(const MomentField&, const MomentField&) = default;
};

inline bool is_realizable(double psi0, double psi1x, double psi1y) {
  return psi0 >= 0.0 && std::hypot(psi1x, psi1y) <= psi0;
}

// Time-indexed source moments; a stationary control holds one snapshot reused at every step.
struct ControlField {
  bool stationary = true;
  std::vector<MomentField> steps;

  static ControlField zero_stationary(std::size_t cells) { return {true, {MomentField(cells)}}; }
  static ControlField zero_time_varying(std::size_t cells, int nsteps) {
    return {false, std::vector<MomentField>(static_cast<std::size_t>(nsteps), MomentField(cells))};
  }
  static ControlField stationary_from(MomentField q) { return {true, {std::move(q)}}; }

  std::size_t cells() const { return steps.empty() ? 0 : steps.front().size(); }
  std::size_t snapshots() const { return steps.size(); }
  const MomentField& at(int step) const { return stationary ? steps.front() : steps.at(static_cast<std::size_t>(step)); }
  friend bool operator==(const ControlField&, const ControlField&) = default;
};

struct TimeGrid {
  double T = 0.0;
  int steps = 0;
  double dt = 0.0;

  double t(int n) const { return n * dt; }
  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

// Smallest step count whose dt satisfies dt <= cfl * min(dx, dy).
inline TimeGrid make_time_grid(const Grid& grid, double T, double cfl = kDefaultCfl) {
  require(T > 0.0 && std::isfinite(T), "final time T must be > 0");
  require(cfl > 0.0 && cfl <= kDefaultCfl, "cfl must be in (0, 0.45]");
  const double dt_max = cfl * grid.min_width();
  const int n = static_cast<int>(std::ceil(T / dt_max - 1e-9));
  return {T, n, T / n};
}

// ---------------------------------------------------------------------------
// Fluxes

inline State3 physical_flux(const State3& u, Axis axis) {
  const Pressure p = closure_pressure(u[0], u[1], u[2]);
  if (axis == Axis::X) return {u[1], p.xx, p.xy};
  return {u[2], p.xy, p.yy};
}

// Rusanov flux with unit wave speed, the bound on every M1 characteristic speed.
inline State3 rusanov(const State3& fl, const State3& fr, const State3& ul, const State3& ur) {
  return {0.5 * (fl[0] + fr[0]) - 0.5 * (ur[0] - ul[0]), 0.5 * (fl[1] + fr[1]) - 0.5 * (ur[1] - ul[1]),
          0.5 * (fl[2] + fr[2]) - 0.5 * (ur[2] - ul[2])};
}

inline State3 numerical_flux(const State3& left, const State3& right, Axis normal) {
  return rusanov(physical_flux(left, normal), physical_flux(right, normal), left, right);
}

// ---------------------------------------------------------------------------
// Stepper

enum class StepMode {
  Forward,  // realizable state, clamped after every step
  Signed,   // adjoint: signed density, closure on magnitudes, no clamp
};

struct StepStats {
  long long steps = 0;
  long long clamped_cells = 0;         // cells the clamp had to touch beyond roundoff
  long long realizability_failures = 0;  // cells still unrealizable after the clamp (must stay 0)
  double max_violation = 0.0;          // largest relative pre-clamp violation seen
};

class M1Stepper {
public:
  M1Stepper(const Grid& grid, const MaterialField& materials, Boundary boundary = Boundary::Vacuum,
            double cfl = kDefaultCfl)
      : grid_(grid), mat_(materials), boundary_(boundary), cfl_(cfl) {
    require(materials.size() == grid.size(), "materials do not match grid");
    const auto n = grid.size();
    for (auto* v : {&fx0_, &fx1_, &fx2_, &fy0_, &fy1_, &fy2_, &r0_, &r1_, &r2_}) v->assign(n, 0.0);
  }

  const Grid& grid() const { return grid_; }
  Boundary boundary() const { return boundary_; }

  void check_dt(double dt) const {
    const double limit = cfl_ * grid_.min_width() * (1.0 + 1e-12);
    if (!(dt > 0.0) || dt > limit) {
      std::ostringstream os;
      os << "CFL violation: dt=" << dt << " exceeds " << cfl_ << "*min(dx,dy)=" << cfl_ * grid_.min_width();
      throw SolverError(os.str());
    }
  }

  // Advances u by one explicit step under source q. `pre_clamp`, if given,
  // receives the update before the realizability clamp.
  void step(MomentField& u, const MomentField& q, double dt, StepMode mode, StepStats* stats = nullptr,
            MomentField* pre_clamp = nullptr) {
    check_dt(dt);
    const int nx = grid_.nx;
    const int ny = grid_.ny;
    const std::size_t n = grid_.size();

    for (std::size_t c = 0; c < n; ++c) {
      const Pressure p = closure_pressure(u.psi0[c], u.psi1x[c], u.psi1y[c]);
      fx0_[c] = u.psi1x[c];
      fx1_[c] = p.xx;
      fx2_[c] = p.xy;
      fy0_[c] = u.psi1y[c];
      fy1_[c] = p.xy;
      fy2_[c] = p.yy;
    }
    std::fill(r0_.begin(), r0_.end(), 0.0);
    std::fill(r1_.begin(), r1_.end(), 0.0);
    std::fill(r2_.begin(), r2_.end(), 0.0);

    const bool periodic = boundary_ == Boundary::Periodic;
    const double inv_dx = 1.0 / grid_.dx;
    const double inv_dy = 1.0 / grid_.dy;

    // x faces: face i sits between cells i-1 and i
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        if (periodic && i == nx) continue;  // same face as i == 0
        const bool has_left = i > 0 || periodic;
        const bool has_right = i < nx;
        const std::size_t l = grid_.index(i > 0 ? i - 1 : nx - 1, j);
        const std::size_t r = grid_.index(i < nx ? i : 0, j);
        State3 ul{}, ur{}, fl{}, fr{};
        if (has_left) ul = u.at(l), fl = {fx0_[l], fx1_[l], fx2_[l]};
        if (has_right) ur = u.at(r), fr = {fx0_[r], fx1_[r], fx2_[r]};
        const State3 h = rusanov(fl, fr, ul, ur);
        if (has_left) accumulate(l, h, -inv_dx);
        if (has_right) accumulate(r, h, inv_dx);
      }
    }
    // y faces: face j sits between cells j-1 and j
    for (int j = 0; j <= ny; ++j) {
      if (periodic && j == ny) continue;
      const bool has_below = j > 0 || periodic;
      const bool has_above = j < ny;
      for (int i = 0; i < nx; ++i) {
        const std::size_t b = grid_.index(i, j > 0 ? j - 1 : ny - 1);
        const std::size_t a = grid_.index(i, j < ny ? j : 0);
        State3 ub{}, ua{}, fb{}, fa{};
        if (has_below) ub = u.at(b), fb = {fy0_[b], fy1_[b], fy2_[b]};
        if (has_above) ua = u.at(a), fa = {fy0_[a], fy1_[a], fy2_[a]};
        const State3 h = rusanov(fb, fa, ub, ua);
        if (has_below) accumulate(b, h, -inv_dy);
        if (has_above) accumulate(a, h, inv_dy);
      }
    }

    bool finite = true;
    for (std::size_t c = 0; c < n; ++c) {
      const double damp = mat_.flux_damping(c);
      double p0 = u.psi0[c] + dt * (r0_[c] - mat_.sigma_a[c] * u.psi0[c] + q.psi0[c]);
      double p1x = u.psi1x[c] + dt * (r1_[c] - damp * u.psi1x[c] + q.psi1x[c]);
      double p1y = u.psi1y[c] + dt * (r2_[c] - damp * u.psi1y[c] + q.psi1y[c]);
      finite = finite && std::isfinite(p0) && std::isfinite(p1x) && std::isfinite(p1y);
      if (pre_clamp) pre_clamp->set(c, {p0, p1x, p1y});
      if (mode == StepMode::Forward) {
        const double mag = std::hypot(p1x, p1y);
        const double violation = std::max(-p0, mag - p0);
        if (violation > 1e-12 * std::max(std::abs(p0), 1e-300) && stats) {
          ++stats->clamped_cells;
          stats->max_violation = std::max(stats->max_violation, violation / std::max(std::abs(p0), 1e-300));
        }
        const Moments m = realizability_clamp(p0, {p1x, p1y}, 0.0);
        p0 = m.psi0;
        p1x = m.psi1.x;
        p1y = m.psi1.y;
        if (stats && !is_realizable(p0, p1x, p1y)) ++stats->realizability_failures;
      }
      u.psi0[c] = p0;
      u.psi1x[c] = p1x;
      u.psi1y[c] = p1y;
    }
    if (!finite) throw SolverError("non-finite moment state after step");
    if (stats) ++stats->steps;
  }

private:
  void accumulate(std::size_t c, const State3& h, double s) {
    r0_[c] += s * h[0];
    r1_[c] += s * h[1];
    r2_[c] += s * h[2];
  }

  Grid grid_;
  const MaterialField& mat_;
  Boundary boundary_;
  double cfl_;
  std::vector<double> fx0_, fx1_, fx2_, fy0_, fy1_, fy2_, r0_, r1_, r2_;
};

// ---------------------------------------------------------------------------
// Solves

struct SolverOptions {
  Boundary boundary = Boundary::Vacuum;
  double cfl = kDefaultCfl;
  // keep every k-th state; 0 picks the smallest k giving <= 200 snapshots
  int snapshot_stride = 0;
  // called with (step n, state u^n) for n = 0..N
  std::function<void(int, const MomentField&)> observer;
};

inline constexpr int kMaxSnapshots = 200;

struct Trajectory {
  TimeGrid time;
  int stride = 1;
  std::vector<int> snapshot_steps;
  std::vector<MomentField> snapshots;
  // left-rectangle time integral: sum_{n<N} dt * u^n
  MomentField integral;
  MomentField final_state;
  // adjoint trajectories are stored in reversed time tau = T - t with the
  // first moment sign-flipped; see adjoint_at_control_step
  bool reversed = false;
  StepStats stats;

  const MomentField* snapshot_at_step(int n) const {
    if (n % stride != 0) return nullptr;
    const auto k = static_cast<std::size_t>(n / stride);
    return k < snapshots.size() ? &snapshots[k] : nullptr;
  }
};

inline int resolve_stride(int requested, int steps) {
  if (requested > 0) return requested;
  return std::max(1, (steps + 1 + kMaxSnapshots - 1) / kMaxSnapshots);
}

inline Trajectory integrate(const Grid& grid, const MaterialField& materials, const TimeGrid& time,
                            MomentField initial, const std::function<const MomentField&(int)>& source,
                            StepMode mode, const SolverOptions& opt) {
  require(initial.size() == grid.size(), "initial state does not match grid");
  M1Stepper stepper(grid, materials, opt.boundary, opt.cfl);
  stepper.check_dt(time.dt);

  Trajectory traj;
  traj.time = time;
  traj.stride = resolve_stride(opt.snapshot_stride, time.steps);
  traj.integral = MomentField(grid.size());

  MomentField u = std::move(initial);
  for (int n = 0; n <= time.steps; ++n) {
    if (n % traj.stride == 0 || n == time.steps) {
      traj.snapshot_steps.push_back(n);
      traj.snapshots.push_back(u);
    }
    if (opt.observer) opt.observer(n, u);
    if (n == time.steps) break;
    traj.integral.axpy(time.dt, u);
    stepper.step(u, source(n), time.dt, mode, &traj.stats);
  }
  traj.final_state = std::move(u);
  return traj;
}

inline void validate_control(const ControlField& q, const Grid& grid, const TimeGrid& time) {
  require(!q.steps.empty() && q.cells() == grid.size(), "control does not match grid");
  require(q.stationary || static_cast<int>(q.steps.size()) == time.steps,
          "time-varying control must have one snapshot per time step");
}

// Control-to-state map: zero initial state, zero inflow, source q.
inline Trajectory solve_state(const ControlField& control, const MaterialField& materials, const Grid& grid,
                              const TimeGrid& time, const SolverOptions& opt = {}) {
  validate_control(control, grid, time);
  return integrate(
      grid, materials, time, MomentField(grid.size()),
      [&](int n) -> const MomentField& { return control.at(n); }, StepMode::Forward, opt);
}

// Adjoint of the transport problem for an isotropic, time-constant source r.
// With tau = T - t and the first moment reflected, the backward problem turns
// into a forward one driven by r; it is integrated with the same kernel.
inline Trajectory solve_adjoint(const std::vector<double>& r, const MaterialField& materials, const Grid& grid,
                                const TimeGrid& time, const SolverOptions& opt = {}) {
  require(r.size() == grid.size(), "adjoint source does not match grid");
  for (double v : r) require(std::isfinite(v), "adjoint source must be finite");
  MomentField source(grid.size());
  source.psi0 = r;
  Trajectory traj = integrate(
      grid, materials, time, MomentField(grid.size()),
      [&](int) -> const MomentField& { return source; }, StepMode::Signed, opt);
  traj.reversed = true;
  return traj;
}

// Adjoint moments paired with the control applied at forward step m, in the
// original time orientation. Explicit Euler: q^m first affects u^{m+1}, whose
// last dose contribution is at step N-1, so it pairs with reversed step N-1-m.
inline State3 adjoint_at_control_step(const Trajectory& adj, int m, std::size_t c) {
  const int k = adj.time.steps - 1 - m;
  const MomentField* s = adj.snapshot_at_step(k);
  if (!s) throw SolverError("adjoint snapshot for step " + std::to_string(k) + " not stored (need stride 1)");
  return {s->psi0[c], -s->psi1x[c], -s->psi1y[c]};
}

}  // namespace m1rt

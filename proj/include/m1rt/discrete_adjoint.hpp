#pragma once

// Exact adjoint of the discrete forward M1 scheme.
//
// For a dose functional Phi(D) with L2 derivative r, the sensitivity returned
// here satisfies  dPhi = <sensitivity, dq>  in the control inner product,
// matching finite differences of the discrete control-to-dose map. States are
// recomputed segment by segment from the forward trajectory's checkpoints.

#include <array>
#include <cstddef>
#include <vector>

#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/physics.hpp"
#include "m1rt/transport.hpp"

namespace m1rt {

namespace detail {

// Flux Jacobians A_x = dF_x/du and A_y = dF_y/du, row-major 3x3.
struct FluxJacobians {
  std::array<double, 9> ax;
  std::array<double, 9> ay;
};

inline FluxJacobians flux_jacobians(double psi0, double psi1x, double psi1y) {
  const PressureJacobian pj = closure_pressure_jacobian(psi0, psi1x, psi1y);
  FluxJacobians j;
  j.ax = {0.0, 1.0, 0.0, pj.xx[0], pj.xx[1], pj.xx[2], pj.xy[0], pj.xy[1], pj.xy[2]};
  j.ay = {0.0, 0.0, 1.0, pj.xy[0], pj.xy[1], pj.xy[2], pj.yy[0], pj.yy[1], pj.yy[2]};
  return j;
}

// out += s * (0.5 * (A + sign I))^T v
inline void add_face_transpose(State3& out, const std::array<double, 9>& a, double sign, const State3& v,
                               double s) {
  for (int col = 0; col < 3; ++col) {
    double acc = sign * v[col];
    for (int row = 0; row < 3; ++row) acc += a[row * 3 + col] * v[row];
    out[col] += 0.5 * s * acc;
  }
}

// Transpose of the clamp Jacobian at pre-clamp state p, applied to mu.
inline State3 clamp_transpose(const State3& p, const State3& mu) {
  if (p[0] < 0.0) return {0.0, 0.0, 0.0};
  const double mag = std::hypot(p[1], p[2]);
  const double bound = kFluxLimit * p[0];
  if (mag <= bound) return mu;
  const double nx = p[1] / mag;
  const double ny = p[2] / mag;
  const double radial = nx * mu[1] + ny * mu[2];
  const double scale = bound / mag;
  return {mu[0] + kFluxLimit * radial, scale * (mu[1] - nx * radial), scale * (mu[2] - ny * radial)};
}

}  // namespace detail

class M1AdjointStepper {
public:
  M1AdjointStepper(const Grid& grid, const MaterialField& materials, Boundary boundary)
      : grid_(grid), mat_(materials), boundary_(boundary), jac_(grid.size()), out_(grid.size()) {}

  // lambda <- M(u)^T mu + dt * r e0, where M(u) is the Jacobian of the
  // pre-clamp update with respect to the state u.
  void transpose_step(const MomentField& u, const MomentField& mu, const std::vector<double>& r, double dt,
                      MomentField& lambda) {
    const int nx = grid_.nx;
    const int ny = grid_.ny;
    const std::size_t n = grid_.size();
    for (std::size_t c = 0; c < n; ++c) {
      jac_[c] = detail::flux_jacobians(u.psi0[c], u.psi1x[c], u.psi1y[c]);
      out_[c] = {0.0, 0.0, 0.0};
    }
    const bool periodic = boundary_ == Boundary::Periodic;
    const double sx = dt / grid_.dx;
    const double sy = dt / grid_.dy;

    // Residual contributions: R_L -= H/h, R_R += H/h with
    // dH/du_L = (A_L + I)/2, dH/du_R = (A_R - I)/2. Ghost cells carry mu = 0.
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i <= nx; ++i) {
        if (periodic && i == nx) continue;
        const bool has_left = i > 0 || periodic;
        const bool has_right = i < nx;
        const std::size_t l = grid_.index(i > 0 ? i - 1 : nx - 1, j);
        const std::size_t rr = grid_.index(i < nx ? i : 0, j);
        const State3 ml = has_left ? mu.at(l) : State3{};
        const State3 mr = has_right ? mu.at(rr) : State3{};
        const State3 diff{mr[0] - ml[0], mr[1] - ml[1], mr[2] - ml[2]};
        if (has_left) detail::add_face_transpose(out_[l], jac_[l].ax, 1.0, diff, sx);
        if (has_right) detail::add_face_transpose(out_[rr], jac_[rr].ax, -1.0, diff, sx);
      }
    }
    for (int j = 0; j <= ny; ++j) {
      if (periodic && j == ny) continue;
      const bool has_below = j > 0 || periodic;
      const bool has_above = j < ny;
      for (int i = 0; i < nx; ++i) {
        const std::size_t b = grid_.index(i, j > 0 ? j - 1 : ny - 1);
        const std::size_t a = grid_.index(i, j < ny ? j : 0);
        const State3 mb = has_below ? mu.at(b) : State3{};
        const State3 ma = has_above ? mu.at(a) : State3{};
        const State3 diff{ma[0] - mb[0], ma[1] - mb[1], ma[2] - mb[2]};
        if (has_below) detail::add_face_transpose(out_[b], jac_[b].ay, 1.0, diff, sy);
        if (has_above) detail::add_face_transpose(out_[a], jac_[a].ay, -1.0, diff, sy);
      }
    }
    for (std::size_t c = 0; c < n; ++c) {
      const double damp = mat_.flux_damping(c);
      lambda.psi0[c] = mu.psi0[c] * (1.0 - dt * mat_.sigma_a[c]) + out_[c][0] + dt * r[c];
      lambda.psi1x[c] = mu.psi1x[c] * (1.0 - dt * damp) + out_[c][1];
      lambda.psi1y[c] = mu.psi1y[c] * (1.0 - dt * damp) + out_[c][2];
    }
  }

private:
  Grid grid_;
  const MaterialField& mat_;
  Boundary boundary_;
  std::vector<detail::FluxJacobians> jac_;
  std::vector<State3> out_;
};

// Sensitivity of <r, dose>_Z to the control, as an element of the control
// space (time-averaged for stationary controls). `forward` must be the state
// trajectory of `q` computed with the same options.
inline ControlField discrete_adjoint_sensitivity(const ControlField& q, const Trajectory& forward,
                                                 const std::vector<double>& r, const MaterialField& materials,
                                                 const Grid& grid, const SolverOptions& opt = {}) {
  const TimeGrid& time = forward.time;
  const std::size_t n = grid.size();
  validate_control(q, grid, time);
  require(r.size() == n, "adjoint source does not match grid");
  require(!forward.reversed, "discrete adjoint needs the forward trajectory");

  ControlField sens = q.stationary ? ControlField::zero_stationary(n) : ControlField::zero_time_varying(n, time.steps);
  M1Stepper stepper(grid, materials, opt.boundary, opt.cfl);
  M1AdjointStepper adjoint(grid, materials, opt.boundary);

  const int k = forward.stride;
  std::vector<MomentField> states(static_cast<std::size_t>(k), MomentField(n));
  std::vector<MomentField> pre(static_cast<std::size_t>(k), MomentField(n));
  MomentField lambda(n);  // adjoint of u^{n+1}
  MomentField mu(n);
  MomentField next(n);

  const int segments = (time.steps + k - 1) / k;
  for (int seg = segments - 1; seg >= 0; --seg) {
    const int start = seg * k;
    const int end = std::min(start + k, time.steps);
    const MomentField* checkpoint = forward.snapshot_at_step(start);
    if (!checkpoint) throw SolverError("forward checkpoint missing at step " + std::to_string(start));
    MomentField u = *checkpoint;
    for (int m = start; m < end; ++m) {
      const auto slot = static_cast<std::size_t>(m - start);
      states[slot] = u;
      stepper.step(u, q.at(m), time.dt, StepMode::Forward, nullptr, &pre[slot]);
    }
    for (int m = end - 1; m >= start; --m) {
      const auto slot = static_cast<std::size_t>(m - start);
      for (std::size_t c = 0; c < n; ++c) mu.set(c, detail::clamp_transpose(pre[slot].at(c), lambda.at(c)));
      // u^{m+1} depends on q^m through dt * q^m; L2 representative divides by dt
      if (q.stationary) {
        sens.steps.front().axpy(time.dt / time.T, mu);
      } else {
        sens.steps[static_cast<std::size_t>(m)] = mu;
      }
      adjoint.transpose_step(states[slot], mu, r, time.dt, next);
      std::swap(lambda, next);
    }
  }
  return sens;
}

}  // namespace m1rt

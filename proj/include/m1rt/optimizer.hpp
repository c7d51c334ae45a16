#pragma once

// Projected gradient descent over admissible control moments with Armijo
// backtracking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/physics.hpp"
#include "m1rt/transport.hpp"

namespace m1rt {

// Euclidean projection of (t, v) = (q0, q1) onto {|v| <= k t, t <= cap}, k = 1 - 1e-8.
inline void project_moment(double& t, double& vx, double& vy, double cap) {
  constexpr double k = kFluxLimit;
  const double mag = std::hypot(vx, vy);
  if (mag <= k * t * (1.0 + 4e-16)) {
    // inside the cone, or on it up to roundoff (keeps projection exactly idempotent)
  } else if (t <= -k * mag) {
    t = vx = vy = 0.0;
    return;
  } else {
    // onto the cone's boundary ray (1, k v/|v|)
    const double a = (t + k * mag) / (1.0 + k * k);
    const double s = mag > 0.0 ? k * a / mag : 0.0;
    t = a;
    vx *= s;
    vy *= s;
  }
  if (t > cap) {
    // the cap is active: project onto the disc {t = cap, |v| <= k cap}
    t = cap;
    const double m = std::hypot(vx, vy);
    if (m > k * cap) {
      const double s = k * cap / m;
      vx *= s;
      vy *= s;
    }
  }
}

// Closest admissible control in the control inner product, cell by cell and
// step by step: 0 <= q0 <= U(x), |q1| <= (1 - 1e-8) q0.
inline ControlField project_control(const ControlField& raw, const SourceCapField& caps) {
  require(raw.cells() == caps.cap.size(), "project_control: control does not match caps");
  ControlField q = raw;
  for (MomentField& s : q.steps) {
    for (std::size_t c = 0; c < s.size(); ++c) project_moment(s.psi0[c], s.psi1x[c], s.psi1y[c], caps.cap[c]);
  }
  return q;
}

inline bool is_admissible(const ControlField& q, const SourceCapField& caps, double slack = 1e-12) {
  for (const MomentField& s : q.steps) {
    for (std::size_t c = 0; c < s.size(); ++c) {
      const double q0 = s.psi0[c];
      if (q0 < 0.0 || q0 > caps.cap[c] * (1.0 + slack)) return false;
      if (std::hypot(s.psi1x[c], s.psi1y[c]) > q0 * (1.0 + slack)) return false;
    }
  }
  return true;
}

inline double max_abs_diff(const ControlField& a, const ControlField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    const MomentField& x = a.steps[k];
    const MomentField& y = b.steps[k];
    for (std::size_t c = 0; c < x.size(); ++c) {
      m = std::max({m, std::abs(x.psi0[c] - y.psi0[c]), std::abs(x.psi1x[c] - y.psi1x[c]),
                    std::abs(x.psi1y[c] - y.psi1y[c])});
    }
  }
  return m;
}

// a - s * b
inline ControlField control_axpy(const ControlField& a, double s, const ControlField& b) {
  ControlField out = a;
  for (std::size_t k = 0; k < out.steps.size(); ++k) out.steps[k].axpy(-s, b.steps[k]);
  return out;
}

// || q - P(q - g) ||_inf, the projected-gradient fixed-point residual.
inline double projected_gradient_norm(const ControlField& q, const ControlField& g, const SourceCapField& caps) {
  return max_abs_diff(q, project_control(control_axpy(q, 1.0, g), caps));
}

// ---------------------------------------------------------------------------

template <class P>
concept ReducedProblem = requires(P& p, const ControlField& q) {
  { p.value(q) } -> std::convertible_to<double>;
  { p.value_and_gradient(q) } -> std::same_as<std::pair<double, ControlField>>;
  { p.inner(q, q) } -> std::convertible_to<double>;
};

struct OptimizerConfig {
  int max_iterations = 3000;
  double tol = 1e-4;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 30;
  // Restart each line search from the last accepted step divided by shrink
  // instead of from initial_step. Ignored when bb_step is set.
  bool warm_start = true;
  // Barzilai-Borwein trial step <dq,dq>/<dq,dg>, falling back to the warm
  // start when the curvature estimate is not positive.
  bool bb_step = true;
  // Also report a stall when the accepted steps of the last stall_window
  // iterations together lowered j by less than stall_rtol * |j|.
  int stall_window = 20;
  double stall_rtol = 1e-8;

  void validate() const {
    require(max_iterations >= 0, "optimizer: max_iterations must be >= 0");
    require(tol > 0.0, "optimizer: tol must be > 0");
    require(initial_step > 0.0, "optimizer: initial_step must be > 0");
    require(shrink > 0.0 && shrink < 1.0, "optimizer: shrink must lie in (0,1)");
    require(sufficient_decrease > 0.0 && sufficient_decrease < 1.0,
            "optimizer: sufficient_decrease must lie in (0,1)");
    require(max_backtracks >= 1, "optimizer: max_backtracks must be >= 1");
    require(stall_window >= 1, "optimizer: stall_window must be >= 1");
    require(stall_rtol >= 0.0, "optimizer: stall_rtol must be >= 0");
  }
};

enum class OptimizerStatus { Converged, MaxIterations, StalledLineSearch };

inline std::string_view to_string(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::Converged: return "Converged";
    case OptimizerStatus::MaxIterations: return "MaxIterations";
    case OptimizerStatus::StalledLineSearch: return "StalledLineSearch";
  }
  return "?";
}

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double step_norm = 0.0;       // ||q_k - q_{k-1}||_inf, 0 at k = 0
  double projected_grad = 0.0;  // ||q_k - P(q_k - g_k)||_inf
  double step_size = 0.0;       // accepted step that produced q_k
  int backtracks = 0;
  double wall_time = 0.0;       // seconds since start
};

struct OptimizationResult {
  ControlField control;
  std::vector<IterationRecord> history;
  OptimizerStatus status = OptimizerStatus::MaxIterations;

  double final_objective() const { return history.empty() ? 0.0 : history.back().objective; }
  double final_residual() const { return history.empty() ? 0.0 : history.back().projected_grad; }
};

using IterationObserver = std::function<void(const IterationRecord&, const ControlField&)>;

// Iterates q <- P(q - s grad j(q)) until both the last step and the projected
// gradient are below tol in the max norm.
template <ReducedProblem Problem>
OptimizationResult optimize(Problem& problem, const SourceCapField& caps, ControlField initial,
                            const OptimizerConfig& cfg, const IterationObserver& observer = {}) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  OptimizationResult result;
  ControlField q = project_control(initial, caps);
  auto [value, grad] = problem.value_and_gradient(q);
  double step = cfg.initial_step;
  ControlField prev_q;
  ControlField prev_grad;
  IterationRecord rec;
  rec.objective = value;
  rec.projected_grad = projected_gradient_norm(q, grad, caps);

  for (int k = 0;; ++k) {
    rec.iteration = k;
    rec.wall_time = elapsed();
    result.history.push_back(rec);
    if (observer) observer(rec, q);

    const bool small_step = k == 0 || rec.step_norm < cfg.tol;
    if (rec.projected_grad < cfg.tol && small_step) {
      result.status = OptimizerStatus::Converged;
      break;
    }
    if (k >= cfg.stall_window) {
      const double before = result.history[static_cast<std::size_t>(k - cfg.stall_window)].objective;
      if (before - rec.objective <= cfg.stall_rtol * std::max(1.0, std::abs(rec.objective))) {
        result.status = OptimizerStatus::StalledLineSearch;
        break;
      }
    }
    if (k >= cfg.max_iterations) {
      result.status = OptimizerStatus::MaxIterations;
      break;
    }

    double s = cfg.warm_start && k > 0 ? step / cfg.shrink : cfg.initial_step;
    if (cfg.bb_step && k > 0) {
      const ControlField dq = control_axpy(q, 1.0, prev_q);
      const ControlField dg = control_axpy(grad, 1.0, prev_grad);
      const double curv = problem.inner(dq, dg);
      if (curv > 0.0) s = std::clamp(problem.inner(dq, dq) / curv, 1e-12, 1e12);
    }
    bool accepted = false;
    ControlField trial;
    double trial_value = 0.0;
    int backtracks = 0;
    for (; backtracks <= cfg.max_backtracks; ++backtracks, s *= cfg.shrink) {
      trial = project_control(control_axpy(q, s, grad), caps);
      ControlField delta = control_axpy(trial, 1.0, q);
      const double slope = problem.inner(grad, delta);
      if (!(slope < 0.0)) continue;
      trial_value = problem.value(trial);
      if (trial_value <= value + cfg.sufficient_decrease * slope && trial_value < value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // no descent left along the projected path: at a stationary point if the residual agrees
      result.status = rec.projected_grad < cfg.tol ? OptimizerStatus::Converged : OptimizerStatus::StalledLineSearch;
      break;
    }

    step = s;
    prev_q = q;
    prev_grad = grad;
    rec = IterationRecord{};
    rec.step_norm = max_abs_diff(trial, q);
    rec.step_size = s;
    rec.backtracks = backtracks;
    q = std::move(trial);
    std::tie(value, grad) = problem.value_and_gradient(q);
    rec.objective = value;
    rec.projected_grad = projected_gradient_norm(q, grad, caps);
  }
  result.control = std::move(q);
  return result;
}

}  // namespace m1rt

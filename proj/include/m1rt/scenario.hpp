#pragma once

// A fully assembled planning problem and its reduced objective j(q) = J(E(q), q).

#include <optional>
#include <string_view>
#include <utility>

#include "m1rt/discrete_adjoint.hpp"
#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/objectives.hpp"
#include "m1rt/physics.hpp"
#include "m1rt/transport.hpp"

namespace m1rt {

enum class ObjectiveKind { Tracking, SurvivingFraction };

// Discrete: exact transpose of the forward scheme. Continuous: the adjoint
// transport equation solved with the M1 closure on moment magnitudes.
enum class AdjointKind { Discrete, Continuous };

inline std::string_view to_string(ObjectiveKind k) { return k == ObjectiveKind::Tracking ? "tracking" : "sf"; }
inline std::string_view to_string(AdjointKind k) { return k == AdjointKind::Discrete ? "discrete" : "continuous"; }

struct Scenario {
  Grid grid;
  TargetCase target = TargetCase::Basic;
  RegionMap regions;
  MaterialField materials;
  SourceCapField caps;
  TimeGrid time;
  ObjectiveKind objective = ObjectiveKind::Tracking;
  TrackingSpec tracking;
  CellModel cells;
  RegionLq lq;
  SolverOptions solver;
  AdjointKind adjoint = AdjointKind::Discrete;
  bool stationary = true;

  double c2() const { return objective == ObjectiveKind::Tracking ? tracking.c2 : cells.c2; }

  ControlField zero_control() const {
    return stationary ? ControlField::zero_stationary(grid.size())
                      : ControlField::zero_time_varying(grid.size(), time.steps);
  }

  double objective_value(const DoseMap& d, const ControlField& q) const {
    return objective == ObjectiveKind::Tracking ? j_tracking(d, q, tracking, grid, time)
                                                : j_sf(d, q, cells, grid, time);
  }

  std::vector<double> adjoint_source(const DoseMap& d) const {
    return objective == ObjectiveKind::Tracking ? adjoint_source_tracking(d, tracking) : adjoint_source_sf(d, cells);
  }
};

// Sensitivity of the dose term from a continuous-adjoint trajectory, in the
// layout of `shape`.
inline ControlField continuous_adjoint_sensitivity(const ControlField& shape, const Trajectory& adjoint) {
  ControlField zero = shape;
  for (MomentField& s : zero.steps) s.fill_zero();
  return reduced_gradient(zero, adjoint, 0.0);
}

class ReducedObjective {
public:
  explicit ReducedObjective(const Scenario& s) : s_(s) {}

  double value(const ControlField& q) { return evaluate(q).value; }

  std::pair<double, ControlField> value_and_gradient(const ControlField& q) {
    const Evaluation& e = evaluate(q);
    const double value = e.value;
    const std::vector<double> r = s_.adjoint_source(e.dose);
    ControlField g;
    if (s_.adjoint == AdjointKind::Discrete) {
      g = discrete_adjoint_sensitivity(q, e.trajectory, r, s_.materials, s_.grid, s_.solver);
    } else {
      SolverOptions opt = s_.solver;
      opt.observer = nullptr;
      if (!q.stationary) opt.snapshot_stride = 1;
      g = continuous_adjoint_sensitivity(q, solve_adjoint(r, s_.materials, s_.grid, s_.time, opt));
    }
    const double c2 = s_.c2();
    for (std::size_t k = 0; k < g.steps.size(); ++k) g.steps[k].axpy(c2, q.steps[k]);
    ++gradients_;
    return {value, std::move(g)};
  }

  double inner(const ControlField& a, const ControlField& b) const { return control_inner(a, b, s_.grid, s_.time); }

  struct Evaluation {
    ControlField control;
    Trajectory trajectory;
    DoseMap dose;
    double value = 0.0;
  };

  const Evaluation& evaluate(const ControlField& q) {
    if (last_ && last_->control == q) return *last_;
    Evaluation e;
    e.control = q;
    e.trajectory = solve_state(q, s_.materials, s_.grid, s_.time, s_.solver);
    e.dose = dose(e.trajectory);
    e.value = s_.objective_value(e.dose, q);
    const StepStats& st = e.trajectory.stats;
    stats_.steps += st.steps;
    stats_.clamped_cells += st.clamped_cells;
    stats_.realizability_failures += st.realizability_failures;
    stats_.max_violation = std::max(stats_.max_violation, st.max_violation);
    ++forward_solves_;
    last_ = std::move(e);
    return *last_;
  }

  // accumulated over every forward solve this objective has run
  const StepStats& solve_stats() const { return stats_; }
  long long forward_solves() const { return forward_solves_; }
  long long gradients() const { return gradients_; }
  const Scenario& scenario() const { return s_; }

private:
  const Scenario& s_;
  std::optional<Evaluation> last_;
  StepStats stats_;
  long long forward_solves_ = 0;
  long long gradients_ = 0;
};

}  // namespace m1rt

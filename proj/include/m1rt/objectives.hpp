#pragma once

// Dose operator, tracking and surviving-fraction objectives, adjoint sources
// and the reduced gradient.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/transport.hpp"

namespace m1rt {

struct DoseMap {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
};

// Time-integrated zeroth moment, left-rectangle rule as accumulated by the solver.
inline DoseMap dose(const Trajectory& traj) { return {traj.integral.psi0}; }

// ---------------------------------------------------------------------------
// Control-space geometry. Controls live in L2 over space-time; a stationary
// control is the time-constant element, so its weight is T instead of dt.

inline double control_time_weight(const ControlField& q, const TimeGrid& time) {
  return q.stationary ? time.T : time.dt;
}

inline double control_inner(const ControlField& a, const ControlField& b, const Grid& grid, const TimeGrid& time) {
  require(a.stationary == b.stationary && a.snapshots() == b.snapshots() && a.cells() == b.cells(),
          "control_inner: incompatible control fields");
  const double w = control_time_weight(a, time) * grid.cell_area();
  double sum = 0.0;
  for (std::size_t m = 0; m < a.snapshots(); ++m) {
    const MomentField& x = a.steps[m];
    const MomentField& y = b.steps[m];
    for (std::size_t c = 0; c < x.size(); ++c)
      sum += x.psi0[c] * y.psi0[c] + x.psi1x[c] * y.psi1x[c] + x.psi1y[c] * y.psi1y[c];
  }
  return w * sum;
}

// (c2/2) * integral over space-time of q0^2 + |q1|^2
inline double control_penalty(const ControlField& q, double c2, const Grid& grid, const TimeGrid& time) {
  return 0.5 * c2 * control_inner(q, q, grid, time);
}

// ---------------------------------------------------------------------------
// Tracking objective

struct TrackingWeights {
  double tumor = 25.0;
  double risk = 150.0;
  double normal = 1.0;
};

struct TrackingSpec {
  std::vector<double> target;  // prescribed dose
  std::vector<double> c1;      // dose-deviation weight per cell
  double c2 = 0.0;             // control weight
};

inline double region_value(Region r, double tumor, double risk, double normal) {
  switch (r) {
    case Region::Tumor: return tumor;
    case Region::Risk: return risk;
    case Region::Normal: return normal;
  }
  return normal;
}

// Prescription: `tumor_dose` on the tumor, zero elsewhere.
inline TrackingSpec make_tracking_spec(const RegionMap& regions, const TrackingWeights& w, double tumor_dose,
                                       double c2) {
  require(w.tumor >= 0.0 && w.risk >= 0.0 && w.normal >= 0.0, "tracking weights must be >= 0");
  require(c2 > 0.0, "control weight c2 must be > 0");
  TrackingSpec spec;
  spec.c2 = c2;
  spec.target.resize(regions.size());
  spec.c1.resize(regions.size());
  for (std::size_t c = 0; c < regions.size(); ++c) {
    spec.target[c] = regions.label[c] == Region::Tumor ? tumor_dose : 0.0;
    spec.c1[c] = region_value(regions.label[c], w.tumor, w.risk, w.normal);
  }
  return spec;
}

inline double tracking_misfit(const DoseMap& d, const TrackingSpec& spec, const Grid& grid) {
  double sum = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) {
    const double e = d.values[c] - spec.target[c];
    sum += spec.c1[c] * e * e;
  }
  return grid.cell_area() * sum;
}

inline double j_tracking(const DoseMap& d, const ControlField& q, const TrackingSpec& spec, const Grid& grid,
                         const TimeGrid& time) {
  return tracking_misfit(d, spec, grid) + control_penalty(q, spec.c2, grid, time);
}

// Derivative of the misfit with respect to the dose.
inline std::vector<double> adjoint_source_tracking(const DoseMap& d, const TrackingSpec& spec) {
  std::vector<double> r(d.size());
  for (std::size_t c = 0; c < d.size(); ++c) r[c] = 2.0 * spec.c1[c] * (d.values[c] - spec.target[c]);
  return r;
}

// ---------------------------------------------------------------------------
// Linear-quadratic cell survival

struct LqParams {
  double alpha = 0.0;  // 1/dose
  double beta = 0.0;   // 1/dose^2
};

inline constexpr LqParams kTumorLq{0.52, 0.171};
inline constexpr LqParams kNormalLq{0.170, 0.0078};

inline double surviving_fraction(double d, double alpha, double beta) {
  require(d >= 0.0, "surviving_fraction: dose must be >= 0");
  return std::exp(-alpha * d - beta * d * d);
}

struct CellType {
  LqParams lq;
  double weight = 0.0;          // a_i
  std::vector<double> density;  // rho_i
};

// types[0] is the tumor population (survivors are penalized); the rest are
// healthy populations (kills are penalized).
struct CellModel {
  std::vector<CellType> types;
  double c2 = 0.0;
};

struct SurvivalWeights {
  double tumor = 500.0;
  double risk = 2000.0;
  double normal = 1.0;
};

struct RegionLq {
  LqParams tumor = kTumorLq;
  LqParams risk = kNormalLq;
  LqParams normal = kNormalLq;

  const LqParams& of(Region r) const {
    switch (r) {
      case Region::Tumor: return tumor;
      case Region::Risk: return risk;
      case Region::Normal: return normal;
    }
    return normal;
  }
};

// Densities are the region indicators.
inline CellModel make_cell_model(const RegionMap& regions, const RegionLq& lq, const SurvivalWeights& a,
                                 double c2) {
  require(a.tumor > 0.0 && a.risk > 0.0 && a.normal > 0.0, "cell weights a_i must be > 0");
  for (const LqParams* p : {&lq.tumor, &lq.risk, &lq.normal})
    require(p->alpha > 0.0 && p->beta > 0.0, "LQ parameters alpha, beta must be > 0");
  require(c2 > 0.0, "control weight c2 must be > 0");
  CellModel m;
  m.c2 = c2;
  const std::array<Region, 3> order{Region::Tumor, Region::Risk, Region::Normal};
  const std::array<double, 3> weight{a.tumor, a.risk, a.normal};
  for (std::size_t k = 0; k < order.size(); ++k) {
    CellType t;
    t.lq = lq.of(order[k]);
    t.weight = weight[k];
    t.density.resize(regions.size());
    for (std::size_t c = 0; c < regions.size(); ++c) t.density[c] = regions.label[c] == order[k] ? 1.0 : 0.0;
    m.types.push_back(std::move(t));
  }
  return m;
}

// Pointwise integrand of the survival objective and its dose derivative.
inline double sf_integrand(const CellModel& m, std::size_t c, double d) {
  double v = 0.0;
  for (std::size_t k = 0; k < m.types.size(); ++k) {
    const CellType& t = m.types[k];
    if (t.density[c] == 0.0) continue;
    const double sf = std::exp(-t.lq.alpha * d - t.lq.beta * d * d);
    v += t.weight * t.density[c] * (k == 0 ? sf : 1.0 - sf);
  }
  return v;
}

inline double sf_integrand_derivative(const CellModel& m, std::size_t c, double d) {
  double v = 0.0;
  for (std::size_t k = 0; k < m.types.size(); ++k) {
    const CellType& t = m.types[k];
    if (t.density[c] == 0.0) continue;
    const double dsf = (-t.lq.alpha - 2.0 * t.lq.beta * d) * std::exp(-t.lq.alpha * d - t.lq.beta * d * d);
    v += t.weight * t.density[c] * (k == 0 ? dsf : -dsf);
  }
  return v;
}

inline double sf_cell_term(const DoseMap& d, const CellModel& m, const Grid& grid) {
  double sum = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) sum += sf_integrand(m, c, d.values[c]);
  return grid.cell_area() * sum;
}

inline double j_sf(const DoseMap& d, const ControlField& q, const CellModel& m, const Grid& grid,
                   const TimeGrid& time) {
  return sf_cell_term(d, m, grid) + control_penalty(q, m.c2, grid, time);
}

inline std::vector<double> adjoint_source_sf(const DoseMap& d, const CellModel& m) {
  std::vector<double> r(d.size());
  for (std::size_t c = 0; c < d.size(); ++c) r[c] = sf_integrand_derivative(m, c, d.values[c]);
  return r;
}

// ---------------------------------------------------------------------------
// Reduced gradient

// Weight pairing first moments in <q, lambda>: reconstructing the adjoint
// linearly in angle, lambda(Omega) ~ (lambda0 + 3 Omega.lambda1) / (4 pi), gives
// q0 lambda0 + 3 q1.lambda1.
inline constexpr double kFirstMomentPairing = 3.0;

// L2 gradient of the reduced objective: (lambda0 + c2 q0, 3 lambda1 + c2 q1),
// time-averaged for stationary controls.
inline ControlField reduced_gradient(const ControlField& q, const Trajectory& adjoint, double c2) {
  require(adjoint.reversed, "reduced_gradient: expected an adjoint trajectory");
  ControlField g = q;
  const std::size_t n = q.cells();
  require(adjoint.integral.size() == n, "reduced_gradient: grid mismatch");
  if (q.stationary) {
    const double inv_t = 1.0 / adjoint.time.T;
    MomentField& out = g.steps.front();
    const MomentField& qs = q.steps.front();
    for (std::size_t c = 0; c < n; ++c) {
      out.psi0[c] = adjoint.integral.psi0[c] * inv_t + c2 * qs.psi0[c];
      out.psi1x[c] = -kFirstMomentPairing * adjoint.integral.psi1x[c] * inv_t + c2 * qs.psi1x[c];
      out.psi1y[c] = -kFirstMomentPairing * adjoint.integral.psi1y[c] * inv_t + c2 * qs.psi1y[c];
    }
    return g;
  }
  require(static_cast<int>(q.snapshots()) == adjoint.time.steps, "reduced_gradient: time grid mismatch");
  for (int m = 0; m < adjoint.time.steps; ++m) {
    MomentField& out = g.steps[static_cast<std::size_t>(m)];
    const MomentField& qs = q.steps[static_cast<std::size_t>(m)];
    for (std::size_t c = 0; c < n; ++c) {
      const State3 lam = adjoint_at_control_step(adjoint, m, c);
      out.psi0[c] = lam[0] + c2 * qs.psi0[c];
      out.psi1x[c] = kFirstMomentPairing * lam[1] + c2 * qs.psi1x[c];
      out.psi1y[c] = kFirstMomentPairing * lam[2] + c2 * qs.psi1y[c];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Region statistics

struct RegionDoseStats {
  std::size_t cells = 0;
  double area = 0.0;
  double mean_dose = 0.0;
  double min_dose = 0.0;
  double max_dose = 0.0;
  double mean_survival = 1.0;  // area-weighted mean SF under the region's LQ parameters
};

inline RegionDoseStats region_stats(const DoseMap& d, const RegionMap& regions, Region which, const LqParams& lq,
                                    const Grid& grid) {
  RegionDoseStats s;
  double sum = 0.0;
  double sf = 0.0;
  bool first = true;
  for (std::size_t c = 0; c < d.size(); ++c) {
    if (regions.label[c] != which) continue;
    const double v = d.values[c];
    ++s.cells;
    sum += v;
    sf += surviving_fraction(std::max(v, 0.0), lq.alpha, lq.beta);
    s.min_dose = first ? v : std::min(s.min_dose, v);
    s.max_dose = first ? v : std::max(s.max_dose, v);
    first = false;
  }
  s.area = static_cast<double>(s.cells) * grid.cell_area();
  if (s.cells > 0) {
    s.mean_dose = sum / static_cast<double>(s.cells);
    s.mean_survival = sf / static_cast<double>(s.cells);
  }
  return s;
}

inline std::vector<double> survival_map(const DoseMap& d, const RegionMap& regions, const RegionLq& lq) {
  std::vector<double> sf(d.size());
  for (std::size_t c = 0; c < d.size(); ++c) {
    const LqParams& p = lq.of(regions.label[c]);
    sf[c] = surviving_fraction(std::max(d.values[c], 0.0), p.alpha, p.beta);
  }
  return sf;
}

}  // namespace m1rt

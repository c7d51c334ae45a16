#pragma once

// Discrete-ordinates reference solver, used only to check the M1 closure.
//
// Directions: n_angles equally spaced azimuths on the unit circle. With
// polar_levels = 0 each one moves in the plane at unit speed (flatland). With
// polar_levels = m > 0 every azimuth is paired with m Gauss-Legendre polar
// cosines mu in (0,1), mirrored in z, so the in-plane velocity is
// sqrt(1 - mu^2) (cos phi, sin phi): the z-independent reduction of transport
// on the sphere, which is what the M1 equations model.
//
// First-order upwind in space, explicit Euler in time on the same time grid as
// the M1 solver, vacuum inflow, HG scattering through the angle-difference
// kernel with rows renormalized to sum to one.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"
#include "m1rt/physics.hpp"
#include "m1rt/transport.hpp"

namespace m1rt {

inline constexpr int kSnMaxCells = 64 * 64;

struct SnOptions {
  int n_angles = 16;
  int polar_levels = 0;
  double cfl = kDefaultCfl;
};

struct SnDirection {
  double vx = 0.0;
  double vy = 0.0;
  double vz = 0.0;
  double weight = 0.0;  // sum over directions = measure of the angular domain
};

namespace detail {

// Gauss-Legendre nodes and weights on (0,1).
inline void gauss_legendre_unit(int m, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(m), 0.0);
  w.assign(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    // map [-1,1] -> [0,1]
    x[static_cast<std::size_t>(i)] = 0.5 * (z + 1.0);
    w[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace detail

inline std::vector<SnDirection> sn_directions(const SnOptions& opt) {
  require(opt.n_angles == 8 || opt.n_angles == 16 || opt.n_angles == 32, "sn: n_angles must be 8, 16 or 32");
  require(opt.polar_levels >= 0 && opt.polar_levels <= 16, "sn: polar_levels must lie in [0, 16]");
  std::vector<SnDirection> dirs;
  const int n = opt.n_angles;
  const double dphi = 2.0 * std::numbers::pi / n;
  if (opt.polar_levels == 0) {
    for (int k = 0; k < n; ++k) {
      const double phi = (k + 0.5) * dphi;
      dirs.push_back({std::cos(phi), std::sin(phi), 0.0, dphi});
    }
    return dirs;
  }
  std::vector<double> mu, wmu;
  detail::gauss_legendre_unit(opt.polar_levels, mu, wmu);
  for (std::size_t p = 0; p < mu.size(); ++p) {
    const double s = std::sqrt(1.0 - mu[p] * mu[p]);
    for (int side : {1, -1}) {
      for (int k = 0; k < n; ++k) {
        const double phi = (k + 0.5) * dphi;
        // each hemisphere carries 2 pi of solid angle
        dirs.push_back({s * std::cos(phi), s * std::sin(phi), side * mu[p], wmu[p] * dphi});
      }
    }
  }
  return dirs;
}

// Time integral of the zeroth moment, sum_{n<N} dt psi0^n.
inline std::vector<double> sn_reference_solve(const ControlField& control, const MaterialField& materials,
                                              const Grid& grid, double T, const SnOptions& opt = {}) {
  require(grid.size() <= static_cast<std::size_t>(kSnMaxCells),
          "sn: grid too large for the reference solver (at most 64x64 cells)");
  require(materials.size() == grid.size(), "sn: materials do not match grid");
  const TimeGrid time = make_time_grid(grid, T, opt.cfl);
  validate_control(control, grid, time);
  const std::vector<SnDirection> dirs = sn_directions(opt);
  const std::size_t nd = dirs.size();
  const std::size_t nc = grid.size();
  const bool flat = opt.polar_levels == 0;
  const double measure = flat ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
  // reconstruction of an angular source from its first two moments
  const double p1 = flat ? 2.0 : 3.0;

  // scattering matrix, rows normalized to one
  std::vector<double> kern(nd * nd, 0.0);
  const bool scatter = std::abs(materials.g) < 1.0;
  for (std::size_t a = 0; a < nd; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < nd; ++b) {
      const double eta =
          std::clamp(dirs[a].vx * dirs[b].vx + dirs[a].vy * dirs[b].vy + dirs[a].vz * dirs[b].vz, -1.0, 1.0);
      const double k = scatter ? dirs[b].weight * hg_kernel(materials.g, eta) : (a == b ? 1.0 : 0.0);
      kern[a * nd + b] = k;
      row += k;
    }
    for (std::size_t b = 0; b < nd; ++b) kern[a * nd + b] /= row;
  }

  std::vector<double> psi(nd * nc, 0.0), next(nd * nc, 0.0), src(nd * nc, 0.0), dose(nc, 0.0);
  auto at = [nc](std::vector<double>& v, std::size_t d, std::size_t c) -> double& { return v[d * nc + c]; };
  const double dt = time.dt;

  auto build_source = [&](const MomentField& q) {
    for (std::size_t d = 0; d < nd; ++d) {
      for (std::size_t c = 0; c < nc; ++c) {
        const double v = q.psi0[c] + p1 * (q.psi1x[c] * dirs[d].vx + q.psi1y[c] * dirs[d].vy);
        at(src, d, c) = std::max(0.0, v) / measure;
      }
    }
  };
  if (control.stationary) build_source(control.steps.front());

  for (int n = 0; n < time.steps; ++n) {
    if (!control.stationary) build_source(control.at(n));
    for (std::size_t c = 0; c < nc; ++c) {
      double m0 = 0.0;
      for (std::size_t d = 0; d < nd; ++d) m0 += dirs[d].weight * at(psi, d, c);
      dose[c] += dt * m0;
    }
    for (std::size_t d = 0; d < nd; ++d) {
      const double vx = dirs[d].vx;
      const double vy = dirs[d].vy;
      for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
          const std::size_t c = grid.index(i, j);
          const double u = at(psi, d, c);
          // upwind neighbors, vacuum outside
          const double ux = vx > 0.0 ? (i > 0 ? at(psi, d, grid.index(i - 1, j)) : 0.0)
                                     : (i + 1 < grid.nx ? at(psi, d, grid.index(i + 1, j)) : 0.0);
          const double uy = vy > 0.0 ? (j > 0 ? at(psi, d, grid.index(i, j - 1)) : 0.0)
                                     : (j + 1 < grid.ny ? at(psi, d, grid.index(i, j + 1)) : 0.0);
          const double adv = std::abs(vx) * (u - ux) / grid.dx + std::abs(vy) * (u - uy) / grid.dy;
          double in = 0.0;
          if (materials.sigma_s[c] > 0.0) {
            for (std::size_t b = 0; b < nd; ++b) in += kern[d * nd + b] * at(psi, b, c);
          }
          at(next, d, c) = u + dt * (-adv - materials.sigma_t(c) * u + materials.sigma_s[c] * in + at(src, d, c));
        }
      }
    }
    std::swap(psi, next);
  }
  return dose;
}

}  // namespace m1rt

#pragma once

// Material coefficients, Henyey-Greenstein kernel and the M1 closure.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "m1rt/errors.hpp"
#include "m1rt/grid.hpp"

namespace m1rt {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  double norm() const { return std::hypot(x, y); }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// ---------------------------------------------------------------------------
// Materials

struct MediumParams {
  double sigma_a = 0.0;  // absorption, 1/length
  double sigma_s = 0.0;  // scattering, 1/length
};

inline constexpr MediumParams kVoidMedium{0.001, 0.01};
inline constexpr MediumParams kTissueMedium{0.05, 0.5};
inline constexpr double kDefaultMeanCosine = 0.85;

struct MaterialField {
  std::vector<double> sigma_a;
  std::vector<double> sigma_s;
  double g = 0.0;

  std::size_t size() const { return sigma_a.size(); }
  double sigma_t(std::size_t c) const { return sigma_a[c] + sigma_s[c]; }
  // damping rate of the first moment: sigma_t - g sigma_s
  double flux_damping(std::size_t c) const { return sigma_a[c] + (1.0 - g) * sigma_s[c]; }
};

inline void validate_medium(const MediumParams& m, const std::string& name) {
  require(std::isfinite(m.sigma_a) && std::isfinite(m.sigma_s),
          name + ": cross-sections must be finite (boundedness hypothesis)");
  require(m.sigma_s >= 0.0, name + ": sigma_s must be >= 0 (positivity hypothesis)");
  require(m.sigma_a > 0.0, name + ": sigma_a must be > 0 (coercivity hypothesis: sigma_t - sigma_s >= alpha > 0)");
}

inline MaterialField materials_from_regions(const RegionMap& regions, const MediumParams& void_medium,
                                            const MediumParams& tissue, double g) {
  validate_medium(void_medium, "void medium");
  validate_medium(tissue, "tissue medium");
  require(std::isfinite(g) && std::abs(g) <= 1.0, "mean scattering cosine g must satisfy |g| <= 1");
  MaterialField m;
  m.g = g;
  m.sigma_a.resize(regions.size());
  m.sigma_s.resize(regions.size());
  for (std::size_t c = 0; c < regions.size(); ++c) {
    const MediumParams& p = regions.is_void[c] ? void_medium : tissue;
    m.sigma_a[c] = p.sigma_a;
    m.sigma_s[c] = p.sigma_s;
  }
  return m;
}

inline MaterialField uniform_materials(std::size_t n, const MediumParams& p, double g) {
  validate_medium(p, "medium");
  MaterialField m;
  m.g = g;
  m.sigma_a.assign(n, p.sigma_a);
  m.sigma_s.assign(n, p.sigma_s);
  return m;
}

// ---------------------------------------------------------------------------
// Henyey-Greenstein kernel, normalized so that its integral over eta in [-1,1] is 1/(2 pi).

inline double hg_kernel(double g, double eta) {
  require(std::abs(g) < 1.0, "hg_kernel: |g| must be < 1");
  require(std::abs(eta) <= 1.0, "hg_kernel: |eta| must be <= 1");
  const double denom = 1.0 + g * g - 2.0 * g * eta;
  return (1.0 - g * g) / (4.0 * std::numbers::pi * denom * std::sqrt(denom));
}

// ---------------------------------------------------------------------------
// M1 closure

inline constexpr double kFluxLimit = 1.0 - 1e-8;
inline constexpr double kDensityFloor = 1e-30;

namespace detail {
// chi without range checks; f2 = |f|^2 in [0,1]
inline double eddington_factor_sq(double f2) { return (5.0 - 2.0 * std::sqrt(4.0 - 3.0 * f2)) / 3.0; }
}  // namespace detail

inline double eddington_factor(double f_mag) {
  require(f_mag >= 0.0, "eddington_factor: |f| must be >= 0");
  require(f_mag <= 1.0, "eddington_factor: |f| > 1 is not realizable");
  return detail::eddington_factor_sq(f_mag * f_mag);
}

// Eddington tensor D(f): xy block plus the zz entry of the 3-D tensor.
struct ClosureState {
  Vec2 f;
  double chi = 1.0 / 3.0;
  double dxx = 1.0 / 3.0;
  double dxy = 0.0;
  double dyy = 1.0 / 3.0;
  double dzz = 1.0 / 3.0;

  double trace3() const { return dxx + dyy + dzz; }
};

// (3 chi - 1) / (2 |f|^2) rewritten to stay finite as f -> 0.
inline double anisotropy_coefficient(double f2) { return 3.0 / (2.0 + std::sqrt(4.0 - 3.0 * f2)); }

inline ClosureState eddington_tensor(double psi0, Vec2 psi1) {
  require(psi0 > 0.0, "eddington_tensor: psi0 must be > 0");
  ClosureState s;
  s.f = {psi1.x / psi0, psi1.y / psi0};
  const double f2 = s.f.x * s.f.x + s.f.y * s.f.y;
  require(f2 <= 1.0 + 1e-14, "eddington_tensor: |psi1| > psi0 is not realizable");
  const double f2c = std::min(f2, 1.0);
  s.chi = detail::eddington_factor_sq(f2c);
  const double iso = 0.5 * (1.0 - s.chi);
  const double aniso = anisotropy_coefficient(f2c);
  s.dxx = iso + aniso * s.f.x * s.f.x;
  s.dxy = aniso * s.f.x * s.f.y;
  s.dyy = iso + aniso * s.f.y * s.f.y;
  s.dzz = iso;
  return s;
}

struct Moments {
  double psi0 = 0.0;
  Vec2 psi1;
  friend bool operator==(const Moments&, const Moments&) = default;
};

inline Moments realizability_clamp(double psi0, Vec2 psi1, double floor) {
  Moments out{std::max(psi0, floor), psi1};
  const double bound = kFluxLimit * out.psi0;
  const double mag = psi1.norm();
  if (mag > bound) {
    const double s = mag > 0.0 ? bound / mag : 0.0;
    out.psi1 = {psi1.x * s, psi1.y * s};
  }
  return out;
}

// Second-moment block P = D(f) psi0 used by the flux. Works for signed
// densities: f is formed against |psi0| (floored) and limited to kFluxLimit, so
// P is odd in (psi0, psi1).
struct Pressure {
  double xx, xy, yy;
};

inline Pressure closure_pressure(double psi0, double psi1x, double psi1y) {
  const double mag0 = std::max(std::abs(psi0), kDensityFloor);
  double fx = psi1x / mag0;
  double fy = psi1y / mag0;
  double f2 = fx * fx + fy * fy;
  if (f2 > kFluxLimit * kFluxLimit) {
    const double s = kFluxLimit / std::sqrt(f2);
    fx *= s;
    fy *= s;
    f2 = kFluxLimit * kFluxLimit;
  }
  // with s = sqrt(4 - 3|f|^2): (1 - chi)/2 = (s - 1)/3 and (3 chi - 1)/(2|f|^2) = 3/(2 + s)
  const double s = std::sqrt(4.0 - 3.0 * f2);
  const double iso = (s - 1.0) / 3.0;
  const double aniso = 3.0 / (2.0 + s);
  return {psi0 * (iso + aniso * fx * fx), psi0 * aniso * fx * fy, psi0 * (iso + aniso * fy * fy)};
}

// Gradients of P_xx, P_xy, P_yy with respect to (psi0, psi1x, psi1y), for
// psi0 >= 0. At the flux limit the closure is evaluated at the limited f.
struct PressureJacobian {
  std::array<double, 3> xx, xy, yy;
};

inline PressureJacobian closure_pressure_jacobian(double psi0, double psi1x, double psi1y) {
  const double mag0 = std::max(std::abs(psi0), kDensityFloor);
  double f[2] = {psi1x / mag0, psi1y / mag0};
  double f2 = f[0] * f[0] + f[1] * f[1];
  if (f2 > kFluxLimit * kFluxLimit) {
    const double s = kFluxLimit / std::sqrt(f2);
    f[0] *= s;
    f[1] *= s;
    f2 = kFluxLimit * kFluxLimit;
  }
  const double s = std::sqrt(4.0 - 3.0 * f2);
  const double iso = (s - 1.0) / 3.0;
  const double aniso = 3.0 / (2.0 + s);
  // derivatives with respect to |f|^2
  const double diso = -1.0 / (2.0 * s);
  const double daniso = 9.0 / (2.0 * s * (2.0 + s) * (2.0 + s));

  // P_ab = psi0 (iso delta_ab + aniso f_a f_b)
  auto grad = [&](int a, int b) {
    const double delta = a == b ? 1.0 : 0.0;
    const double shape = diso * delta + daniso * f[a] * f[b];
    std::array<double, 3> g{};
    g[0] = iso * delta - aniso * f[a] * f[b] - 2.0 * f2 * shape;
    for (int k = 0; k < 2; ++k) {
      g[1 + k] = 2.0 * f[k] * shape + aniso * ((a == k ? f[b] : 0.0) + (b == k ? f[a] : 0.0));
    }
    return g;
  };
  return {grad(0, 0), grad(0, 1), grad(1, 1)};
}

}  // namespace m1rt

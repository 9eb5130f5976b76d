#pragma once

// Reference computations used by the tests. Except for fd_curvature they
// work from numeric evaluations of F only (finite differences, direct
// quadrature, closed forms) and share no code path with the symbolic
// machinery under test.

#include "finslerlab/connection.hpp"
#include "finslerlab/model_file.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>

namespace oracle {

using finsler::FinslerModel;
using finsler::Matrix;
using finsler::Point;
using finsler::Vector;

inline finsler::ModelFile load(const std::string& name) {
  return finsler::load_model(std::string(FINSLERLAB_MODELS_DIR) + "/" + name + ".model");
}

inline double energy(const FinslerModel& m, const Point& x, const Vector& v) {
  const double f = m.evaluate_norm(x, v);
  return f * f;
}

/// g_ij = (1/2) d^2 F^2 / dv^i dv^j by central differences.
inline Matrix fd_fundamental_tensor(const FinslerModel& m, const Point& x, const Vector& v, double h = 1e-4) {
  const int n = m.dim();
  Matrix g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vector pp = v, pm = v, mp = v, mm = v;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      g(i, j) = 0.5 * (energy(m, x, pp) - energy(m, x, pm) - energy(m, x, mp) + energy(m, x, mm)) / (4 * h * h);
    }
  }
  return g;
}

/// G^i = 1/4 g^{il} (d^2 F^2/dx^k dv^l v^k - dF^2/dx^l), all derivatives by
/// central differences.
inline Vector fd_spray(const FinslerModel& m, const Point& x, const Vector& v, double h = 1e-4) {
  const int n = m.dim();
  const Matrix g = fd_fundamental_tensor(m, x, v, h);
  Vector a = Vector::Zero(n);
  for (int l = 0; l < n; ++l) {
    Point xp = x, xm = x;
    xp[l] += h;
    xm[l] -= h;
    a[l] -= (energy(m, xp, v) - energy(m, xm, v)) / (2 * h);
    for (int k = 0; k < n; ++k) {
      Point xkp = x, xkm = x;
      xkp[k] += h;
      xkm[k] -= h;
      Vector vlp = v, vlm = v;
      vlp[l] += h;
      vlm[l] -= h;
      const double mixed = (energy(m, xkp, vlp) - energy(m, xkp, vlm) - energy(m, xkm, vlp) + energy(m, xkm, vlm)) /
                           (4 * h * h);
      a[l] += mixed * v[k];
    }
  }
  return 0.25 * g.lu().solve(a);
}

/// Gamma^k_ij = d^2 G^k / dv^i dv^j from the finite-difference spray.
inline double fd_gamma(const FinslerModel& m, const Point& x, const Vector& v, int k, int i, int j, double h = 1e-2) {
  Vector pp = v, pm = v, mp = v, mm = v;
  pp[i] += h; pp[j] += h;
  pm[i] += h; pm[j] -= h;
  mp[i] -= h; mp[j] += h;
  mm[i] -= h; mm[j] -= h;
  return (fd_spray(m, x, pp)[k] - fd_spray(m, x, pm)[k] - fd_spray(m, x, mp)[k] + fd_spray(m, x, mm)[k]) /
         (4 * h * h);
}

/// Round sphere in polar coordinates: the only nonzero Christoffels.
inline double sphere_gamma_0_11(double theta) { return -std::sin(theta) * std::cos(theta); }
inline double sphere_gamma_1_01(double theta) { return std::cos(theta) / std::sin(theta); }
/// R^theta_{phi theta phi}
inline double sphere_r_0101(double theta) { return std::sin(theta) * std::sin(theta); }

/// Upper half-plane, g = diag(1/y^2, 1/y^2).
inline double hyperbolic_gamma_0_01(double y) { return -1.0 / y; }
inline double hyperbolic_gamma_1_00(double y) { return 1.0 / y; }
inline double hyperbolic_gamma_1_11(double y) { return -1.0 / y; }

/// Busemann-Hausdorff density of a 2D norm from the polar area formula
/// vol{F < 1} = 1/2 int F(theta)^-2 dtheta (periodic trapezoid).
inline double polar_bh_density(const FinslerModel& m, const Point& x, int nodes = 4096) {
  double area = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double t = 2 * std::numbers::pi * k / nodes;
    Vector u(2);
    u << std::cos(t), std::sin(t);
    const double f = m.evaluate_norm(x, u);
    area += 0.5 / (f * f) * (2 * std::numbers::pi / nodes);
  }
  return std::numbers::pi / area;
}

/// Frozen high-precision quadrature (30 digits) for the norm
/// F^2 = |v|^2 + (v1^4 + v2^4)^(1/2):
///   averaged metric h = lambda * identity,
inline constexpr double kQuarticAveragedLambda = 1.8774108380804167;
///   Busemann-Hausdorff density pi / vol{F < 1}.
inline constexpr double kQuarticBhDensity = 1.8540746773013719;

/// Transport around the latitude circle at polar angle theta0 rotates by
/// 2 pi (1 - cos theta0), reduced to (-pi, pi].
inline double latitude_holonomy_angle(double theta0) {
  double a = std::remainder(2 * std::numbers::pi * (1 - std::cos(theta0)), 2 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

/// R^i_jkl from central differences of the connection coefficients in x.
/// Checks the compiled x-derivatives, not the coefficients themselves.
inline finsler::Tensor4 fd_curvature(const finsler::ConnectionField& c, const Point& x, const Vector& v,
                                     double h = 1e-5) {
  const int n = c.model().dim();
  std::vector<finsler::Tensor3> d(n);
  for (int l = 0; l < n; ++l) {
    Point xp = x, xm = x;
    xp[l] += h;
    xm[l] -= h;
    const finsler::Tensor3 gp = finsler::berwald_coefficients(c, xp, v);
    const finsler::Tensor3 gm = finsler::berwald_coefficients(c, xm, v);
    d[l] = finsler::Tensor3(n);
    for (std::size_t e = 0; e < gp.data().size(); ++e) d[l].data()[e] = (gp.data()[e] - gm.data()[e]) / (2 * h);
  }
  const finsler::Tensor3 g = finsler::berwald_coefficients(c, x, v);
  finsler::Tensor4 r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = d[k](i, l, j) - d[l](i, k, j);
          for (int m = 0; m < n; ++m) s += g(i, k, m) * g(m, l, j) - g(i, l, m) * g(m, k, j);
          r(i, j, k, l) = s;
        }
  return r;
}

}  // namespace oracle

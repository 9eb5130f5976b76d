#pragma once

// Dormand-Prince 5(4) embedded pair with FSAL and standard step control.

#include "finslerlab/connection.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace finsler::detail {

struct OdeStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double max_error = 0.0;
};

// rhs(t, y, dy); accept(t, y) is called after every accepted step and
// returns false to stop the integration.
template <class Rhs, class Accept>
Eigen::VectorXd integrate_dopri5(Rhs&& rhs, double t0, double t1, Eigen::VectorXd y, const StepControl& ctl,
                                 Accept&& accept, OdeStats& stats) {
  constexpr double a21 = 1.0 / 5.0;
  constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                   a65 = -5103.0 / 18656.0;
  constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                   b6 = 11.0 / 84.0;
  constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                   e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;

  const Eigen::Index n = y.size();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);
  double t = t0;
  const double span = t1 - t0;
  if (span <= 0.0) return y;
  double h = std::min({ctl.initial_step, ctl.max_step, span});
  rhs(t, y, k1);
  while (t < t1) {
    if (stats.steps + stats.rejected >= ctl.max_steps) throw IntegrationError("integrator step budget exhausted");
    bool last = false;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      last = true;
    }
    tmp = y + h * a21 * k1;
    rhs(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, tmp, k6);
    y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, y_new, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = ctl.atol + ctl.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
      acc += (err[i] / sc) * (err[i] / sc);
    }
    const double err_norm = std::sqrt(acc / static_cast<double>(n));
    if (!std::isfinite(err_norm)) throw IntegrationError("non-finite state in integrator");

    if (err_norm <= 1.0) {
      t = last ? t1 : t + h;
      y = y_new;
      k1 = k7;
      ++stats.steps;
      stats.max_error = std::max(stats.max_error, err_norm);
      if (!accept(t, y)) return y;
      const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
      h = std::min(h * factor, ctl.max_step);
    } else {
      ++stats.rejected;
      h *= std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 0.9);
      if (h < ctl.min_step) {
        throw IntegrationError("step size underflow at t=" + std::to_string(t));
      }
    }
  }
  return y;
}

}  // namespace finsler::detail

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "peano/error.hpp"
#include "peano/types.hpp"

namespace peano {

struct OdeOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double initial_step = 0.0;  // 0 picks a step from the initial slope
  double max_step = 0.0;      // 0 means unbounded
  long max_steps = 2'000'000;
};

/// One accepted step; enough for cubic Hermite dense output on [t0, t1].
struct OdeStep {
  double t0, t1;
  Vector y0, y1, f0, f1;

  Vector interpolate(double t) const {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1;
  }
};

/// Dormand–Prince 5(4) with FSAL and a PI-free classic controller. Integrates
/// y' = f(t, y) from t0 to t1 (either direction). After each accepted step
/// `observer(step, y, f)` runs; it may rescale y and f in place (useful for
/// linear systems that overflow) and returns false to stop early.
/// Returns the final state; `t_end` receives the time reached.
template <typename Rhs, typename Observer>
Vector dopri5(Rhs&& f, double t0, Vector y, double t1, const OdeOptions& opt, Observer&& observer,
              double* t_end = nullptr) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double dir = (t1 >= t0) ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;
  if (t_end) *t_end = t;
  if (span == 0.0) return y;

  Vector k1 = f(t, y);
  auto err_norm = [&](const Vector& y0, const Vector& y1, const Vector& e) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      acc += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(e.size()));
  };

  double h = opt.initial_step;
  if (h <= 0.0) {
    const double d0 = err_norm(y, y, y), d1 = err_norm(y, y, k1);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, span);
  }
  const double hmax = opt.max_step > 0.0 ? opt.max_step : span;

  for (long step = 0; step < opt.max_steps; ++step) {
    h = std::min({h, hmax, std::abs(t1 - t)});
    const double hs = dir * h;
    const Vector k2 = f(t + c2 * hs, y + hs * a21 * k1);
    const Vector k3 = f(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    const Vector k4 = f(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = f(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vector y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Vector k7 = f(t + hs, y_new);
    const Vector e = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err = err_norm(y, y_new, e);

    if (!std::isfinite(err))
      throw Error(ErrorKind::IntegrationFailure, "non-finite state at t = " + std::to_string(t));
    if (err <= 1.0) {
      const double t_new = (std::abs(t1 - (t + hs)) < 1e-14 * std::max(1.0, std::abs(t1))) ? t1 : t + hs;
      OdeStep st{t, t_new, y, y_new, k1, k7};
      y = std::move(y_new);
      k1 = std::move(k7);
      t = t_new;
      if (t_end) *t_end = t;
      const bool go_on = observer(st, y, k1);
      if (!go_on || t == t1) return y;
      h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    } else {
      h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
    }
    if (h < 1e-15 * std::max(1.0, std::abs(t)))
      throw Error(ErrorKind::IntegrationFailure, "step size underflow at t = " + std::to_string(t));
  }
  throw Error(ErrorKind::IntegrationFailure, "step budget exhausted at t = " + std::to_string(t));
}

template <typename Rhs>
Vector dopri5(Rhs&& f, double t0, Vector y, double t1, const OdeOptions& opt) {
  return dopri5(std::forward<Rhs>(f), t0, std::move(y), t1, opt, [](const OdeStep&, Vector&, Vector&) { return true; });
}

}  // namespace peano

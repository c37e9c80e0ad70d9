#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace eitgate {

/// Raised when the adaptive step size collapses.
class IntegratorError : public std::runtime_error {
 public:
  IntegratorError(const std::string& what, double time)
      : std::runtime_error(what + " at t = " + std::to_string(time * 1e6) + " us"), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Dormand-Prince 5(4) stepper with FSAL and cubic Hermite dense output.
/// `State` is any Eigen dense type; the error norm is the max-abs entry of
/// the embedded error estimate divided by `tol`.
template <class State>
class Dopri5 {
 public:
  using Rhs = std::function<void(double, const State&, State&)>;

  Dopri5(Rhs rhs, double tol, double max_step) : rhs_(std::move(rhs)), tol_(tol), hmax_(max_step) {}

  void reset(double t, const State& y) {
    t_ = t;
    y_ = y;
    rhs_(t_, y_, f_);
    if (h_ <= 0.0) {
      const double fmax = f_.cwiseAbs().maxCoeff();
      h_ = fmax > 0.0 ? 0.05 * std::pow(tol_, 0.2) / fmax : hmax_;
      h_ = std::min(h_, hmax_);
    }
  }

  /// Takes one accepted step, never past `t_end`. Returns the step size.
  double step(double t_end) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    while (true) {
      double h = std::min(h_, t_end - t_);
      const bool clipped = h < h_;
      if (!(h > 1e-13 * std::max(std::abs(t_), 1e-9)) && t_end - t_ > h) {
        throw IntegratorError("step size underflow", t_);
      }
      tmp_ = y_ + h * a21 * f_;
      rhs_(t_ + c2 * h, tmp_, k2_);
      tmp_ = y_ + h * (a31 * f_ + a32 * k2_);
      rhs_(t_ + c3 * h, tmp_, k3_);
      tmp_ = y_ + h * (a41 * f_ + a42 * k2_ + a43 * k3_);
      rhs_(t_ + c4 * h, tmp_, k4_);
      tmp_ = y_ + h * (a51 * f_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
      rhs_(t_ + c5 * h, tmp_, k5_);
      tmp_ = y_ + h * (a61 * f_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
      rhs_(t_ + h, tmp_, k6_);
      ynew_ = y_ + h * (b1 * f_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
      rhs_(t_ + h, ynew_, k7_);
      tmp_ = h * (e1 * f_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
      const double err = tmp_.cwiseAbs().maxCoeff() / tol_;
      if (!std::isfinite(err)) throw IntegratorError("non-finite state", t_);
      if (err <= 1.0) {
        t_prev_ = t_;
        y_prev_.swap(y_);
        f_prev_.swap(f_);
        y_.swap(ynew_);
        f_.swap(k7_);
        t_ += h;
        ++accepted_;
        const double grow = err > 0.0 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;
        if (!clipped) h_ = std::min(hmax_, h * grow);
        return h;
      }
      ++rejected_;
      h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.25));
    }
  }

  /// Cubic Hermite interpolation inside the last accepted step.
  State interpolate(double t) const {
    const double h = t_ - t_prev_;
    const double s = (t - t_prev_) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * y_prev_ + (h10 * h) * f_prev_ + h01 * y_ + (h11 * h) * f_;
  }

  double t() const { return t_; }
  double t_prev() const { return t_prev_; }
  const State& y() const { return y_; }
  const State& y_prev() const { return y_prev_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t rejected() const { return rejected_; }
  double step_hint() const { return h_; }
  void set_step_hint(double h) { h_ = std::min(h, hmax_); }

 private:
  Rhs rhs_;
  double tol_;
  double hmax_;
  double h_ = 0.0;
  double t_ = 0.0, t_prev_ = 0.0;
  State y_, f_, y_prev_, f_prev_, ynew_, tmp_, k2_, k3_, k4_, k5_, k6_, k7_;
  std::size_t accepted_ = 0, rejected_ = 0;
};

/// Classic fixed-step RK4 from t0 to t1 in `steps` equal steps.
template <class State, class Rhs>
void rk4(Rhs&& rhs, double t0, double t1, State& y, std::size_t steps) {
  if (steps == 0) return;
  const double h = (t1 - t0) / static_cast<double>(steps);
  State k1, k2, k3, k4, tmp;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    rhs(t, y, k1);
    tmp = y + (0.5 * h) * k1;
    rhs(t + 0.5 * h, tmp, k2);
    tmp = y + (0.5 * h) * k2;
    rhs(t + 0.5 * h, tmp, k3);
    tmp = y + h * k3;
    rhs(t + h, tmp, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

}  // namespace eitgate

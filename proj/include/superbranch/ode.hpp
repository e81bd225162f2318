#ifndef SUPERBRANCH_ODE_HPP
#define SUPERBRANCH_ODE_HPP

#include "superbranch/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace superbranch {

/// Tableau of the Dormand-Prince 5(4) pair with its 4th-order continuous
/// extension.
template <typename Scalar>
struct DormandPrinceTableau {
  static constexpr Scalar c2 = Scalar(1) / 5, c3 = Scalar(3) / 10, c4 = Scalar(4) / 5, c5 = Scalar(8) / 9;
  static constexpr Scalar a21 = Scalar(1) / 5;
  static constexpr Scalar a31 = Scalar(3) / 40, a32 = Scalar(9) / 40;
  static constexpr Scalar a41 = Scalar(44) / 45, a42 = Scalar(-56) / 15, a43 = Scalar(32) / 9;
  static constexpr Scalar a51 = Scalar(19372) / 6561, a52 = Scalar(-25360) / 2187, a53 = Scalar(64448) / 6561,
                          a54 = Scalar(-212) / 729;
  static constexpr Scalar a61 = Scalar(9017) / 3168, a62 = Scalar(-355) / 33, a63 = Scalar(46732) / 5247,
                          a64 = Scalar(49) / 176, a65 = Scalar(-5103) / 18656;
  static constexpr Scalar a71 = Scalar(35) / 384, a73 = Scalar(500) / 1113, a74 = Scalar(125) / 192,
                          a75 = Scalar(-2187) / 6784, a76 = Scalar(11) / 84;
  static constexpr Scalar e1 = Scalar(71) / 57600, e3 = Scalar(-71) / 16695, e4 = Scalar(71) / 1920,
                          e5 = Scalar(-17253) / 339200, e6 = Scalar(22) / 525, e7 = Scalar(-1) / 40;
  static constexpr Scalar d1 = Scalar(-12715105075.0) / Scalar(11282082432.0),
                          d3 = Scalar(87487479700.0) / Scalar(32700410799.0),
                          d4 = Scalar(-10690763975.0) / Scalar(1880347072.0),
                          d5 = Scalar(701980252875.0) / Scalar(199316789632.0),
                          d6 = Scalar(-1453857185.0) / Scalar(822651844.0),
                          d7 = Scalar(69997945.0) / Scalar(29380423.0);
};

template <typename Scalar>
struct OdeOptions {
  Scalar atol = Scalar(1e-10);
  Scalar rtol = Scalar(1e-8);
  Scalar initial_step = Scalar(0); // 0: automatic
  Scalar max_step = std::numeric_limits<Scalar>::infinity();
  long max_steps = 5'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
};

/// Continuous extension over one accepted step [t0, t0 + h].
template <typename Scalar>
struct DenseStep {
  Scalar t0 = 0, h = 0;
  VectorX<Scalar> r1, r2, r3, r4, r5;

  VectorX<Scalar> operator()(Scalar t) const {
    const Scalar theta = (t - t0) / h;
    const Scalar theta1 = Scalar(1) - theta;
    return r1 + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
  }
};

/// Adaptive embedded Runge-Kutta integration of y' = rhs(t, y) from t0 to
/// t1. After each accepted step `on_step(step, y)` is called with the dense
/// interpolant and the new state; it may modify the state (projection onto
/// a constraint set) before the next step starts.
template <typename Scalar, typename Rhs, typename OnStep>
OdeStats integrate_dopri5(Rhs&& rhs, Scalar t0, VectorX<Scalar>& y, Scalar t1, const OdeOptions<Scalar>& opt,
                          OnStep&& on_step) {
  using T = DormandPrinceTableau<Scalar>;
  using State = VectorX<Scalar>;
  OdeStats stats;
  if (!(t1 > t0)) return stats;

  constexpr Scalar safety = Scalar(0.9), fac_min = Scalar(0.2), fac_max = Scalar(10), beta = Scalar(0.04);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const auto n = y.size();

  auto weighted_rms = [&](const State& e, const State& a, const State& b) {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar sc = opt.atol + opt.rtol * std::max(std::abs(a[i]), std::abs(b[i]));
      const Scalar r = e[i] / sc;
      s += r * r;
    }
    return std::sqrt(s / Scalar(std::max<Eigen::Index>(n, 1)));
  };

  Scalar t = t0;
  State k1 = rhs(t, y);
  ++stats.rhs_evaluations;

  Scalar h = opt.initial_step;
  if (!(h > 0)) {
    // Hairer-Wanner starting step heuristic.
    const State zero = State::Zero(n);
    const Scalar d0 = weighted_rms(y, y, zero);
    const Scalar d1 = weighted_rms(k1, y, zero);
    Scalar h0 = (d0 < Scalar(1e-5) || d1 < Scalar(1e-5)) ? Scalar(1e-6) : Scalar(0.01) * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    const State y1 = y + h0 * k1;
    const State f1 = rhs(t + h0, y1);
    ++stats.rhs_evaluations;
    const Scalar d2 = weighted_rms(State(f1 - k1), y, zero) / h0;
    const Scalar dmax = std::max(d1, d2);
    const Scalar h1 =
        dmax <= Scalar(1e-15) ? std::max(Scalar(1e-6), h0 * Scalar(1e-3)) : std::pow(Scalar(0.01) / dmax, Scalar(0.2));
    h = std::min(Scalar(100) * h0, h1);
  }
  h = std::min({h, opt.max_step, t1 - t0});

  Scalar err_old = Scalar(1e-4);
  bool rejected_last = false;
  State k2, k3, k4, k5, k6, k7, y_new, y_stage;
  DenseStep<Scalar> dense;

  while (t < t1) {
    if (stats.accepted + stats.rejected >= opt.max_steps) {
      throw SolverError("ODE solver: step budget exhausted at t=" + std::to_string(t));
    }
    if (h <= Scalar(10) * eps * std::max(std::abs(t), Scalar(1))) {
      std::ostringstream msg;
      msg << "ODE solver: step size underflow at t=" << t << " (h=" << h << ", accepted=" << stats.accepted
          << ", rejected=" << stats.rejected << ")";
      throw SolverError(msg.str());
    }
    bool last = false;
    if (t + h >= t1 || t + Scalar(1.0001) * h >= t1) {
      h = t1 - t;
      last = true;
    }

    y_stage = y + h * T::a21 * k1;
    k2 = rhs(t + T::c2 * h, y_stage);
    y_stage = y + h * (T::a31 * k1 + T::a32 * k2);
    k3 = rhs(t + T::c3 * h, y_stage);
    y_stage = y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
    k4 = rhs(t + T::c4 * h, y_stage);
    y_stage = y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
    k5 = rhs(t + T::c5 * h, y_stage);
    y_stage = y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
    k6 = rhs(t + h, y_stage);
    y_new = y + h * (T::a71 * k1 + T::a73 * k3 + T::a74 * k4 + T::a75 * k5 + T::a76 * k6);
    k7 = rhs(t + h, y_new);
    stats.rhs_evaluations += 6;

    const State err_vec = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
    const Scalar err = weighted_rms(err_vec, y, y_new);
    if (!std::isfinite(err)) {
      h *= fac_min;
      ++stats.rejected;
      rejected_last = true;
      continue;
    }

    const Scalar fac11 = std::pow(err, Scalar(0.2) - beta * Scalar(0.75));
    Scalar fac = fac11 / std::pow(err_old, beta);
    fac = std::max(Scalar(1) / fac_max, std::min(Scalar(1) / fac_min, fac / safety));
    Scalar h_new = h / fac;

    if (err > Scalar(1)) {
      h /= std::min(Scalar(1) / fac_min, fac11 / safety);
      ++stats.rejected;
      rejected_last = true;
      continue;
    }

    err_old = std::max(err, Scalar(1e-4));
    if (rejected_last) h_new = std::min(h_new, h);
    rejected_last = false;

    dense.t0 = t;
    dense.h = h;
    dense.r1 = y;
    dense.r2 = y_new - y;
    dense.r3 = h * k1 - dense.r2;
    dense.r4 = dense.r2 - h * k7 - dense.r3;
    dense.r5 = h * (T::d1 * k1 + T::d3 * k3 + T::d4 * k4 + T::d5 * k5 + T::d6 * k6 + T::d7 * k7);

    t = last ? t1 : t + h;
    y = y_new;
    ++stats.accepted;
    const bool modified = on_step(dense, y);
    if (modified) {
      k1 = rhs(t, y);
      ++stats.rhs_evaluations;
    } else {
      k1 = k7;
    }
    h = std::min(h_new, opt.max_step);
  }
  return stats;
}

} // namespace superbranch

#endif

#include "doctest.h"

#include "superbranch/ode.hpp"

#include <cmath>

using namespace superbranch;

TEST_SUITE("ode") {

TEST_CASE("exponential decay") {
  OdeOptions<double> opt;
  opt.atol = 1e-12;
  opt.rtol = 1e-10;
  Vector y = Vector::Ones(1);
  const auto stats = integrate_dopri5<double>([](double, const Vector& v) -> Vector { return -v; }, 0.0, y, 5.0, opt,
                                              [](const DenseStep<double>&, Vector&) { return false; });
  CHECK(y[0] == doctest::Approx(std::exp(-5.0)).epsilon(1e-8));
  CHECK(stats.accepted > 0);
}

TEST_CASE("harmonic oscillator and dense output") {
  OdeOptions<double> opt;
  opt.atol = 1e-11;
  opt.rtol = 1e-11;
  Vector y(2);
  y << 1.0, 0.0;
  double worst_dense = 0.0;
  integrate_dopri5<double>(
      [](double, const Vector& v) -> Vector {
        Vector r(2);
        r << v[1], -v[0];
        return r;
      },
      0.0, y, 10.0, opt,
      [&](const DenseStep<double>& step, Vector&) {
        const double tm = step.t0 + 0.5 * step.h;
        worst_dense = std::max(worst_dense, std::abs(step(tm)[0] - std::cos(tm)));
        return false;
      });
  CHECK(y[0] == doctest::Approx(std::cos(10.0)).epsilon(1e-8));
  CHECK(y[1] == doctest::Approx(-std::sin(10.0)).epsilon(1e-8));
  CHECK(worst_dense < 1e-6);
}

TEST_CASE("step budget exhaustion throws") {
  OdeOptions<double> opt;
  opt.max_steps = 3;
  opt.max_step = 1e-3;
  Vector y = Vector::Ones(1);
  CHECK_THROWS_AS(integrate_dopri5<double>([](double, const Vector& v) -> Vector { return -v; }, 0.0, y, 1.0, opt,
                                           [](const DenseStep<double>&, Vector&) { return false; }),
                  SolverError);
}

} // TEST_SUITE

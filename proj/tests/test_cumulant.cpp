#include "doctest.h"

#include "models.hpp"
#include "superbranch/cumulant.hpp"

#include <array>
#include <cmath>

using namespace superbranch;

namespace {

// Closed-form CBI cumulant: v' = -b v - c v^2.
double riccati(double b, double c, double f, double t) {
  const double e = std::exp(-b * t);
  return b * f * e / (b + c * f * (1.0 - e));
}

double riccati_integral(double b, double c, double f, double t) {
  return std::log1p(c * f * (1.0 - std::exp(-b * t)) / b) / c;
}

// The two-site test model written out by hand, with the jump integrals in
// closed form: exp(theta) gives u / (theta + u), compensated gamma(k, theta)
// gives (theta / (theta + u))^k - 1 + k u / theta.
std::array<double, 3> two_site_rhs(const std::array<double, 3>& s) {
  const double f0 = s[0], f1 = s[1];
  const double u = 0.5 * f0 + f1;
  const double phi0 = 0.4 * f0 * f0 + 2.0 * f0 - 0.3 * f1 - 0.6 * u / (2.5 + u);
  const double phi1 =
      0.25 * f1 * f1 + 1.8 * f1 - 0.2 * f0 + 0.5 * (std::pow(4.0 / (4.0 + f1), 2.0) - 1.0 + 2.0 * f1 / 4.0);
  const double u2 = f0 + 0.5 * f1;
  const double psi = 0.2 * f0 + 0.1 * f1 + 0.4 * u2 / (3.0 + u2);
  return {(f1 - f0) - phi0, 0.8 * (f0 - f1) - phi1, psi};
}

std::array<double, 3> rk4_two_site(double f0, double f1, double t, int steps) {
  std::array<double, 3> y{f0, f1, 0.0};
  const double h = t / steps;
  auto axpy = [](const std::array<double, 3>& a, double s, const std::array<double, 3>& b) {
    return std::array<double, 3>{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
  };
  for (int i = 0; i < steps; ++i) {
    const auto k1 = two_site_rhs(y);
    const auto k2 = two_site_rhs(axpy(y, h / 2, k1));
    const auto k3 = two_site_rhs(axpy(y, h / 2, k2));
    const auto k4 = two_site_rhs(axpy(y, h, k3));
    for (int j = 0; j < 3; ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

} // namespace

TEST_SUITE("cumulant") {

TEST_CASE("cbi matches the Riccati solution") {
  const auto m = testing::cbi();
  const Vector f = Vector::Ones(1);
  const auto sol = solve_cumulant(m, f, uniform_grid(3.0, 6));
  for (std::size_t k = 0; k < sol.grid.size(); ++k) {
    const double t = sol.grid[k];
    CAPTURE(t);
    CHECK(sol.values[k][0] == doctest::Approx(riccati(1.0, 0.5, 1.0, t)).epsilon(1e-8));
    CHECK(sol.psi_integral[k] == doctest::Approx(0.3 * riccati_integral(1.0, 0.5, 1.0, t)).epsilon(1e-8).scale(1e-12));
  }
  CHECK(solve_cumulant(m, f, 1.0).final_value()[0] == doctest::Approx(0.2795308443889587).epsilon(1e-9));
  const auto lap = transition_laplace(m, f, f, 1.0);
  CHECK(lap.value == doctest::Approx(0.6412624762686116).epsilon(1e-9));
  CHECK(lap.error_budget < 1e-6);
}

TEST_CASE("cbi invariant law is Gamma(0.6, 2)") {
  const auto m = testing::cbi();
  for (double f : {0.1, 1.0, 5.0}) {
    CAPTURE(f);
    const auto lap = invariant_laplace(m, Vector::Constant(1, f));
    CHECK(lap.value == doctest::Approx(std::pow(1.0 + 0.5 * f, -0.6)).epsilon(1e-8));
  }
}

TEST_CASE("two-site model matches an independent fixed-step integration") {
  const auto m = testing::two_site();
  for (const auto& f : {vec2(1.0, 0.5), vec2(0.2, 3.0)}) {
    const auto sol = solve_cumulant(m, f, 2.0);
    const auto ref = rk4_two_site(f[0], f[1], 2.0, 4000);
    CHECK(sol.final_value()[0] == doctest::Approx(ref[0]).epsilon(1e-7));
    CHECK(sol.final_value()[1] == doctest::Approx(ref[1]).epsilon(1e-7));
    CHECK(sol.final_psi_integral() == doctest::Approx(ref[2]).epsilon(1e-7));
  }
}

TEST_CASE("semigroup property") {
  for (const auto& [name, m] : testing::certified_models()) {
    CAPTURE(name);
    const Vector f = m.h * 0.8;
    CHECK(semigroup_defect(m, f, 0.5, 0.5) <= 1e-7);
    CHECK(semigroup_defect(m, f, 0.3, 1.2) <= 1e-7);
  }
}

TEST_CASE("h-transform conjugates the cumulant flow") {
  const auto m = testing::two_site();
  const auto u = h_transform(m);
  const Vector f = vec2(0.7, 1.2);
  const Vector v = solve_cumulant(m, f, 1.5).final_value();
  const Vector w = m.h.cwiseProduct(solve_cumulant(u, f.cwiseQuotient(m.h), 1.5).final_value());
  CHECK((v - w).cwiseAbs().maxCoeff() <= 1e-7 * v.cwiseAbs().maxCoeff());
}

TEST_CASE("monotonicity and the first-moment bound") {
  for (const auto& [name, m] : testing::certified_models()) {
    CAPTURE(name);
    const Vector f = m.h * 0.5;
    const Vector g = m.h * 0.9;
    const Vector vf = solve_cumulant(m, f, 1.0).final_value();
    const Vector vg = solve_cumulant(m, g, 1.0).final_value();
    const Vector rf = apply_R(m, f, 1.0);
    CHECK((vg - vf).minCoeff() >= -1e-10);
    CHECK((rf - vf).minCoeff() >= -1e-10);
    CHECK(vf.minCoeff() >= 0.0);
  }
}

TEST_CASE("scaled cumulants increase to the first moment") {
  for (const auto& [name, m] : testing::certified_models()) {
    CAPTURE(name);
    const Vector f = m.h;
    const Vector rf = apply_R(m, f, 1.0);
    SolverOptions opt;
    double prev = -1.0;
    for (double eps : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
      opt.atol = 1e-12 * eps;
      const Vector v = solve_cumulant(m, eps * f, 1.0, opt).final_value() / eps;
      const double s = v.sum();
      CHECK(s >= prev * (1 - 1e-9));
      prev = s;
      if (eps == 1e-4) CHECK(((v - rf).cwiseAbs().array() / rf.cwiseAbs().array()).maxCoeff() <= 1e-4);
    }
  }
}

TEST_CASE("degenerate inputs") {
  const auto m = testing::kp18();
  const Vector zero = Vector::Zero(3);
  const auto sol = solve_cumulant(m, zero, 2.0);
  CHECK(sol.final_value().isZero());
  CHECK(sol.final_psi_integral() == 0.0);
  CHECK(transition_laplace(m, Vector::Ones(3), zero, 2.0).value == 1.0);

  auto no_imm = testing::cbi();
  no_imm.immigration.beta.setZero();
  CHECK(transition_laplace(no_imm, Vector::Zero(1), Vector::Ones(1), 3.0).value == 1.0);
  CHECK(invariant_laplace(no_imm, Vector::Ones(1)).value == 1.0);

  CHECK_THROWS_AS(solve_cumulant(m, -Vector::Ones(3), 1.0), DomainError);
}

} // TEST_SUITE

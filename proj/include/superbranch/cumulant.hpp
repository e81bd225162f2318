#ifndef SUPERBRANCH_CUMULANT_HPP
#define SUPERBRANCH_CUMULANT_HPP

#include "superbranch/moments.hpp"
#include "superbranch/ode.hpp"

#include <vector>

namespace superbranch {

struct SolverOptions {
  double atol = 1e-10;
  double rtol = 1e-8;
  /// A run is rejected if a single accepted step needs a larger clamp.
  double max_clamp = 1e-8;
  /// Blow-up guard on ||v||_inf.
  double blowup = 1e12;
};

/// Strictly increasing output times starting at 0.
std::vector<double> uniform_grid(double t_end, std::size_t intervals);

/// Trajectory of V_t f and of int_0^t psi(V_s f) ds on an output grid.
struct CumulantSolution {
  Vector f0;
  std::vector<double> grid;
  std::vector<Vector> values;
  std::vector<double> psi_integral;
  SolverOptions options;
  double max_clamp = 0.0;
  OdeStats stats;

  const Vector& final_value() const { return values.back(); }
  double final_psi_integral() const { return psi_integral.back(); }
};

/// Integrates v' = Av - phi(., v), w' = psi(v) with v(0) = f, w(0) = 0.
CumulantSolution solve_cumulant(const LatticeModel& model, const VectorRef& f, const std::vector<double>& grid,
                                const SolverOptions& options = {});
CumulantSolution solve_cumulant(const LatticeModel& model, const VectorRef& f, double t_end,
                                const SolverOptions& options = {});

/// ||V_{s+t} f - V_s(V_t f)||_inf.
double semigroup_defect(const LatticeModel& model, const VectorRef& f, double s, double t,
                        const SolverOptions& options = {});

struct LaplaceValue {
  double value = 1.0;
  double exponent = 0.0;     // -log(value)
  double error_budget = 0.0; // absolute, on `value`
};

/// exp(-<V_t f, mu0> - int_0^t psi(V_s f) ds).
LaplaceValue transition_laplace(const LatticeModel& model, const VectorRef& mu0, const VectorRef& f, double t,
                                const SolverOptions& options = {});

/// int_0^inf psi(V_s g) ds, integrated until the certified tail bound
/// C ||V_T g||_h <h, a> / delta drops below `tail_tolerance`.
struct InfiniteHorizonIntegral {
  double integral = 0.0;
  double tail_bound = 0.0;
  double horizon = 0.0;
};
InfiniteHorizonIntegral psi_integral_to_infinity(const LatticeModel& model, const VectorRef& g,
                                                 const DecayCertificate& cert, double tail_tolerance = 1e-10,
                                                 const SolverOptions& options = {});

/// L_pi(f) = exp(-int_0^inf psi(V_s f) ds). Refuses uncertified models and
/// immigration without a finite log-moment.
LaplaceValue invariant_laplace(const LatticeModel& model, const VectorRef& f, const SolverOptions& options = {});
LaplaceValue invariant_laplace(const LatticeModel& model, const VectorRef& f, const DecayCertificate& cert,
                               const SolverOptions& options = {});

} // namespace superbranch

#endif

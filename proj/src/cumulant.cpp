#include "superbranch/cumulant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace superbranch {

namespace {

// psi on integrator stage values, which may carry round-off below zero.
double psi_unchecked(const LatticeModel& model, const Vector& v) {
  double value = model.immigration.beta.dot(v);
  for (const auto& ch : model.immigration.h2_channels) value += ch.intensity * ch.size.laplace(ch.profile.dot(v));
  return value;
}

struct Augmented {
  const LatticeModel& model;
  Eigen::Index d;

  Vector operator()(double, const Vector& y) const {
    Vector out(d + 1);
    const Vector v = y.head(d);
    out.head(d) = cumulant_rhs(model, v);
    out[d] = psi_unchecked(model, v);
    return out;
  }
};

void check_grid(const std::vector<double>& grid) {
  if (grid.empty() || grid.front() != 0.0) throw DomainError("time grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1]) || !std::isfinite(grid[i])) {
      throw DomainError("time grid must be strictly increasing and finite");
    }
  }
}

// Clamps negative state entries to zero; returns the largest clamp.
double clamp_state(Vector& y, Eigen::Index d) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (y[i] < 0.0) {
      worst = std::max(worst, -y[i]);
      y[i] = 0.0;
    }
  }
  return worst;
}

} // namespace

std::vector<double> uniform_grid(double t_end, std::size_t intervals) {
  if (!(t_end > 0.0) || intervals == 0) throw DomainError("uniform_grid: need t_end > 0 and intervals >= 1");
  std::vector<double> grid(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) grid[i] = t_end * static_cast<double>(i) / static_cast<double>(intervals);
  grid.back() = t_end;
  return grid;
}

CumulantSolution solve_cumulant(const LatticeModel& model, const VectorRef& f, const std::vector<double>& grid,
                                const SolverOptions& options) {
  require_nonnegative(f, "solve_cumulant: f");
  const auto d = static_cast<Eigen::Index>(model.dim());
  if (f.size() != d) throw DomainError("solve_cumulant: f has wrong size");
  check_grid(grid);

  CumulantSolution sol;
  sol.f0 = f;
  sol.grid = grid;
  sol.options = options;
  sol.values.reserve(grid.size());
  sol.psi_integral.reserve(grid.size());
  sol.values.push_back(f);
  sol.psi_integral.push_back(0.0);
  if (grid.size() == 1) return sol;

  Vector y(d + 1);
  y.head(d) = f;
  y[d] = 0.0;
  OdeOptions<double> opt;
  opt.atol = options.atol;
  opt.rtol = options.rtol;

  std::size_t next = 1;
  auto on_step = [&](const DenseStep<double>& step, Vector& state) {
    const double t_end = step.t0 + step.h;
    while (next < grid.size() && grid[next] < t_end && next + 1 < grid.size()) {
      Vector out = step(grid[next]);
      clamp_state(out, d);
      sol.values.push_back(out.head(d));
      sol.psi_integral.push_back(std::max(out[d], sol.psi_integral.back()));
      ++next;
    }
    const double clamp = clamp_state(state, d);
    sol.max_clamp = std::max(sol.max_clamp, clamp);
    if (clamp > options.max_clamp) {
      std::ostringstream msg;
      msg << "solve_cumulant: negative clamp " << clamp << " exceeds " << options.max_clamp << " at t=" << t_end;
      throw SolverError(msg.str());
    }
    if (state.head(d).cwiseAbs().maxCoeff() > options.blowup) {
      throw SolverError("solve_cumulant: solution exceeded blow-up guard at t=" + std::to_string(t_end));
    }
    return clamp > 0.0;
  };
  sol.stats = integrate_dopri5<double>(Augmented{model, d}, 0.0, y, grid.back(), opt, on_step);
  // Intermediate points are emitted from the dense output; the last one is
  // the end state itself.
  while (sol.values.size() < grid.size()) {
    sol.values.push_back(y.head(d));
    sol.psi_integral.push_back(std::max(y[d], sol.psi_integral.back()));
  }
  return sol;
}

CumulantSolution solve_cumulant(const LatticeModel& model, const VectorRef& f, double t_end,
                                const SolverOptions& options) {
  if (!(t_end > 0.0)) throw DomainError("solve_cumulant: t_end must be > 0");
  return solve_cumulant(model, f, std::vector<double>{0.0, t_end}, options);
}

double semigroup_defect(const LatticeModel& model, const VectorRef& f, double s, double t,
                        const SolverOptions& options) {
  if (!(s > 0.0) || !(t > 0.0)) throw DomainError("semigroup_defect: s and t must be > 0");
  const Vector direct = solve_cumulant(model, f, s + t, options).final_value();
  const Vector inner = solve_cumulant(model, f, t, options).final_value();
  const Vector composed = solve_cumulant(model, inner, s, options).final_value();
  return (direct - composed).cwiseAbs().maxCoeff();
}

LaplaceValue transition_laplace(const LatticeModel& model, const VectorRef& mu0, const VectorRef& f, double t,
                                const SolverOptions& options) {
  require_nonnegative(mu0, "transition_laplace: mu0");
  require_nonnegative(f, "transition_laplace: f");
  if (mu0.size() != f.size()) throw DomainError("transition_laplace: mu0 and f sizes differ");
  if (t < 0.0) throw DomainError("transition_laplace: t must be >= 0");
  LaplaceValue out;
  if (t == 0.0) {
    out.exponent = f.dot(mu0);
  } else {
    const auto sol = solve_cumulant(model, f, t, options);
    out.exponent = sol.final_value().dot(mu0) + sol.final_psi_integral();
    // Local error control bounds each component by ~atol + rtol |y|; the
    // factor 10 absorbs global accumulation over the run.
    out.error_budget = 10.0 * (options.rtol * out.exponent + options.atol * (1.0 + mu0.sum()));
  }
  out.value = std::exp(-out.exponent);
  out.error_budget *= out.value;
  return out;
}

InfiniteHorizonIntegral psi_integral_to_infinity(const LatticeModel& model, const VectorRef& g,
                                                 const DecayCertificate& cert, double tail_tolerance,
                                                 const SolverOptions& options) {
  require_nonnegative(g, "psi_integral_to_infinity: g");
  const Vector a = effective_immigration_mean(model);
  const double ha = model.h.dot(a);
  InfiniteHorizonIntegral out;
  if (ha == 0.0) return out; // psi == 0

  const double chunk = 1.0 / cert.delta;
  const double max_horizon = 2000.0 / cert.delta;
  Vector v = g;
  auto tail = [&](const Vector& state) {
    return cert.C * weighted_sup_norm(state, model.h) * ha / cert.delta;
  };
  out.tail_bound = tail(v);
  while (out.tail_bound > tail_tolerance) {
    if (out.horizon > max_horizon) {
      throw SolverError("psi_integral_to_infinity: tail bound did not reach tolerance by t=" +
                        std::to_string(out.horizon));
    }
    const auto sol = solve_cumulant(model, v, chunk, options);
    v = sol.final_value();
    out.integral += sol.final_psi_integral();
    out.horizon += chunk;
    out.tail_bound = tail(v);
  }
  return out;
}

LaplaceValue invariant_laplace(const LatticeModel& model, const VectorRef& f, const DecayCertificate& cert,
                               const SolverOptions& options) {
  require_nonnegative(f, "invariant_laplace: f");
  const auto report = validate_model(model);
  if (!report.h2_log_moment_finite) {
    throw RefusalError("invariant_laplace: immigration jumps lack a finite log-moment");
  }
  const auto tail = psi_integral_to_infinity(model, f, cert, 1e-10, options);
  LaplaceValue out;
  out.exponent = tail.integral;
  out.value = std::exp(-out.exponent);
  const double solver_budget = 10.0 * (options.rtol * out.exponent + options.atol * (1.0 + tail.horizon));
  out.error_budget = out.value * (solver_budget + tail.tail_bound);
  return out;
}

LaplaceValue invariant_laplace(const LatticeModel& model, const VectorRef& f, const SolverOptions& options) {
  return invariant_laplace(model, f, require_certificate(model), options);
}

} // namespace superbranch

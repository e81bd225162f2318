#include "superbranch/ergodicity.hpp"

#include "superbranch/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace superbranch {

namespace {

double norm_of(const Vector& f, const Vector& h, TestNorm norm) {
  return norm == TestNorm::weighted ? weighted_sup_norm(f, h) : f.cwiseAbs().maxCoeff();
}

void add_unique(TestDictionary& dict, Vector f, const Vector& h) {
  const double n = norm_of(f, h, dict.norm);
  if (!(n > 0.0)) return;
  f /= n;
  for (const auto& g : dict.functions) {
    if ((g - f).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff())) return;
  }
  dict.functions.push_back(std::move(f));
}

std::vector<double> with_origin(const std::vector<double>& t_grid, bool& prepended) {
  if (t_grid.empty()) throw DomainError("time grid must not be empty");
  prepended = t_grid.front() != 0.0;
  std::vector<double> grid;
  if (prepended) grid.push_back(0.0);
  grid.insert(grid.end(), t_grid.begin(), t_grid.end());
  return grid;
}

// |e^{-a} - e^{-b}| without cancellation when a and b are close.
double exp_gap(double a, double b) {
  return std::exp(-std::min(a, b)) * -std::expm1(-std::abs(a - b));
}

} // namespace

TestDictionary make_dictionary(const LatticeModel& model, std::size_t size, std::uint64_t seed, TestNorm norm) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  TestDictionary dict;
  dict.norm = norm;
  const Vector& h = model.h;
  for (Eigen::Index x = 0; x < d; ++x) {
    Vector f = Vector::Zero(d);
    f[x] = h[x];
    add_unique(dict, std::move(f), h);
  }
  add_unique(dict, h, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Random directions collapse only with probability zero unless d == 1.
  for (std::size_t attempt = 0; dict.functions.size() < size && attempt < 16 * size; ++attempt) {
    Vector w(d);
    for (Eigen::Index x = 0; x < d; ++x) w[x] = unif(rng);
    add_unique(dict, h.cwiseProduct(w), h);
  }
  return dict;
}

std::vector<double> laplace_distance_profile(const LatticeModel& model, const VectorRef& mu0,
                                             const TestDictionary& dict, const std::vector<double>& t_grid,
                                             const SolverOptions& options) {
  return laplace_distance_profile(model, mu0, dict, t_grid, require_certificate(model), options);
}

std::vector<double> laplace_distance_profile(const LatticeModel& model, const VectorRef& mu0,
                                             const TestDictionary& dict, const std::vector<double>& t_grid,
                                             const DecayCertificate& cert, const SolverOptions& options) {
  require_nonnegative(mu0, "laplace_distance_profile: mu0");
  if (!validate_model(model).h2_log_moment_finite) {
    throw RefusalError("laplace_distance_profile: immigration jumps lack a finite log-moment");
  }
  bool prepended = false;
  const auto grid = with_origin(t_grid, prepended);
  const std::size_t offset = prepended ? 1 : 0;
  std::vector<double> profile(t_grid.size(), 0.0);
  for (const auto& f : dict.functions) {
    const auto sol = solve_cumulant(model, f, grid, options);
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      const Vector& v = sol.values[k + offset];
      // L_t = e^{-w - <v, mu0>}, L_pi = e^{-w - tau} with tau the remaining
      // immigration integral from V_t f; the common factor is pulled out.
      const double w = sol.psi_integral[k + offset];
      const double tau = psi_integral_to_infinity(model, v, cert, 1e-10, options).integral;
      const double gap = std::exp(-w) * exp_gap(v.dot(mu0), tau);
      profile[k] = std::max(profile[k], gap);
    }
  }
  return profile;
}

std::vector<double> theorem41_bound(const LatticeModel& model, const VectorRef& mu0, const DecayCertificate& cert,
                                    const std::vector<double>& t_grid, double f_scale) {
  // |L_t(f) - L_pi(f)| <= <V_t f, mu0> + int_t^inf psi(V_s f) ds and
  // V_s f <= C ||f||_h e^{-delta s} h.
  const double mass = model.h.dot(mu0);
  const double log_term = 1.0 + std::log1p(mass);
  const double immigration = model.h.dot(effective_immigration_mean(model)) / cert.delta;
  const double c_prime = cert.C * f_scale * (mass + immigration) / log_term;
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(c_prime * std::exp(-cert.delta * t) * log_term);
  return out;
}

std::vector<double> theorem42_bound(const LatticeModel& model, double rho_mean_h, const DecayCertificate& cert,
                                    const std::vector<double>& t_grid) {
  const double stationary = model.h.dot(invariant_mean(model));
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back((rho_mean_h + stationary) * cert.C * std::exp(-cert.delta * t));
  return out;
}

std::vector<double> mean_gap(const LatticeModel& model, const VectorRef& mu0, const std::vector<double>& t_grid) {
  const Vector m_inf = invariant_mean(model);
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(weighted_tv(transition_mean(model, mu0, t), m_inf, model.h));
  return out;
}

std::vector<double> mean_gap_scalar(const LatticeModel& model, const VectorRef& mu0,
                                    const std::vector<double>& t_grid) {
  const double m_inf = model.h.dot(invariant_mean(model));
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(std::abs(model.h.dot(transition_mean(model, mu0, t)) - m_inf));
  return out;
}

DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& values) {
  if (t.size() != values.size() || t.empty()) throw DomainError("fit_decay_rate: need matching nonempty series");
  const double t_end = t.back();
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= 0.5 * t_end && values[i] > 0.0 && std::isfinite(values[i])) {
      xs.push_back(t[i]);
      ys.push_back(std::log(values[i]));
    }
  }
  if (xs.size() < 2) throw DomainError("fit_decay_rate: fewer than two positive points in the tail window");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_decay_rate: window has a single distinct time");
  DecayFit fit;
  fit.rate = sxy / sxx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = xs.size();
  return fit;
}

double empirical_w1(const std::vector<Vector>& a, const std::vector<Vector>& b, const VectorRef& h) {
  if (a.size() != b.size()) throw DomainError("empirical_w1: sample sets must have equal size");
  if (a.empty()) throw DomainError("empirical_w1: sample sets must be nonempty");
  if (a.size() > 512) throw DomainError("empirical_w1: at most 512 samples per set");
  const auto n = static_cast<Eigen::Index>(a.size());
  Matrix cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = weighted_tv(a[i], b[j], h);
  }
  return solve_assignment(cost).cost / static_cast<double>(n);
}

double mixture_laplace_distance(const LatticeModel& model, const Mixture& rho, const Mixture& rho_prime,
                                const TestDictionary& dict, double t, const SolverOptions& options) {
  if (t < 0.0) throw DomainError("mixture_laplace_distance: t must be >= 0");
  double best = 0.0;
  for (const auto& f : dict.functions) {
    Vector v = f;
    double w = 0.0;
    if (t > 0.0) {
      const auto sol = solve_cumulant(model, f, t, options);
      v = sol.final_value();
      w = sol.final_psi_integral();
    }
    auto transform = [&](const Mixture& m) {
      double sum = 0.0;
      for (const auto& [weight, mu] : m) sum += weight * std::exp(-w - v.dot(mu));
      return sum;
    };
    best = std::max(best, std::abs(transform(rho) - transform(rho_prime)));
  }
  return best;
}

ErgodicityReport ergodicity_report(const LatticeModel& model, const VectorRef& mu0, const ErgodicityOptions& opt) {
  ensure_valid(model);
  ErgodicityReport rep;
  rep.certificate = require_certificate(model);
  rep.t = uniform_grid(opt.t_max, opt.grid_intervals);
  rep.dictionary = make_dictionary(model, opt.dict_size, opt.seed, opt.norm);
  rep.dl_lower = laplace_distance_profile(model, mu0, rep.dictionary, rep.t, rep.certificate);
  double f_scale = 0.0;
  for (const auto& f : rep.dictionary.functions) f_scale = std::max(f_scale, weighted_sup_norm(f, model.h));
  rep.dl_bound = theorem41_bound(model, mu0, rep.certificate, rep.t, f_scale);
  rep.mean_gap = mean_gap(model, mu0, rep.t);
  rep.mean_gap_scalar = mean_gap_scalar(model, mu0, rep.t);
  rep.w1_bound = theorem42_bound(model, model.h.dot(mu0), rep.certificate, rep.t);
  rep.w1_empirical.assign(rep.t.size(), std::nullopt);
  auto try_fit = [&](const std::vector<double>& values) {
    try {
      return fit_decay_rate(rep.t, values);
    } catch (const DomainError&) {
      return DecayFit{};
    }
  };
  rep.dl_fit = try_fit(rep.dl_lower);
  rep.mean_gap_fit = try_fit(rep.mean_gap);

  if (opt.paths > 0) {
    if (opt.paths > 512) throw DomainError("ergodicity_report: at most 512 paths for empirical W1");
    SimConfig sim;
    sim.scheme = (model.branching.c.array() > 0.0).any() ? Scheme::splitting : Scheme::event_driven;
    sim.dt = opt.dt;
    sim.n_paths = opt.paths;
    sim.seed = opt.seed;
    sim.threads = opt.threads;
    sim.record_grid = rep.t;
    const auto ens = simulate_paths(model, mu0, sim);
    sim.stream_offset = opt.paths;
    const auto inv = sample_invariant(model, Vector::Zero(static_cast<Eigen::Index>(model.dim())), sim);
    std::vector<Vector> at_t(opt.paths);
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
      for (std::size_t i = 0; i < opt.paths; ++i) at_t[i] = ens.state(i, k);
      rep.w1_empirical[k] = empirical_w1(at_t, inv.samples, model.h);
    }
  }
  return rep;
}

} // namespace superbranch

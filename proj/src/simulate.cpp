#include "superbranch/simulate.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

namespace superbranch {

namespace {

// mu -> phi mu + psi over a fixed time span of a linear drift
// mu' = M^T mu + beta. Both parts are entrywise nonnegative.
struct Flow {
  Matrix phi;
  Vector psi;
};

struct BranchChannel {
  std::size_t site;
  double rate; // per unit mass at `site`
  Vector profile;
  const JumpSizeLaw* size;
};

struct ImmigrationChannel {
  double rate;
  Vector profile;
  const JumpSizeLaw* size;
};

// Per-site part of one splitting substep: dX = (beta - kappa X) dt +
// sqrt(2 c X) dW over h, exact.
struct LocalStep {
  Vector decay; // e^{-kappa h}
  Vector gain;  // (1 - e^{-kappa h}) / kappa
};

struct Plan {
  Eigen::Index d = 0;
  Matrix lt;          // L^T
  Matrix coupling_t;  // off-diagonal part of L, transposed
  Vector kappa_local; // -diag(L)
  Vector beta;
  Vector c;
  double kappa = 0.0;
  std::vector<BranchChannel> branch;
  std::vector<ImmigrationChannel> immigration;
  std::vector<double> grid;
  std::vector<std::size_t> substeps; // per grid interval
  std::vector<Flow> flows;           // per grid interval: half coupling step (splitting) or full step (event-driven)
  std::vector<LocalStep> local;      // per grid interval, splitting only
  Scheme scheme = Scheme::splitting;
};

Flow make_flow(const MatrixRef& mt, const VectorRef& beta, double s) {
  const auto d = mt.rows();
  Matrix aug = Matrix::Zero(d + 1, d + 1);
  aug.topLeftCorner(d, d) = mt * s;
  aug.topRightCorner(d, 1) = beta * s;
  const Matrix e = aug.exp();
  Flow f{e.topLeftCorner(d, d).cwiseMax(0.0), e.topRightCorner(d, 1).cwiseMax(0.0)};
  return f;
}

Flow make_flow(const Plan& plan, double s) { return make_flow(plan.lt, plan.beta, s); }

// (1 - e^{-k h}) / k, continuous at k = 0.
double relaxation(double k, double h) {
  return k == 0.0 ? h : -std::expm1(-k * h) / k;
}

Plan make_plan(const LatticeModel& model, const SimConfig& sim, double dt) {
  Plan plan;
  plan.d = static_cast<Eigen::Index>(model.dim());
  plan.scheme = sim.scheme;
  plan.beta = model.immigration.beta;
  plan.c = model.branching.c;

  Vector comp = Vector::Zero(plan.d);
  for (const auto& ch : model.branching.h1_channels) {
    if (ch.compensated) comp[ch.site] += ch.intensity * ch.size.mean() * ch.profile[ch.site];
    if (ch.total_rate() > 0.0) {
      plan.branch.push_back({ch.site, ch.total_rate(), ch.profile, &ch.size});
    }
  }
  for (const auto& ch : model.immigration.h2_channels) {
    if (ch.total_rate() > 0.0) plan.immigration.push_back({ch.total_rate(), ch.profile, &ch.size});
  }
  const Matrix l = model.motion.generator() + model.branching.eta -
                   Matrix((model.branching.b + comp).asDiagonal());
  plan.lt = l.transpose();
  plan.kappa = std::max(0.0, (-l.diagonal()).maxCoeff());
  plan.kappa_local = -l.diagonal();
  Matrix off = l;
  off.diagonal().setZero();
  plan.coupling_t = off.transpose();

  plan.grid = sim.record_grid;
  for (std::size_t k = 1; k < plan.grid.size(); ++k) {
    const double span = plan.grid[k] - plan.grid[k - 1];
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt * (1.0 - 1e-12))));
    plan.substeps.push_back(n);
    const double h = span / static_cast<double>(n);
    if (plan.scheme == Scheme::splitting) {
      plan.flows.push_back(make_flow(plan.coupling_t, Vector::Zero(plan.d), 0.5 * h));
      LocalStep local{Vector(plan.d), Vector(plan.d)};
      for (Eigen::Index x = 0; x < plan.d; ++x) {
        local.decay[x] = std::exp(-plan.kappa_local[x] * h);
        local.gain[x] = relaxation(plan.kappa_local[x], h);
      }
      plan.local.push_back(std::move(local));
    } else {
      plan.flows.push_back(make_flow(plan, h));
    }
  }
  return plan;
}

// g * Gamma(shape + N, 1) with N ~ Poisson(m / g): the noncentral
// chi-square law of a square-root diffusion with mean part m.
double sample_cir_gamma_mixture(double m, double shape, double g, std::mt19937_64& rng) {
  double n = 0.0;
  if (m > 0.0) {
    std::poisson_distribution<long long> pois(m / g);
    n = static_cast<double>(pois(rng));
  }
  const double k = shape + n;
  if (k <= 0.0) return 0.0;
  std::gamma_distribution<double> gam(k, 1.0);
  return g * gam(rng);
}

struct PathState {
  Vector mu;
  std::mt19937_64 rng;
  SimDiagnostics diag;
};

void check_finite(const Vector& mu) {
  if (!mu.allFinite()) throw SolverError("simulate: state became non-finite");
}

void apply_flow(const Flow& flow, PathState& s) {
  s.mu = flow.phi * s.mu + flow.psi;
  check_finite(s.mu);
}

void guard_rate(double total) {
  if (!(total <= 1e12)) throw SolverError("simulate: jump rate exceeded 1e12 (blow-up)");
}

double branch_rates(const Plan& plan, const Vector& mu, std::vector<double>& rates) {
  double total = 0.0;
  std::size_t i = 0;
  for (const auto& ch : plan.branch) {
    rates[i] = ch.rate * mu[static_cast<Eigen::Index>(ch.site)];
    total += rates[i++];
  }
  for (const auto& ch : plan.immigration) {
    rates[i] = ch.rate;
    total += rates[i++];
  }
  return total;
}

void fire(const Plan& plan, const std::vector<double>& rates, double total, PathState& s) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(s.rng) * total;
  std::size_t pick = rates.size() - 1;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (u < rates[i]) {
      pick = i;
      break;
    }
    u -= rates[i];
  }
  // Round-off can leave u past the last positive rate.
  while (rates[pick] <= 0.0 && pick > 0) --pick;
  const std::size_t nb = plan.branch.size();
  if (pick < nb) {
    const auto& ch = plan.branch[pick];
    s.mu += ch.size->sample(s.rng) * ch.profile;
    ++s.diag.h1_jumps[pick];
  } else {
    const auto& ch = plan.immigration[pick - nb];
    s.mu += ch.size->sample(s.rng) * ch.profile;
    ++s.diag.h2_jumps[pick - nb];
  }
  check_finite(s.mu);
}

// Exact jump part over time tau with the state frozen between jumps.
void jump_phase(const Plan& plan, double tau, PathState& s, std::vector<double>& rates) {
  std::exponential_distribution<double> expo(1.0);
  double t = 0.0;
  while (true) {
    const double total = branch_rates(plan, s.mu, rates);
    guard_rate(total);
    if (total <= 0.0) return;
    t += expo(s.rng) / total;
    if (t > tau) return;
    fire(plan, rates, total, s);
  }
}

void local_phase(const Plan& plan, const LocalStep& local, PathState& s) {
  for (Eigen::Index x = 0; x < plan.d; ++x) {
    if (plan.c[x] > 0.0) {
      s.mu[x] = sample_cir_gamma_mixture(s.mu[x] * local.decay[x], plan.beta[x] / plan.c[x],
                                         plan.c[x] * local.gain[x], s.rng);
    } else {
      s.mu[x] = s.mu[x] * local.decay[x] + plan.beta[x] * local.gain[x];
    }
  }
}

// Strang splitting: half coupling flow, half jumps, exact per-site
// drift/immigration/diffusion step, half jumps, half coupling flow.
void splitting_substep(const Plan& plan, const Flow& half_flow, const LocalStep& local, double h, PathState& s,
                       std::vector<double>& rates) {
  apply_flow(half_flow, s);
  if (!rates.empty()) jump_phase(plan, 0.5 * h, s, rates);
  local_phase(plan, local, s);
  if (!rates.empty()) jump_phase(plan, 0.5 * h, s, rates);
  apply_flow(half_flow, s);
}

// Exact for c == 0. Over [0, h] the flow satisfies e^{sL^T} <= e^{kappa h} e^{hL^T}
// entrywise, so mu_bar = e^{kappa h}(phi_h mu + h phi_h beta) dominates the
// state until the next jump; candidates are thinned against it and the
// substep restarts from each accepted jump.
void event_substep(const Plan& plan, const Flow& full_flow, double h, PathState& s, std::vector<double>& rates) {
  if (rates.empty()) {
    apply_flow(full_flow, s);
    return;
  }
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double remaining = h;
  bool fresh = true; // full_flow still matches `remaining`
  while (remaining > 0.0) {
    const Flow span = fresh ? full_flow : make_flow(plan, remaining);
    const Vector bound = std::exp(plan.kappa * remaining) * (span.phi * (s.mu + remaining * plan.beta));
    const double majorant = branch_rates(plan, bound, rates);
    guard_rate(majorant);
    double t = 0.0;
    bool jumped = false;
    while (majorant > 0.0) {
      t += expo(s.rng) / majorant;
      if (t >= remaining) break;
      const Flow to_t = make_flow(plan, t);
      Vector at_t = to_t.phi * s.mu + to_t.psi;
      const double total = branch_rates(plan, at_t, rates);
      if (unif(s.rng) * majorant < total) {
        s.mu = std::move(at_t);
        fire(plan, rates, total, s);
        remaining -= t;
        fresh = false;
        jumped = true;
        break;
      }
      ++s.diag.rejected_candidates;
    }
    if (!jumped) {
      s.mu = span.phi * s.mu + span.psi;
      check_finite(s.mu);
      return;
    }
  }
}

void run_path(const Plan& plan, const Vector& mu0, PathState& s, double* out) {
  const std::size_t nb = plan.branch.size() + plan.immigration.size();
  std::vector<double> rates(nb);
  s.mu = mu0;
  const auto d = static_cast<std::size_t>(plan.d);
  std::copy(s.mu.data(), s.mu.data() + d, out);
  for (std::size_t k = 0; k + 1 < plan.grid.size(); ++k) {
    const std::size_t n = plan.substeps[k];
    const double h = (plan.grid[k + 1] - plan.grid[k]) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (plan.scheme == Scheme::splitting) {
        splitting_substep(plan, plan.flows[k], plan.local[k], h, s, rates);
      } else {
        event_substep(plan, plan.flows[k], h, s, rates);
      }
      ++s.diag.substeps;
    }
    for (Eigen::Index x = 0; x < plan.d; ++x) {
      if (s.mu[x] < 0.0) {
        ++s.diag.clamp_events;
        s.diag.max_clamp = std::max(s.diag.max_clamp, -s.mu[x]);
        s.mu[x] = 0.0;
      }
    }
    std::copy(s.mu.data(), s.mu.data() + d, out + (k + 1) * d);
  }
}

void merge(SimDiagnostics& into, const SimDiagnostics& from) {
  into.substeps += from.substeps;
  into.clamp_events += from.clamp_events;
  into.max_clamp = std::max(into.max_clamp, from.max_clamp);
  into.rejected_candidates += from.rejected_candidates;
  for (std::size_t i = 0; i < into.h1_jumps.size(); ++i) into.h1_jumps[i] += from.h1_jumps[i];
  for (std::size_t i = 0; i < into.h2_jumps.size(); ++i) into.h2_jumps[i] += from.h2_jumps[i];
}

void check_record_grid(const std::vector<double>& grid) {
  if (grid.size() < 2 || grid.front() != 0.0) throw DomainError("simulate: record grid must start at 0 and have >= 2 points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1]) || !std::isfinite(grid[i])) {
      throw DomainError("simulate: record grid must be strictly increasing and finite");
    }
  }
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) throw IoError("read_ensemble: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

} // namespace

const char* to_string(Scheme s) {
  return s == Scheme::event_driven ? "event_driven" : "splitting";
}

double default_dt(const LatticeModel& model) {
  const auto op = assemble_moment_operator(model);
  const double norm = op.B.cwiseAbs().rowwise().sum().maxCoeff();
  return 1e-3 * std::min(1.0, norm > 0.0 ? 1.0 / norm : 1.0);
}

PathEnsemble::PathEnsemble(std::size_t n_paths, std::vector<double> grid, std::size_t d)
    : n_paths_(n_paths), d_(d), grid_(std::move(grid)), data_(n_paths * grid_.size() * d, 0.0) {}

std::size_t PathEnsemble::grid_index(double t) const {
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    if (std::abs(grid_[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
  }
  throw DomainError("time " + std::to_string(t) + " is not on the record grid");
}

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double sample_square_root_step(double x, double c, double h, std::mt19937_64& rng) {
  return sample_cir_step(x, 0.0, 0.0, c, h, rng);
}

double sample_cir_step(double x, double a, double kappa, double c, double h, std::mt19937_64& rng) {
  return sample_cir_gamma_mixture(x * std::exp(-kappa * h), a / c, c * relaxation(kappa, h), rng);
}

PathEnsemble simulate_paths(const LatticeModel& model, const VectorRef& mu0, const SimConfig& sim) {
  ensure_valid(model);
  require_nonnegative(mu0, "simulate: mu0");
  if (mu0.size() != static_cast<Eigen::Index>(model.dim())) throw DomainError("simulate: mu0 size mismatch");
  if (sim.n_paths == 0) throw DomainError("simulate: n_paths must be >= 1");
  check_record_grid(sim.record_grid);
  if (sim.dt < 0.0 || !std::isfinite(sim.dt)) throw DomainError("simulate: dt must be >= 0");
  if (sim.scheme == Scheme::event_driven && (model.branching.c.array() > 0.0).any()) {
    throw DomainError("simulate: event_driven scheme requires c == 0; use splitting");
  }
  const double dt = sim.dt > 0.0 ? sim.dt : default_dt(model);
  const Plan plan = make_plan(model, sim, dt);

  PathEnsemble ens(sim.n_paths, sim.record_grid, model.dim());
  ens.seed = sim.seed;
  ens.stream_offset = sim.stream_offset;
  ens.scheme = sim.scheme;
  ens.dt = dt;
  ens.diagnostics.h1_jumps.assign(plan.branch.size(), 0);
  ens.diagnostics.h2_jumps.assign(plan.immigration.size(), 0);

  unsigned threads = sim.threads ? sim.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, sim.n_paths));
  const Vector start = mu0;
  const std::size_t stride = ens.grid().size() * ens.dim();

  std::vector<SimDiagnostics> diags(threads, ens.diagnostics);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](unsigned w) {
    try {
      const std::size_t lo = sim.n_paths * w / threads;
      const std::size_t hi = sim.n_paths * (w + 1) / threads;
      for (std::size_t i = lo; i < hi; ++i) {
        PathState s{Vector(), path_engine(sim.seed, sim.stream_offset + i), ens.diagnostics};
        run_path(plan, start, s, ens.data().data() + i * stride);
        merge(diags[w], s.diag);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& d : diags) merge(ens.diagnostics, d);
  return ens;
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

namespace {

Estimate mean_and_error(std::vector<double>& values) {
  const auto n = values.size();
  Estimate e;
  e.value = pairwise_sum(values.data(), n) / static_cast<double>(n);
  if (n > 1) {
    for (auto& v : values) v = (v - e.value) * (v - e.value);
    e.stderr_ = std::sqrt(pairwise_sum(values.data(), n) / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return e;
}

} // namespace

Estimate empirical_laplace(const PathEnsemble& ensemble, const VectorRef& f, double t) {
  require_nonnegative(f, "empirical_laplace: f");
  if (f.size() != static_cast<Eigen::Index>(ensemble.dim())) throw DomainError("empirical_laplace: f size mismatch");
  const std::size_t k = ensemble.grid_index(t);
  std::vector<double> values(ensemble.n_paths());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::exp(-f.dot(ensemble.state(i, k)));
  return mean_and_error(values);
}

VectorEstimate empirical_mean(const PathEnsemble& ensemble, double t) {
  const std::size_t k = ensemble.grid_index(t);
  const auto d = ensemble.dim();
  VectorEstimate out{Vector(d), Vector(d)};
  std::vector<double> values(ensemble.n_paths());
  for (std::size_t x = 0; x < d; ++x) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = ensemble.at(i, k, x);
    const auto e = mean_and_error(values);
    out.mean[static_cast<Eigen::Index>(x)] = e.value;
    out.stderr_[static_cast<Eigen::Index>(x)] = e.stderr_;
  }
  return out;
}

InvariantSamples sample_invariant(const LatticeModel& model, const VectorRef& mu0, SimConfig sim,
                                  std::size_t samples_per_path) {
  if (samples_per_path == 0) throw DomainError("sample_invariant: samples_per_path must be >= 1");
  const auto cert = require_certificate(model);
  InvariantSamples out;
  out.burn_in = std::max(0.0, std::log(1e3 * cert.C) / cert.delta);
  out.spacing = 3.0 / cert.delta;
  sim.record_grid = {0.0};
  for (std::size_t j = 0; j < samples_per_path; ++j) {
    sim.record_grid.push_back(out.burn_in + out.spacing * static_cast<double>(j));
  }
  if (sim.record_grid[1] == 0.0) sim.record_grid.erase(sim.record_grid.begin());
  const auto ens = simulate_paths(model, mu0, sim);
  const std::size_t first = ens.grid().size() - samples_per_path;
  out.samples.reserve(ens.n_paths() * samples_per_path);
  for (std::size_t i = 0; i < ens.n_paths(); ++i) {
    for (std::size_t j = 0; j < samples_per_path; ++j) out.samples.emplace_back(ens.state(i, first + j));
  }
  return out;
}

void write_ensemble(const PathEnsemble& ensemble, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_ensemble: cannot open " + path.string());
  os.write("SBR1", 4);
  put_u64(os, ensemble.n_paths());
  put_u64(os, ensemble.grid().size());
  put_u64(os, ensemble.dim());
  for (double t : ensemble.grid()) put_u64(os, std::bit_cast<std::uint64_t>(t));
  for (double v : ensemble.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw IoError("write_ensemble: write failed for " + path.string());
}

PathEnsemble read_ensemble(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_ensemble: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "SBR1") throw IoError("read_ensemble: bad magic in " + path.string());
  const auto n = get_u64(is);
  const auto g = get_u64(is);
  const auto d = get_u64(is);
  if (g == 0 || d == 0 || n > (1ull << 40) / std::max<std::uint64_t>(1, g * d)) {
    throw IoError("read_ensemble: implausible header");
  }
  std::vector<double> grid(g);
  for (auto& t : grid) t = std::bit_cast<double>(get_u64(is));
  PathEnsemble ens(n, std::move(grid), d);
  for (auto& v : ens.data()) v = std::bit_cast<double>(get_u64(is));
  return ens;
}

} // namespace superbranch

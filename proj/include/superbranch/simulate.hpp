#ifndef SUPERBRANCH_SIMULATE_HPP
#define SUPERBRANCH_SIMULATE_HPP

#include "superbranch/moments.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <utility>
#include <vector>

namespace superbranch {

enum class Scheme {
  /// Exact for c == 0: deterministic linear flow between jumps, branching
  /// jumps by thinning against a rate majorant refreshed every substep.
  event_driven,
  /// Strang splitting: half coupling flow, half jumps, exact per-site
  /// square-root diffusion with drift and immigration, half jumps, half
  /// coupling flow.
  splitting,
};

const char* to_string(Scheme s);

struct SimConfig {
  Scheme scheme = Scheme::splitting;
  double dt = 0.0; // 0: 1e-3 * min(1, 1/||B||)
  std::size_t n_paths = 1;
  std::vector<double> record_grid; // must start at 0; last entry is t_end
  std::uint64_t seed = 0;
  std::uint64_t stream_offset = 0;
  unsigned threads = 0; // 0: hardware concurrency
};

/// Default substep 1e-3 * min(1, 1/||B||_inf).
double default_dt(const LatticeModel& model);

struct SimDiagnostics {
  std::uint64_t substeps = 0;
  std::uint64_t clamp_events = 0;
  double max_clamp = 0.0;
  std::uint64_t rejected_candidates = 0;
  std::vector<std::uint64_t> h1_jumps; // per branching channel
  std::vector<std::uint64_t> h2_jumps; // per immigration channel
};

/// n_paths x grid x d nonnegative states, path-major.
class PathEnsemble {
public:
  PathEnsemble() = default;
  PathEnsemble(std::size_t n_paths, std::vector<double> grid, std::size_t d);

  std::size_t n_paths() const { return n_paths_; }
  std::size_t dim() const { return d_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double& at(std::size_t path, std::size_t k, std::size_t x) { return data_[(path * grid_.size() + k) * d_ + x]; }
  double at(std::size_t path, std::size_t k, std::size_t x) const {
    return data_[(path * grid_.size() + k) * d_ + x];
  }
  Eigen::Map<const Vector> state(std::size_t path, std::size_t k) const {
    return {data_.data() + (path * grid_.size() + k) * d_, static_cast<Eigen::Index>(d_)};
  }
  /// Index of `t` on the record grid; throws DomainError if off-grid.
  std::size_t grid_index(double t) const;

  std::uint64_t seed = 0;
  std::uint64_t stream_offset = 0;
  Scheme scheme = Scheme::splitting;
  double dt = 0.0;
  SimDiagnostics diagnostics;

private:
  std::size_t n_paths_ = 0;
  std::size_t d_ = 0;
  std::vector<double> grid_;
  std::vector<double> data_;
};

/// The RNG stream of one path: mt19937_64 seeded from (seed, stream).
std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t stream);

/// One exact step of dX = sqrt(2 c X) dW over time h: a Poisson mixture of
/// gamma laws, X_h = c h Gamma(N, 1) with N ~ Poisson(x / (c h)).
double sample_square_root_step(double x, double c, double h, std::mt19937_64& rng);

/// One exact step of dX = (a - kappa X) dt + sqrt(2 c X) dW over time h
/// (noncentral chi-square). Requires c > 0.
double sample_cir_step(double x, double a, double kappa, double c, double h, std::mt19937_64& rng);

PathEnsemble simulate_paths(const LatticeModel& model, const VectorRef& mu0, const SimConfig& sim);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error of exp(-<f, mu_t>) over paths.
Estimate empirical_laplace(const PathEnsemble& ensemble, const VectorRef& f, double t);

struct VectorEstimate {
  Vector mean;
  Vector stderr_;
};
VectorEstimate empirical_mean(const PathEnsemble& ensemble, double t);

struct InvariantSamples {
  std::vector<Vector> samples;
  double burn_in = 0.0;
  double spacing = 0.0;
};

/// Long-run samples: burn-in until C e^{-delta t} <= 1e-3, then
/// `samples_per_path` draws spaced 3/delta apart on each path.
InvariantSamples sample_invariant(const LatticeModel& model, const VectorRef& mu0, SimConfig sim,
                                  std::size_t samples_per_path = 1);

/// Pairwise summation.
double pairwise_sum(const double* x, std::size_t n);

/// Binary ensemble file: "SBR1", u64 n_paths, u64 n_grid, u64 d, f64 grid
/// times, then the f64 states in path-major order. All little-endian.
void write_ensemble(const PathEnsemble& ensemble, const std::filesystem::path& path);
PathEnsemble read_ensemble(const std::filesystem::path& path);

} // namespace superbranch

#endif

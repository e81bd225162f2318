#ifndef SUPERBRANCH_ERGODICITY_HPP
#define SUPERBRANCH_ERGODICITY_HPP

#include "superbranch/cumulant.hpp"
#include "superbranch/simulate.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace superbranch {

enum class TestNorm {
  weighted, // ||f||_h = 1
  sup,      // ||f||_inf = 1
};

/// Nonnegative test functions of unit norm. Entries are deduplicated after
/// normalization, so scalar multiples of one direction collapse to one entry.
struct TestDictionary {
  std::vector<Vector> functions;
  TestNorm norm = TestNorm::weighted;
};

/// Coordinate indicators scaled by h, h itself, then random mixtures h * w
/// with w uniform on [0,1]^d, until `size` distinct entries (or the
/// indicators and h alone if `size` is smaller).
TestDictionary make_dictionary(const LatticeModel& model, std::size_t size, std::uint64_t seed,
                               TestNorm norm = TestNorm::weighted);

/// max over the dictionary of |L_{P_t(mu0, .)}(f) - L_pi(f)| at each t.
std::vector<double> laplace_distance_profile(const LatticeModel& model, const VectorRef& mu0,
                                             const TestDictionary& dict, const std::vector<double>& t_grid,
                                             const SolverOptions& options = {});
std::vector<double> laplace_distance_profile(const LatticeModel& model, const VectorRef& mu0,
                                             const TestDictionary& dict, const std::vector<double>& t_grid,
                                             const DecayCertificate& cert, const SolverOptions& options = {});

/// C' e^{-delta t} (1 + log(1 + <h, mu0>)) with
/// C' = C f_scale (<h, mu0> + <h, a> / delta) / (1 + log(1 + <h, mu0>)),
/// where f_scale bounds ||f||_h over the test functions and a is the
/// effective immigration mean.
std::vector<double> theorem41_bound(const LatticeModel& model, const VectorRef& mu0, const DecayCertificate& cert,
                                    const std::vector<double>& t_grid, double f_scale = 1.0);

/// (rho_mean_h + <h, m_inf>) C e^{-delta t}.
std::vector<double> theorem42_bound(const LatticeModel& model, double rho_mean_h, const DecayCertificate& cert,
                                    const std::vector<double>& t_grid);

/// sum_x h(x) |m_t(x) - m_inf(x)|.
std::vector<double> mean_gap(const LatticeModel& model, const VectorRef& mu0, const std::vector<double>& t_grid);

/// |<h, m_t> - <h, m_inf>|.
std::vector<double> mean_gap_scalar(const LatticeModel& model, const VectorRef& mu0,
                                    const std::vector<double>& t_grid);

struct DecayFit {
  double rate = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of log(value) against t over [t_end/2, t_end],
/// skipping nonpositive values.
DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& values);

/// Exact W1 between two equal-size empirical laws (n <= 512) under the cost
/// sum_x h(x) |mu(x) - nu(x)|.
double empirical_w1(const std::vector<Vector>& a, const std::vector<Vector>& b, const VectorRef& h);

/// Finite mixture sum_i weight_i delta_{mu_i} of initial states.
using Mixture = std::vector<std::pair<double, Vector>>;

/// Dictionary distance between P_t^* rho and P_t^* rho'.
double mixture_laplace_distance(const LatticeModel& model, const Mixture& rho, const Mixture& rho_prime,
                                const TestDictionary& dict, double t, const SolverOptions& options = {});

struct ErgodicityOptions {
  double t_max = 10.0;
  std::size_t grid_intervals = 50;
  std::size_t dict_size = 8;
  std::size_t paths = 0; // > 0 adds empirical W1 (paths <= 512)
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double dt = 0.0;
  TestNorm norm = TestNorm::weighted;
};

struct ErgodicityReport {
  std::vector<double> t;
  std::vector<double> dl_lower;
  std::vector<double> dl_bound;
  std::vector<double> mean_gap;
  std::vector<double> mean_gap_scalar;
  std::vector<double> w1_bound;
  std::vector<std::optional<double>> w1_empirical;
  DecayFit dl_fit;
  DecayFit mean_gap_fit;
  DecayCertificate certificate;
  TestDictionary dictionary;
};

ErgodicityReport ergodicity_report(const LatticeModel& model, const VectorRef& mu0, const ErgodicityOptions& opt);

} // namespace superbranch

#endif

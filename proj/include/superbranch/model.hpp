#ifndef SUPERBRANCH_MODEL_HPP
#define SUPERBRANCH_MODEL_HPP

#include "superbranch/core.hpp"
#include "superbranch/size_law.hpp"

#include <optional>
#include <string>
#include <vector>

namespace superbranch {

/// Bounded-rate Markov chain on the sites: off-diagonal rates q(x,y) >= 0,
/// zero diagonal.
struct MotionGenerator {
  Matrix q;

  /// Generator matrix: off-diagonal q(x,y), diagonal -sum_y q(x,y).
  Matrix generator() const;
  Vector total_rates() const { return q.rowwise().sum(); }
};

/// One atom family of H1(x, .) or H2: jumps of the form z * profile, with z
/// drawn from `size`, at rate intensity * size.mass() (per unit of mu(site)
/// for branching channels, absolute for immigration channels).
struct JumpChannel {
  std::size_t site = 0; // source site; ignored for immigration channels
  double intensity = 0.0;
  Vector profile;
  JumpSizeLaw size = JumpSizeLaw::exponential(1.0);
  bool compensated = false;

  double total_rate() const { return intensity * size.mass(); }
};

struct BranchingMechanism {
  Vector b;
  Vector c;
  Matrix eta;
  std::vector<JumpChannel> h1_channels;
};

struct ImmigrationMechanism {
  Vector beta;
  std::vector<JumpChannel> h2_channels;
};

/// Finite-lattice branching/immigration model. Immutable after
/// construction by convention; all library functions take it by const&.
struct LatticeModel {
  std::vector<std::string> sites;
  Vector h;
  MotionGenerator motion;
  BranchingMechanism branching;
  ImmigrationMechanism immigration;

  std::size_t dim() const { return static_cast<std::size_t>(h.size()); }
};

struct ConditionResult {
  std::string name;
  double constant = 0.0;
  bool holds = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ConditionResult> conditions;
  std::vector<std::string> errors;
  /// int_{<h,nu> > 1} <h,nu> H2(dnu) and the log-moment analogue.
  double h2_first_moment = 0.0;
  double h2_log_moment = 0.0;
  bool h2_first_moment_finite = true;
  bool h2_log_moment_finite = true;

  bool valid() const;
  const ConditionResult* find(const std::string& name) const;
};

/// Structural checks (sizes, signs, profiles) plus the minimal constants of
/// the bounded-rate, weight-excessivity, transfer, jump-moment and
/// immigration-integrability conditions. Never throws for an invalid model;
/// inspect `valid()`.
ValidationReport validate_model(const LatticeModel& model);

/// Throws ValidationError carrying the first failure if the model is invalid.
void ensure_valid(const LatticeModel& model);

/// Single-site CBI: phi(l) = b l + c l^2, psi(l) = beta l.
LatticeModel preset_cbi(double b, double c, double beta);

/// Local compensated jumps plus nonlocal offspring placement.
struct Kp18Params {
  Vector b, c, g, d;
  Matrix pi; // row x is the placement law pi_x, pi(x,x) must be 0
  /// Per-site local jump measure G0(x, .) = intensity * law (compensated).
  std::vector<std::optional<std::pair<double, JumpSizeLaw>>> g0;
  /// Per-site offspring-size measure G1(x, .) = intensity * law.
  std::vector<std::optional<std::pair<double, JumpSizeLaw>>> g1;
  Vector beta;
  std::vector<JumpChannel> h2_channels;
};
LatticeModel preset_kp18(const Kp18Params& params);

/// Random walk on a cycle of d sites with local branching and immigration.
struct RandomWalkParams {
  std::size_t d = 1;
  double left_rate = 0.0;
  double right_rate = 0.0;
  double b = 0.0;
  double c = 0.0;
  Vector beta;
  std::vector<JumpChannel> h2_channels;
};
LatticeModel preset_random_walk(const RandomWalkParams& params);

/// Equivalent model with h == 1. If U is its cumulant semigroup then
/// V_t f = h * U_t(f / h).
LatticeModel h_transform(const LatticeModel& model);

std::vector<std::string> default_site_names(std::size_t d);

} // namespace superbranch

#endif

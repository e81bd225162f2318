#ifndef SUPERBRANCH_SIZE_LAW_HPP
#define SUPERBRANCH_SIZE_LAW_HPP

#include "superbranch/core.hpp"

#include <random>
#include <variant>
#include <vector>

namespace superbranch {

/// e^x - 1 - x without cancellation near zero.
double exp_remainder(double x);
/// y - log(1 + y) without cancellation near zero.
double log1p_remainder(double y);

/// Finite measure on (0, inf) describing jump sizes z of a channel.
///
/// Exponential and gamma laws are probability laws. Atomic weights are
/// kept as given: their sum is the total mass of the law and multiplies
/// the channel intensity. All integrals below are exact closed forms
/// (regularized incomplete gamma functions for the truncated moments).
class JumpSizeLaw {
public:
  struct Atomic {
    std::vector<double> points;
    std::vector<double> weights;
  };
  struct Exponential {
    double rate;
  };
  struct Gamma {
    double shape;
    double rate;
  };

  static JumpSizeLaw atomic(std::vector<double> points, std::vector<double> weights);
  static JumpSizeLaw exponential(double rate);
  static JumpSizeLaw gamma(double shape, double rate);

  const std::variant<Atomic, Exponential, Gamma>& kind() const { return kind_; }
  const char* kind_name() const;

  /// Total mass of the law.
  double mass() const;
  /// First moment m1 = int z law(dz).
  double mean() const;
  /// l(u) = int (1 - e^{-z u}) law(dz).
  double laplace(double u) const;
  /// l^(u) = int (e^{-z u} - 1 + z u) law(dz).
  double compensated(double u) const;

  /// int z^n 1{z <= cut} law(dz) for n in {0, 1, 2}.
  double truncated_moment(int n, double cut) const;
  /// int z^n 1{z > cut} law(dz) for n in {0, 1}.
  double tail_moment(int n, double cut) const;

  /// int min(s z, (s z)^2) law(dz).
  double min_linear_quadratic(double s) const;
  /// int min(1, s z) law(dz).
  double min_one_linear(double s) const;
  /// int_{s z > 1} s z law(dz).
  double large_jump_first_moment(double s) const;
  /// int_{s z > 1} log(s z) law(dz).
  double large_jump_log_moment(double s) const;

  /// Draw from the normalized law.
  double sample(std::mt19937_64& rng) const;

  friend bool operator==(const JumpSizeLaw& a, const JumpSizeLaw& b);

private:
  explicit JumpSizeLaw(std::variant<Atomic, Exponential, Gamma> k) : kind_(std::move(k)) {}
  std::variant<Atomic, Exponential, Gamma> kind_;
};

bool operator==(const JumpSizeLaw::Atomic& a, const JumpSizeLaw::Atomic& b);
bool operator==(const JumpSizeLaw::Exponential& a, const JumpSizeLaw::Exponential& b);
bool operator==(const JumpSizeLaw::Gamma& a, const JumpSizeLaw::Gamma& b);

} // namespace superbranch

#endif

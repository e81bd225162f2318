#include "superbranch/size_law.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace superbranch {

double exp_remainder(double x) {
  if (std::abs(x) < 1e-2) {
    // x^2/2 + x^3/6 + ... through x^7; truncation below 1e-16 relative.
    double term = x * x / 2.0;
    double sum = term;
    for (int k = 3; k <= 8; ++k) {
      term *= x / k;
      sum += term;
    }
    return sum;
  }
  return std::expm1(x) - x;
}

double log1p_remainder(double y) {
  if (std::abs(y) < 1e-2) {
    double sum = 0.0;
    double power = y;
    for (int k = 2; k <= 9; ++k) {
      power *= -y;
      sum -= power / k;
    }
    return sum;
  }
  return y - std::log1p(y);
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// int_0^cut z^n gamma(k, theta)(dz)
double gamma_truncated(double k, double theta, int n, double cut) {
  if (cut <= 0.0) return 0.0;
  double rising = 1.0;
  for (int i = 0; i < n; ++i) rising *= (k + i);
  const double scale = rising / std::pow(theta, n);
  if (!std::isfinite(cut)) return scale;
  return scale * boost::math::gamma_p(k + n, theta * cut);
}

double gamma_tail(double k, double theta, int n, double cut) {
  double rising = 1.0;
  for (int i = 0; i < n; ++i) rising *= (k + i);
  const double scale = rising / std::pow(theta, n);
  if (cut <= 0.0) return scale;
  return scale * boost::math::gamma_q(k + n, theta * cut);
}

double gamma_log_tail(double k, double theta, double s) {
  const double cut = 1.0 / s;
  const double log_norm = k * std::log(theta) - std::lgamma(k);
  auto integrand = [&](double x) {
    const double z = cut + x;
    if (x <= 0.0) return 0.0;
    return std::log1p(x * s) * std::exp(log_norm + (k - 1.0) * std::log(z) - theta * z);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(integrand);
}

} // namespace

JumpSizeLaw JumpSizeLaw::atomic(std::vector<double> points, std::vector<double> weights) {
  if (points.empty() || points.size() != weights.size()) {
    throw ValidationError("atomic size law needs equally many (>= 1) points and weights");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i] > 0.0) || !std::isfinite(points[i])) {
      throw ValidationError("atomic size law: point " + std::to_string(i) + " must be > 0");
    }
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw ValidationError("atomic size law: weight " + std::to_string(i) + " must be > 0");
    }
  }
  return JumpSizeLaw(Atomic{std::move(points), std::move(weights)});
}

JumpSizeLaw JumpSizeLaw::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ValidationError("exponential size law: rate must be > 0");
  }
  return JumpSizeLaw(Exponential{rate});
}

JumpSizeLaw JumpSizeLaw::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !std::isfinite(shape) || !(rate > 0.0) || !std::isfinite(rate)) {
    throw ValidationError("gamma size law: shape and rate must be > 0");
  }
  return JumpSizeLaw(Gamma{shape, rate});
}

const char* JumpSizeLaw::kind_name() const {
  return std::visit(overloaded{[](const Atomic&) { return "atomic"; },
                               [](const Exponential&) { return "exponential"; },
                               [](const Gamma&) { return "gamma"; }},
                    kind_);
}

double JumpSizeLaw::mass() const {
  return std::visit(
      overloaded{[](const Atomic& a) { return std::accumulate(a.weights.begin(), a.weights.end(), 0.0); },
                 [](const Exponential&) { return 1.0; }, [](const Gamma&) { return 1.0; }},
      kind_);
}

double JumpSizeLaw::mean() const {
  return std::visit(overloaded{[](const Atomic& a) {
                                 double m = 0.0;
                                 for (std::size_t i = 0; i < a.points.size(); ++i) m += a.weights[i] * a.points[i];
                                 return m;
                               },
                               [](const Exponential& e) { return 1.0 / e.rate; },
                               [](const Gamma& g) { return g.shape / g.rate; }},
                    kind_);
}

double JumpSizeLaw::laplace(double u) const {
  return std::visit(overloaded{[u](const Atomic& a) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < a.points.size(); ++i) {
                                   s -= a.weights[i] * std::expm1(-a.points[i] * u);
                                 }
                                 return s;
                               },
                               [u](const Exponential& e) { return u / (e.rate + u); },
                               [u](const Gamma& g) {
                                 return -std::expm1(-g.shape * std::log1p(u / g.rate));
                               }},
                    kind_);
}

double JumpSizeLaw::compensated(double u) const {
  return std::visit(overloaded{[u](const Atomic& a) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < a.points.size(); ++i) {
                                   s += a.weights[i] * exp_remainder(-a.points[i] * u);
                                 }
                                 return s;
                               },
                               [u](const Exponential& e) { return u * u / (e.rate * (e.rate + u)); },
                               [u](const Gamma& g) {
                                 // (1+y)^{-k} - 1 + k y = [e^a - 1 - a] + k [y - log1p(y)], a = -k log1p(y)
                                 const double y = u / g.rate;
                                 const double a = -g.shape * std::log1p(y);
                                 return exp_remainder(a) + g.shape * log1p_remainder(y);
                               }},
                    kind_);
}

double JumpSizeLaw::truncated_moment(int n, double cut) const {
  return std::visit(overloaded{[n, cut](const Atomic& a) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < a.points.size(); ++i) {
                                   if (a.points[i] <= cut) s += a.weights[i] * std::pow(a.points[i], n);
                                 }
                                 return s;
                               },
                               [n, cut](const Exponential& e) { return gamma_truncated(1.0, e.rate, n, cut); },
                               [n, cut](const Gamma& g) { return gamma_truncated(g.shape, g.rate, n, cut); }},
                    kind_);
}

double JumpSizeLaw::tail_moment(int n, double cut) const {
  return std::visit(overloaded{[n, cut](const Atomic& a) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < a.points.size(); ++i) {
                                   if (a.points[i] > cut) s += a.weights[i] * std::pow(a.points[i], n);
                                 }
                                 return s;
                               },
                               [n, cut](const Exponential& e) { return gamma_tail(1.0, e.rate, n, cut); },
                               [n, cut](const Gamma& g) { return gamma_tail(g.shape, g.rate, n, cut); }},
                    kind_);
}

double JumpSizeLaw::min_linear_quadratic(double s) const {
  if (s <= 0.0) return 0.0;
  const double cut = 1.0 / s;
  return s * s * truncated_moment(2, cut) + s * tail_moment(1, cut);
}

double JumpSizeLaw::min_one_linear(double s) const {
  if (s <= 0.0) return 0.0;
  const double cut = 1.0 / s;
  return s * truncated_moment(1, cut) + tail_moment(0, cut);
}

double JumpSizeLaw::large_jump_first_moment(double s) const {
  if (s <= 0.0) return 0.0;
  return s * tail_moment(1, 1.0 / s);
}

double JumpSizeLaw::large_jump_log_moment(double s) const {
  if (s <= 0.0) return 0.0;
  return std::visit(overloaded{[s](const Atomic& a) {
                                 double sum = 0.0;
                                 for (std::size_t i = 0; i < a.points.size(); ++i) {
                                   if (s * a.points[i] > 1.0) sum += a.weights[i] * std::log(s * a.points[i]);
                                 }
                                 return sum;
                               },
                               [s](const Exponential& e) { return gamma_log_tail(1.0, e.rate, s); },
                               [s](const Gamma& g) { return gamma_log_tail(g.shape, g.rate, s); }},
                    kind_);
}

double JumpSizeLaw::sample(std::mt19937_64& rng) const {
  return std::visit(overloaded{[&rng](const Atomic& a) {
                                 if (a.points.size() == 1) return a.points.front();
                                 const double total = std::accumulate(a.weights.begin(), a.weights.end(), 0.0);
                                 double u = std::uniform_real_distribution<double>(0.0, total)(rng);
                                 for (std::size_t i = 0; i + 1 < a.points.size(); ++i) {
                                   if (u < a.weights[i]) return a.points[i];
                                   u -= a.weights[i];
                                 }
                                 return a.points.back();
                               },
                               [&rng](const Exponential& e) {
                                 return std::exponential_distribution<double>(e.rate)(rng);
                               },
                               [&rng](const Gamma& g) {
                                 return std::gamma_distribution<double>(g.shape, 1.0 / g.rate)(rng);
                               }},
                    kind_);
}

bool operator==(const JumpSizeLaw::Atomic& a, const JumpSizeLaw::Atomic& b) {
  return a.points == b.points && a.weights == b.weights;
}
bool operator==(const JumpSizeLaw::Exponential& a, const JumpSizeLaw::Exponential& b) {
  return a.rate == b.rate;
}
bool operator==(const JumpSizeLaw::Gamma& a, const JumpSizeLaw::Gamma& b) {
  return a.shape == b.shape && a.rate == b.rate;
}
bool operator==(const JumpSizeLaw& a, const JumpSizeLaw& b) { return a.kind_ == b.kind_; }

} // namespace superbranch

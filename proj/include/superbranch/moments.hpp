#ifndef SUPERBRANCH_MOMENTS_HPP
#define SUPERBRANCH_MOMENTS_HPP

#include "superbranch/mechanisms.hpp"

#include <optional>
#include <string>

namespace superbranch {

enum class CertificateMethod { lyapunov, spectral };

/// Guarantees sum_y h(y) r_t(x,y) <= C h(x) e^{-delta t} for all t >= 0.
struct DecayCertificate {
  double delta = 0.0;
  double C = 1.0;
  CertificateMethod method = CertificateMethod::lyapunov;
  /// Lyapunov: per-site slack -(Bh)(x)/h(x) - delta (all >= 0).
  Vector lyapunov_slack;
  /// Spectral: eigenvalues of B, the raw grid supremum before inflation and
  /// the grid it was taken on. C is then a numerical estimate, not a proof.
  Eigen::VectorXcd eigenvalues;
  double grid_supremum = 0.0;
  double grid_step = 0.0;
  double grid_horizon = 0.0;
  bool numerical_estimate = false;
};

const char* to_string(CertificateMethod m);

struct SubcriticalityResult {
  std::optional<DecayCertificate> certificate;
  double spectral_abscissa = 0.0;
  double lyapunov_rate = 0.0; // min_x -(Bh)(x)/h(x); may be <= 0
  std::string reason;         // set on refusal
};

/// Lyapunov route first (C = 1), spectral fallback with a gridded transient
/// constant. Never throws for a valid model; a refusal leaves `certificate`
/// empty.
SubcriticalityResult check_subcritical(const LatticeModel& model);
SubcriticalityResult check_subcritical(const LatticeModel& model, const MomentOperator& op);

/// Throws RefusalError if the model cannot be certified.
DecayCertificate require_certificate(const LatticeModel& model);

/// e^{tB}, by scaling-and-squaring Pade for d <= 64 and by integrating the
/// matrix ODE otherwise.
Matrix moment_semigroup(const MomentOperator& op, double t);

/// R_t f = e^{tB} f.
Vector apply_R(const LatticeModel& model, const VectorRef& f, double t);
Vector apply_R(const MomentOperator& op, const VectorRef& f, double t);

/// R_t^* mu = e^{tB^T} mu.
Vector apply_R_adjoint(const MomentOperator& op, const VectorRef& mu, double t);

/// h-weighted operator norm max_x sum_y |M(x,y)| h(y) / h(x).
double weighted_operator_norm(const MatrixRef& m, const VectorRef& h);

/// E[mu_t] = R_t^* mu0 + int_0^t R_s^* a ds.
Vector transition_mean(const LatticeModel& model, const VectorRef& mu0, double t);

/// int_0^inf R_s^* a ds = (-B^T)^{-1} a. Requires a decay certificate.
Vector invariant_mean(const LatticeModel& model);

} // namespace superbranch

#endif

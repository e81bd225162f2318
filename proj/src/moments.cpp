#include "superbranch/moments.hpp"

#include "superbranch/ode.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace superbranch {

namespace {

constexpr Eigen::Index kPadeMaxDim = 64;

double abscissa_tolerance(const MomentOperator& op) {
  return 1e-10 * std::max(1.0, op.B.cwiseAbs().rowwise().sum().maxCoeff());
}

void clamp_roundoff(Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) v[i] = 0.0;
  }
}

} // namespace

const char* to_string(CertificateMethod m) {
  return m == CertificateMethod::lyapunov ? "lyapunov" : "spectral";
}

Matrix moment_semigroup(const MomentOperator& op, double t) {
  const auto d = op.B.rows();
  if (t == 0.0) return Matrix::Identity(d, d);
  if (d <= kPadeMaxDim) return Matrix(op.B * t).exp();
  // Column-stacked matrix ODE M' = B M.
  const Matrix& B = op.B;
  const Matrix id = Matrix::Identity(d, d);
  Vector y = Eigen::Map<const Vector>(id.data(), d * d);
  OdeOptions<double> opt;
  opt.atol = 1e-14;
  opt.rtol = 1e-12;
  auto rhs = [&](double, const Vector& s) {
    Eigen::Map<const Matrix> m(s.data(), d, d);
    Matrix dm = B * m;
    return Vector(Eigen::Map<const Vector>(dm.data(), d * d));
  };
  integrate_dopri5<double>(rhs, 0.0, y, t, opt, [](const DenseStep<double>&, Vector&) { return false; });
  return Eigen::Map<const Matrix>(y.data(), d, d);
}

Vector apply_R(const MomentOperator& op, const VectorRef& f, double t) {
  if (t < 0.0) throw DomainError("apply_R: t must be >= 0");
  if (f.size() != op.B.rows()) throw DomainError("apply_R: vector size mismatch");
  if (t == 0.0) return f;
  return moment_semigroup(op, t) * f;
}

Vector apply_R(const LatticeModel& model, const VectorRef& f, double t) {
  return apply_R(assemble_moment_operator(model), f, t);
}

Vector apply_R_adjoint(const MomentOperator& op, const VectorRef& mu, double t) {
  if (t < 0.0) throw DomainError("apply_R_adjoint: t must be >= 0");
  if (mu.size() != op.B.rows()) throw DomainError("apply_R_adjoint: vector size mismatch");
  if (t == 0.0) return mu;
  return moment_semigroup(op, t).transpose() * mu;
}

double weighted_operator_norm(const MatrixRef& m, const VectorRef& h) {
  const Matrix scaled = h.cwiseInverse().asDiagonal() * m.cwiseAbs() * h.asDiagonal();
  return scaled.rowwise().sum().maxCoeff();
}

SubcriticalityResult check_subcritical(const LatticeModel& model) {
  return check_subcritical(model, assemble_moment_operator(model));
}

SubcriticalityResult check_subcritical(const LatticeModel& model, const MomentOperator& op) {
  SubcriticalityResult result;
  result.spectral_abscissa = op.spectral_abscissa;
  const Vector& h = model.h;
  const Vector rate = (-(op.B * h)).cwiseQuotient(h);
  result.lyapunov_rate = rate.minCoeff() + 0.0; // no -0

  if (result.lyapunov_rate > 0.0) {
    DecayCertificate cert;
    cert.delta = result.lyapunov_rate;
    cert.C = 1.0;
    cert.method = CertificateMethod::lyapunov;
    cert.lyapunov_slack = rate.array() - cert.delta;
    cert.eigenvalues = op.eigenvalues;
    result.certificate = std::move(cert);
    return result;
  }

  const double alpha = op.spectral_abscissa;
  if (alpha >= -abscissa_tolerance(op)) {
    std::ostringstream msg;
    msg << "not subcritical: spectral abscissa " << alpha << " >= 0";
    result.reason = msg.str();
    return result;
  }

  // Transient bound sup_t ||e^{tB}||_h e^{delta t} with delta = 0.95 |alpha|,
  // sampled on a uniform grid until the envelope has decayed.
  const double delta = 0.95 * (-alpha);
  const double gap = -alpha - delta;
  const double norm_b = op.B.cwiseAbs().rowwise().sum().maxCoeff();
  const double step = std::min(0.01, 0.1 / std::max(norm_b, 1e-12));
  const double horizon = std::max(50.0, 40.0 / gap);
  const long steps = std::min<long>(static_cast<long>(std::ceil(horizon / step)), 2'000'000);
  // Powers of e^{step (B + delta)} carry the e^{delta t} weight directly,
  // so neither factor overflows or underflows on long horizons.
  const Matrix one_step = moment_semigroup(op, step) * std::exp(delta * step);
  Matrix m = Matrix::Identity(op.B.rows(), op.B.cols());
  double sup = 1.0;
  for (long k = 1; k <= steps; ++k) {
    m = m * one_step;
    const double value = weighted_operator_norm(m, h);
    if (!std::isfinite(value)) {
      sup = value;
      break;
    }
    sup = std::max(sup, value);
  }
  if (!std::isfinite(sup)) {
    result.reason = "transient bound overflowed";
    return result;
  }
  DecayCertificate cert;
  cert.delta = delta;
  cert.C = 1.1 * sup;
  cert.method = CertificateMethod::spectral;
  cert.eigenvalues = op.eigenvalues;
  cert.grid_supremum = sup;
  cert.grid_step = step;
  cert.grid_horizon = step * static_cast<double>(steps);
  cert.numerical_estimate = true;
  result.certificate = std::move(cert);
  return result;
}

DecayCertificate require_certificate(const LatticeModel& model) {
  auto result = check_subcritical(model);
  if (!result.certificate) throw RefusalError(result.reason);
  return *result.certificate;
}

Vector transition_mean(const LatticeModel& model, const VectorRef& mu0, double t) {
  require_nonnegative(mu0, "transition_mean: mu0");
  if (t < 0.0) throw DomainError("transition_mean: t must be >= 0");
  const auto op = assemble_moment_operator(model);
  const Vector a = effective_immigration_mean(model);
  const auto d = op.B.rows();
  if (mu0.size() != d) throw DomainError("transition_mean: mu0 size mismatch");
  if (t == 0.0) return mu0;

  const Matrix bt = op.B.transpose();
  const Matrix et = moment_semigroup(op, t).transpose();
  Vector mean = et * mu0;
  Eigen::FullPivLU<Matrix> lu(bt);
  if (lu.isInvertible() && lu.rcond() > 1e-12) {
    mean += lu.solve((et - Matrix::Identity(d, d)) * a);
  } else {
    // [[B^T, a], [0, 0]] exponentiates to [[e^{tB^T}, int_0^t e^{sB^T} a ds], [0, 1]].
    Matrix aug = Matrix::Zero(d + 1, d + 1);
    aug.topLeftCorner(d, d) = bt * t;
    aug.topRightCorner(d, 1) = a * t;
    const Matrix e = aug.exp();
    mean += e.topRightCorner(d, 1);
  }
  clamp_roundoff(mean);
  return mean;
}

Vector invariant_mean(const LatticeModel& model) {
  const auto op = assemble_moment_operator(model);
  const auto sub = check_subcritical(model, op);
  if (!sub.certificate) {
    std::ostringstream msg;
    msg << "invariant_mean: B is not certified Hurwitz (spectral abscissa " << sub.spectral_abscissa << ")";
    throw RefusalError(msg.str());
  }
  const Vector a = effective_immigration_mean(model);
  Vector m = (-op.B.transpose()).fullPivLu().solve(a);
  clamp_roundoff(m);
  return m;
}

} // namespace superbranch

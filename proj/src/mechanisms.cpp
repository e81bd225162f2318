#include "superbranch/mechanisms.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace superbranch {

namespace {

// Contribution of one branching channel to phi(site, f).
double channel_phi(const JumpChannel& ch, const VectorRef& f) {
  const double u = ch.profile.dot(f);
  return ch.compensated ? ch.intensity * ch.size.compensated(u) : -ch.intensity * ch.size.laplace(u);
}

} // namespace

double eval_phi(const LatticeModel& model, std::size_t x, const VectorRef& f) {
  require_nonnegative(f, "eval_phi");
  if (static_cast<Eigen::Index>(model.dim()) != f.size() || x >= model.dim()) {
    throw DomainError("eval_phi: site or vector size mismatch");
  }
  const auto i = static_cast<Eigen::Index>(x);
  const auto& br = model.branching;
  double value = br.c[i] * f[i] * f[i] + br.b[i] * f[i] - br.eta.row(i).dot(f);
  for (const auto& ch : br.h1_channels) {
    if (ch.site == x) value += channel_phi(ch, f);
  }
  return value;
}

Vector eval_phi_all(const LatticeModel& model, const VectorRef& f) {
  require_nonnegative(f, "eval_phi");
  const auto& br = model.branching;
  Vector value = br.c.cwiseProduct(f.cwiseAbs2()) + br.b.cwiseProduct(f) - br.eta * f;
  for (const auto& ch : br.h1_channels) value[static_cast<Eigen::Index>(ch.site)] += channel_phi(ch, f);
  return value;
}

double eval_psi(const LatticeModel& model, const VectorRef& f) {
  require_nonnegative(f, "eval_psi");
  double value = model.immigration.beta.dot(f);
  for (const auto& ch : model.immigration.h2_channels) value += ch.intensity * ch.size.laplace(ch.profile.dot(f));
  return value;
}

Vector cumulant_rhs(const LatticeModel& model, const VectorRef& f) {
  const auto& br = model.branching;
  const auto& q = model.motion.q;
  Vector out = q * f - q.rowwise().sum().cwiseProduct(f);
  out -= br.c.cwiseProduct(f.cwiseAbs2()) + br.b.cwiseProduct(f) - br.eta * f;
  for (const auto& ch : br.h1_channels) out[static_cast<Eigen::Index>(ch.site)] -= channel_phi(ch, f);
  return out;
}

double spectral_abscissa(const MatrixRef& m) {
  Eigen::EigenSolver<Matrix> solver(m, false);
  return solver.eigenvalues().real().maxCoeff();
}

MomentOperator assemble_moment_operator(const LatticeModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  const auto& br = model.branching;
  MomentOperator op;
  op.gamma = br.eta;
  for (const auto& ch : br.h1_channels) {
    const auto x = static_cast<Eigen::Index>(ch.site);
    const double rate = ch.intensity * ch.size.mean();
    for (Eigen::Index y = 0; y < d; ++y) {
      // The compensated local atom does not move mass in expectation.
      if (ch.compensated && y == x) continue;
      op.gamma(x, y) += rate * ch.profile[y];
    }
  }
  const Matrix generator = model.motion.generator();
  op.B = generator + op.gamma;
  op.B.diagonal() -= br.b;
  op.b_tilde = br.b + model.motion.total_rates();
  op.gamma_tilde = model.motion.q + op.gamma;
  Eigen::EigenSolver<Matrix> solver(op.B, false);
  op.eigenvalues = solver.eigenvalues();
  op.spectral_abscissa = op.eigenvalues.real().maxCoeff();
  return op;
}

Vector effective_immigration_mean(const LatticeModel& model) {
  Vector a = model.immigration.beta;
  for (std::size_t i = 0; i < model.immigration.h2_channels.size(); ++i) {
    const auto& ch = model.immigration.h2_channels[i];
    const double m1 = ch.size.mean();
    if (!std::isfinite(m1)) {
      throw RefusalError("immigration channel " + std::to_string(i) + " has no finite first moment");
    }
    a += ch.intensity * m1 * ch.profile;
  }
  return a;
}

} // namespace superbranch

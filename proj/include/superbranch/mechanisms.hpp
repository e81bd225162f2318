#ifndef SUPERBRANCH_MECHANISMS_HPP
#define SUPERBRANCH_MECHANISMS_HPP

#include "superbranch/model.hpp"

#include <optional>

namespace superbranch {

/// phi(x, f) for a single site.
double eval_phi(const LatticeModel& model, std::size_t x, const VectorRef& f);

/// phi(., f) for all sites at once.
Vector eval_phi_all(const LatticeModel& model, const VectorRef& f);

/// psi(f).
double eval_psi(const LatticeModel& model, const VectorRef& f);

/// Right-hand side of the cumulant equation, A f - phi(., f). Inputs are not
/// sign-checked so the integrator can call it on trial stages.
Vector cumulant_rhs(const LatticeModel& model, const VectorRef& f);

/// First-moment generator B = Q + Gamma - diag(b).
struct MomentOperator {
  Matrix B;
  Vector b_tilde;     // b(x) + sum_y q(x,y)
  Matrix gamma_tilde; // q(x,y) + gamma(x,y) off the diagonal, gamma(x,x) on it
  Matrix gamma;       // eta plus mean branching-jump placement
  double spectral_abscissa = 0.0;
  Eigen::VectorXcd eigenvalues;
};

MomentOperator assemble_moment_operator(const LatticeModel& model);

/// a = beta + int nu H2(dnu). Throws RefusalError if an immigration channel
/// lacks a finite first moment.
Vector effective_immigration_mean(const LatticeModel& model);

/// Max real part of the eigenvalues of a square matrix.
double spectral_abscissa(const MatrixRef& m);

} // namespace superbranch

#endif

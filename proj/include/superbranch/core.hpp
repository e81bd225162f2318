#ifndef SUPERBRANCH_CORE_HPP
#define SUPERBRANCH_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace superbranch {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;

/// Base of every library error. Each subclass maps to one CLI exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A function argument outside its mathematical domain (negative test
/// function, off-grid time, mismatched sizes).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Model or configuration failed validation.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A numerical precondition such as subcriticality is not met. Refusal is a
/// normal outcome, not a bug.
class RefusalError : public Error {
public:
  using Error::Error;
};

/// ODE or simulation failure (step underflow, blow-up, clamp budget).
class SolverError : public Error {
public:
  using Error::Error;
};

/// File system or serialization failure.
class IoError : public Error {
public:
  using Error::Error;
};

/// Weighted sup norm ||f||_h = max_x |f(x)| / h(x).
template <typename DerivedF, typename DerivedH>
typename DerivedF::Scalar weighted_sup_norm(const Eigen::MatrixBase<DerivedF>& f,
                                            const Eigen::MatrixBase<DerivedH>& h) {
  return (f.array().abs() / h.array()).maxCoeff();
}

/// Weighted total variation sum_x h(x) |mu(x) - nu(x)|.
template <typename DerivedA, typename DerivedB, typename DerivedH>
typename DerivedA::Scalar weighted_tv(const Eigen::MatrixBase<DerivedA>& mu,
                                      const Eigen::MatrixBase<DerivedB>& nu,
                                      const Eigen::MatrixBase<DerivedH>& h) {
  return (h.array() * (mu - nu).array().abs()).sum();
}

inline void require_nonnegative(const VectorRef& f, const char* what) {
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (!(f[i] >= 0.0) || !std::isfinite(f[i])) {
      throw DomainError(std::string(what) + ": entry " + std::to_string(i) +
                        " must be finite and nonnegative");
    }
  }
}

} // namespace superbranch

#endif

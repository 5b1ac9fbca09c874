#pragma once

// Dense complex linear algebra used by the rate, MMSE and transform code.
// All matrices here are tiny (receive-antenna sized), so everything is a
// direct factorization.

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "pctl/errors.hpp"

namespace pctl {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

template <class Derived>
inline bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// A Hermitian positive-definite matrix with its Cholesky factor cached.
///
/// Construction symmetrizes (A + A^H)/2. A relative asymmetry above 1e-8 is
/// rejected, anything smaller is repaired silently.
class HermitianPD {
 public:
  static constexpr double kSymmetryTol = 1e-8;

  explicit HermitianPD(ComplexMatrix a) {
    if (a.rows() < 1 || a.rows() != a.cols()) {
      throw DimensionError("HermitianPD: matrix must be square and non-empty");
    }
    if (!a.allFinite()) {
      throw DomainError("HermitianPD: non-finite entry");
    }
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    const double asym = (a - a.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale) {
      throw DomainError("HermitianPD: matrix is not Hermitian (deviation " +
                        std::to_string(asym / scale) + ")");
    }
    mat_ = (a + a.adjoint()) * 0.5;
    llt_.compute(mat_);
    if (llt_.info() != Eigen::Success) {
      throw DomainError("HermitianPD: matrix is not positive definite");
    }
  }

  Eigen::Index dim() const noexcept { return mat_.rows(); }
  const ComplexMatrix& matrix() const noexcept { return mat_; }
  const Eigen::LLT<ComplexMatrix>& llt() const noexcept { return llt_; }

 private:
  ComplexMatrix mat_;
  Eigen::LLT<ComplexMatrix> llt_;
};

/// Solves A x = b through the cached Cholesky factor.
inline ComplexVector pd_solve(const HermitianPD& a, const ComplexVector& b) {
  if (b.size() != a.dim()) {
    throw DimensionError("pd_solve: rhs has length " + std::to_string(b.size()) +
                         ", matrix is " + std::to_string(a.dim()));
  }
  if (!b.allFinite()) {
    throw DomainError("pd_solve: non-finite right-hand side");
  }
  return a.llt().solve(b);
}

/// Re(x^H A x). The imaginary part must be negligible.
inline double quad_form(const ComplexVector& x, const HermitianPD& a) {
  if (x.size() != a.dim()) {
    throw DimensionError("quad_form: vector has length " + std::to_string(x.size()) +
                         ", matrix is " + std::to_string(a.dim()));
  }
  const cplx q = x.dot(a.matrix() * x);  // Eigen's dot conjugates the left operand
  const double re = q.real();
  // Rounding floor: a few ulps of |A| |x|^2.
  const double floor = 1e-14 * a.matrix().cwiseAbs().maxCoeff() * x.squaredNorm();
  if (std::abs(q.imag()) > 1e-10 * std::abs(re) + floor) {
    throw DomainError("quad_form: non-negligible imaginary part");
  }
  return std::max(re, 0.0);
}

}  // namespace pctl

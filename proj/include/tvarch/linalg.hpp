#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "tvarch/error.hpp"

namespace tvarch {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Reciprocal-condition gate shared by every symmetric solve.
inline constexpr double kMinReciprocalCondition = 1e-12;

/// Cholesky factorization of a symmetric positive-definite matrix, or
/// nothing when the matrix is indefinite or its estimated reciprocal
/// condition number falls below the gate. A 0x0 matrix is accepted.
inline std::optional<Eigen::LLT<Matrix>> spd_factor(const Matrix& a) {
  if (a.rows() == 0) return Eigen::LLT<Matrix>(a);
  if (!a.allFinite()) return std::nullopt;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const double rc = llt.rcond();
  if (!(rc >= kMinReciprocalCondition)) return std::nullopt;
  return llt;
}

/// Reciprocal condition estimate (1-norm), 0 for indefinite input.
inline double reciprocal_condition(const Matrix& a) {
  if (a.rows() == 0) return 1.0;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return 0.0;
  return llt.rcond();
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Symmetric inverse square root via the eigendecomposition.
inline Matrix inverse_sqrt_spd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(a));
  if (eig.info() != Eigen::Success) throw SingularCovariance("eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();
  if (ev.size() > 0 && !(ev.minCoeff() > kMinReciprocalCondition * ev.maxCoeff())) {
    throw SingularCovariance("covariance matrix is not positive definite");
  }
  return eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

/// Symmetric square root of a positive semidefinite matrix.
inline Matrix sqrt_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(a));
  const Vector ev = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace tvarch

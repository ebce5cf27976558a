#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qsme {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Column-stacking vectorization, vec(X)(i + j*rows) = X(i, j).
inline CVector vec(const Matrix& x) {
  return Eigen::Map<const CVector>(x.data(), x.size());
}

inline Matrix unvec(const CVector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// (X + X*)/2.
inline Matrix hermitize(const Matrix& x) { return 0.5 * (x + x.adjoint()); }

inline double max_abs(const Matrix& x) { return x.cwiseAbs().maxCoeff(); }

/// Entrywise distance from Hermiticity, max |X - X*|.
inline double hermiticity_defect(const Matrix& x) { return max_abs(x - x.adjoint()); }

inline bool all_finite(const Matrix& x) { return x.allFinite(); }

inline double min_eigenvalue_hermitian(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue_hermitian(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace qsme

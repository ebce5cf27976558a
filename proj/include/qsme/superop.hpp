#pragma once

#include <functional>

#include "qsme/maps.hpp"

namespace qsme {

/// d^2 x d^2 matrix acting on column-stacked vectorizations of d x d
/// matrices, so that vec(A X B) = (B^T kron A) vec(X).
struct Superoperator {
  Matrix mat;

  Eigen::Index matrix_dim() const;
  Matrix apply(const Matrix& x) const;
  /// Adjoint with respect to the Hilbert-Schmidt inner product tr(A* B).
  Superoperator adjoint() const { return {mat.adjoint()}; }
};

/// Builds the matrix representation of a linear map on d x d matrices by
/// applying it to every matrix unit.
Superoperator superop_matrix(const std::function<Matrix(const Matrix&)>& map,
                             Eigen::Index d);

Superoperator lindblad_superop(const SmeModel& model);

/// Restriction of the generator to the target block:
///   L_S(x) = -i[H_S, x] + sum_j (C_{j,S} x C_{j,S}* - 1/2 {C_{j,S}* C_{j,S}, x}).
Matrix apply_reduced_s(const ModelBlocks& blocks, const Matrix& rho_s);

/// Reduced generator on the complement block:
///   L_R(x) = -i[H_R, x] + sum_j (C_{j,R} x C_{j,R}*
///            - 1/2 {C_{j,P}* C_{j,P} + C_{j,R}* C_{j,R}, x}).
/// Trace-nonincreasing on positive inputs; the deficit is
/// sum_j tr(C_{j,P}* C_{j,P} x).
Matrix apply_reduced_r(const ModelBlocks& blocks, const Matrix& rho_r);

struct ReducedGenerators {
  Superoperator l_s;  // dim_s^2 x dim_s^2
  Superoperator l_r;  // dim_r^2 x dim_r^2
};

ReducedGenerators reduced_generators(const SmeModel& model, const SubspaceSplit& split);

/// Mean (averaged) evolution exp(t L) applied to rho0, via the matrix
/// exponential of the vectorized generator.
DensityMatrix mean_evolve(const SmeModel& model, const DensityMatrix& rho0, double t);

}  // namespace qsme

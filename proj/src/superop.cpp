#include "qsme/superop.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "qsme/errors.hpp"

namespace qsme {

Eigen::Index Superoperator::matrix_dim() const {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(double(mat.rows()))));
  return d;
}

Matrix Superoperator::apply(const Matrix& x) const {
  const Eigen::Index d = matrix_dim();
  if (x.rows() != d || x.cols() != d)
    throw ValidationError("superoperator: operand dimension mismatch");
  return unvec(mat * vec(x), d, d);
}

Superoperator superop_matrix(const std::function<Matrix(const Matrix&)>& map,
                             Eigen::Index d) {
  Matrix rep(d * d, d * d);
  Matrix unit = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      unit(i, j) = 1.0;
      rep.col(j * d + i) = vec(map(unit));
      unit(i, j) = 0.0;
    }
  }
  return {std::move(rep)};
}

Superoperator lindblad_superop(const SmeModel& model) {
  return superop_matrix([&](const Matrix& x) { return lindblad(model, x); }, model.dim());
}

Matrix apply_reduced_s(const ModelBlocks& blocks, const Matrix& rho_s) {
  Matrix out = Complex(0, -1) * (blocks.h.s * rho_s - rho_s * blocks.h.s);
  for (const BlockDecomposition& c : blocks.channel) {
    const Matrix cc = c.s.adjoint() * c.s;
    out += c.s * rho_s * c.s.adjoint() - 0.5 * (cc * rho_s + rho_s * cc);
  }
  return out;
}

Matrix apply_reduced_r(const ModelBlocks& blocks, const Matrix& rho_r) {
  Matrix out = Complex(0, -1) * (blocks.h.r * rho_r - rho_r * blocks.h.r);
  for (const BlockDecomposition& c : blocks.channel) {
    const Matrix cc = c.p.adjoint() * c.p + c.r.adjoint() * c.r;
    out += c.r * rho_r * c.r.adjoint() - 0.5 * (cc * rho_r + rho_r * cc);
  }
  return out;
}

ReducedGenerators reduced_generators(const SmeModel& model, const SubspaceSplit& split) {
  const ModelBlocks blocks = decompose_model(model, split);
  ReducedGenerators out;
  out.l_s = superop_matrix([&](const Matrix& x) { return apply_reduced_s(blocks, x); },
                           split.dim_s);
  out.l_r = superop_matrix([&](const Matrix& x) { return apply_reduced_r(blocks, x); },
                           split.dim_r());
  return out;
}

DensityMatrix mean_evolve(const SmeModel& model, const DensityMatrix& rho0, double t) {
  if (t < 0) throw ValidationError("mean_evolve: negative time");
  if (rho0.dim() != model.dim()) throw ValidationError("mean_evolve: dimension mismatch");
  if (t == 0) return rho0;
  const Superoperator l = lindblad_superop(model);
  const Matrix propagator = (t * l.mat).exp();
  Matrix evolved = unvec(propagator * vec(rho0.mat()), model.dim(), model.dim());
  evolved = hermitize(evolved);
  return DensityMatrix::from_matrix(std::move(evolved));
}

}  // namespace qsme

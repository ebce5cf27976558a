#include "qsme/model.hpp"

#include <algorithm>
#include <sstream>

#include "qsme/errors.hpp"

namespace qsme {

std::vector<std::size_t> SmeModel::diffusive_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].kind == ChannelKind::Diffusive) out.push_back(i);
  return out;
}

std::vector<std::size_t> SmeModel::jump_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].kind == ChannelKind::Jump) out.push_back(i);
  return out;
}

SmeModel make_model(Matrix hamiltonian, std::vector<Channel> channels) {
  const Eigen::Index d = hamiltonian.rows();
  if (d == 0 || hamiltonian.cols() != d)
    throw ValidationError("Hamiltonian must be square and non-empty");
  if (!all_finite(hamiltonian)) throw ValidationError("Hamiltonian has non-finite entries");
  if (hermiticity_defect(hamiltonian) > kModelHermTol) {
    std::ostringstream msg;
    msg << "Hamiltonian is not Hermitian (defect " << hermiticity_defect(hamiltonian) << ")";
    throw ValidationError(msg.str());
  }
  if (channels.empty()) throw ValidationError("model needs at least one channel");
  for (const Channel& c : channels) {
    if (c.op.rows() != d || c.op.cols() != d)
      throw ValidationError("channel operator dimension mismatch");
    if (!all_finite(c.op)) throw ValidationError("channel operator has non-finite entries");
  }
  // Diffusive channels first, preserving relative order within each kind.
  std::stable_sort(channels.begin(), channels.end(), [](const Channel& a, const Channel& b) {
    return a.kind == ChannelKind::Diffusive && b.kind == ChannelKind::Jump;
  });
  return SmeModel{std::move(hamiltonian), std::move(channels)};
}

Matrix SubspaceSplit::projector_s() const {
  Matrix d = Matrix::Zero(dim, dim);
  d.topLeftCorner(dim_s, dim_s).setIdentity();
  return basis * d * basis.adjoint();
}

Matrix SubspaceSplit::projector_r() const {
  return Matrix::Identity(dim, dim) - projector_s();
}

bool SubspaceSplit::is_standard_basis() const {
  return (basis - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff() == 0.0;
}

SubspaceSplit make_split(Eigen::Index dim, Eigen::Index dim_s, Matrix basis) {
  if (dim < 2) throw ValidationError("split needs dim >= 2");
  if (dim_s < 1 || dim_s >= dim)
    throw ValidationError("d_S must lie in [1, d-1]");
  if (basis.rows() != dim || basis.cols() != dim)
    throw ValidationError("basis dimension mismatch");
  const double defect =
      max_abs(basis.adjoint() * basis - Matrix::Identity(dim, dim));
  if (defect > kUnitaryTol) {
    std::ostringstream msg;
    msg << "basis is not unitary (defect " << defect << ")";
    throw ValidationError(msg.str());
  }
  return SubspaceSplit{dim, dim_s, std::move(basis)};
}

SubspaceSplit make_standard_split(Eigen::Index dim, Eigen::Index dim_s) {
  return make_split(dim, dim_s, Matrix::Identity(dim, dim));
}

BlockDecomposition block_decompose(const Matrix& x, const SubspaceSplit& split) {
  if (x.rows() != split.dim || x.cols() != split.dim)
    throw ValidationError("block_decompose: operator dimension mismatch");
  const Eigen::Index ds = split.dim_s, dr = split.dim_r();
  Matrix y = split.is_standard_basis() ? x : Matrix(split.basis.adjoint() * x * split.basis);
  return BlockDecomposition{y.topLeftCorner(ds, ds), y.topRightCorner(ds, dr),
                            y.bottomLeftCorner(dr, ds), y.bottomRightCorner(dr, dr)};
}

Matrix block_assemble(const BlockDecomposition& blocks) {
  const Eigen::Index ds = blocks.s.rows(), dr = blocks.r.rows();
  Matrix x(ds + dr, ds + dr);
  x.topLeftCorner(ds, ds) = blocks.s;
  x.topRightCorner(ds, dr) = blocks.p;
  x.bottomLeftCorner(dr, ds) = blocks.q;
  x.bottomRightCorner(dr, dr) = blocks.r;
  return x;
}

std::pair<SmeModel, SubspaceSplit> to_adapted_basis(const SmeModel& model,
                                                    const SubspaceSplit& split) {
  if (split.is_standard_basis()) return {model, split};
  const Matrix& u = split.basis;
  SmeModel rotated = model;
  rotated.hamiltonian = hermitize(u.adjoint() * model.hamiltonian * u);
  for (Channel& c : rotated.channels) c.op = u.adjoint() * c.op * u;
  return {std::move(rotated), make_standard_split(split.dim, split.dim_s)};
}

DensityMatrix DensityMatrix::from_matrix(Matrix m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ValidationError("density matrix must be square");
  if (!all_finite(m)) throw ValidationError("density matrix has non-finite entries");
  if (hermiticity_defect(m) > kHermTol)
    throw ValidationError("density matrix is not Hermitian within tolerance");
  if (std::abs(m.trace().real() - 1.0) > kTraceTol || std::abs(m.trace().imag()) > kTraceTol)
    throw ValidationError("density matrix trace differs from one");
  if (min_eigenvalue_hermitian(hermitize(m)) < -kPsdTol)
    throw ValidationError("density matrix has a negative eigenvalue");
  return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::maximally_mixed(Eigen::Index dim) {
  return DensityMatrix(Matrix::Identity(dim, dim) / static_cast<double>(dim));
}

double subspace_leakage(const Matrix& rho, const SubspaceSplit& split) {
  if (split.is_standard_basis())
    return rho.bottomRightCorner(split.dim_r(), split.dim_r()).trace().real();
  return (split.projector_r() * rho).trace().real();
}

}  // namespace qsme

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "qsme/matrix_ops.hpp"

namespace qsme {

inline constexpr double kHermTol = 1e-10;       // DensityMatrix Hermiticity
inline constexpr double kPsdTol = 1e-10;        // DensityMatrix eigenvalue floor
inline constexpr double kTraceTol = 1e-10;      // DensityMatrix trace
inline constexpr double kModelHermTol = 1e-12;  // Hamiltonian Hermiticity
inline constexpr double kUnitaryTol = 1e-12;    // adapted-basis unitarity

enum class ChannelKind { Diffusive, Jump };

struct Channel {
  Matrix op;
  ChannelKind kind = ChannelKind::Diffusive;
};

/// Hamiltonian plus measurement channels, all d x d. Channels are kept
/// diffusive-first so indices follow the usual 0..p / p+1..n convention, but
/// the kind tag is always authoritative.
struct SmeModel {
  Matrix hamiltonian;
  std::vector<Channel> channels;

  Eigen::Index dim() const { return hamiltonian.rows(); }
  std::vector<std::size_t> diffusive_indices() const;
  std::vector<std::size_t> jump_indices() const;
};

/// Validates invariants (Hermitian H, matching dims, at least one channel,
/// finite entries) and normalizes the channel order to diffusive-first.
SmeModel make_model(Matrix hamiltonian, std::vector<Channel> channels);

/// Orthogonal decomposition of C^d into the target subspace (spanned by the
/// first dim_s columns of basis) and its complement.
struct SubspaceSplit {
  Eigen::Index dim = 0;
  Eigen::Index dim_s = 0;
  Matrix basis;  // d x d unitary

  Eigen::Index dim_r() const { return dim - dim_s; }
  Matrix projector_s() const;
  Matrix projector_r() const;
  bool is_standard_basis() const;
};

SubspaceSplit make_split(Eigen::Index dim, Eigen::Index dim_s, Matrix basis);
SubspaceSplit make_standard_split(Eigen::Index dim, Eigen::Index dim_s);

/// Blocks of basis* X basis partitioned at row/column dim_s:
///   [ s  p ]
///   [ q  r ]
struct BlockDecomposition {
  Matrix s, p, q, r;
};

BlockDecomposition block_decompose(const Matrix& x, const SubspaceSplit& split);

/// Reassembles the block matrix in the adapted basis (inverse of
/// block_decompose up to the basis rotation).
Matrix block_assemble(const BlockDecomposition& blocks);

/// Rotates model and split into the adapted basis, after which the split's
/// basis is the identity and block operations are plain partitions.
std::pair<SmeModel, SubspaceSplit> to_adapted_basis(const SmeModel& model,
                                                    const SubspaceSplit& split);

/// Unit-trace positive semidefinite matrix. Construction validates the
/// invariants; the wrapped matrix is immutable afterwards.
class DensityMatrix {
 public:
  static DensityMatrix from_matrix(Matrix m);
  /// Skips validation; for internal hot paths where positivity and
  /// normalization hold by construction.
  static DensityMatrix unchecked(Matrix m) { return DensityMatrix(std::move(m)); }
  static DensityMatrix maximally_mixed(Eigen::Index dim);

  const Matrix& mat() const { return mat_; }
  Eigen::Index dim() const { return mat_.rows(); }

 private:
  explicit DensityMatrix(Matrix m) : mat_(std::move(m)) {}
  Matrix mat_;
};

/// tr(P_R rho), the mass outside the target subspace.
double subspace_leakage(const Matrix& rho, const SubspaceSplit& split);

}  // namespace qsme

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "qsme/model.hpp"

namespace qsme {

/// Generator of the averaged evolution:
///   L(rho) = -i[H, rho] + sum_i (C_i rho C_i* - 1/2 {C_i* C_i, rho}).
Matrix lindblad(const SmeModel& model, const Matrix& rho);

/// Diffusive fluctuation map for channel i:
///   G_i(rho) = C_i rho + rho C_i* - tr[(C_i + C_i*) rho] rho.
/// Channel i must be diffusive.
Matrix diffusion_term(const SmeModel& model, std::size_t i, const Matrix& rho);

/// Jump map and intensity for channel i: (C_i rho C_i*, tr[C_i rho C_i*]).
/// Channel i must be a jump channel.
std::pair<Matrix, double> jump_map(const SmeModel& model, std::size_t i,
                                   const Matrix& rho);

/// Expected diffusive measurement signal, tr[(C_i + C_i*) rho], one entry per
/// diffusive channel in model order.
RVector r_vector(const SmeModel& model, const Matrix& rho);

/// Jump intensities tr[C_i rho C_i*], one entry per jump channel; negatives
/// from rounding are clamped to zero.
RVector v_vector(const SmeModel& model, const Matrix& rho);

/// Channel blocks in the adapted basis, precomputed once per (model, split).
struct ModelBlocks {
  BlockDecomposition h;
  std::vector<BlockDecomposition> channel;  // same order/kinds as the model
  std::vector<ChannelKind> kind;

  /// tr[(C_{i,R} + C_{i,R}*) rho_R] per diffusive channel.
  RVector r_vector_r(const Matrix& rho_r) const;
  /// tr[C_{i,R}* C_{i,R} rho_R] per jump channel, clamped at zero.
  RVector v_vector_r(const Matrix& rho_r) const;
};

ModelBlocks decompose_model(const SmeModel& model, const SubspaceSplit& split);

}  // namespace qsme

#include "qsme/maps.hpp"

#include <string>

#include "qsme/errors.hpp"

namespace qsme {

namespace {

const Channel& channel_at(const SmeModel& model, std::size_t i, ChannelKind want) {
  if (i >= model.channels.size()) throw ValidationError("channel index out of range");
  const Channel& c = model.channels[i];
  if (c.kind != want)
    throw ValidationError(want == ChannelKind::Diffusive
                              ? "channel is not diffusive"
                              : "channel is not a jump channel");
  return c;
}

void require_state_dim(const SmeModel& model, const Matrix& rho, const char* where) {
  if (rho.rows() != model.dim() || rho.cols() != model.dim())
    throw ValidationError(std::string(where) + ": state dimension mismatch");
}

}  // namespace

Matrix lindblad(const SmeModel& model, const Matrix& rho) {
  require_state_dim(model, rho, "lindblad");
  Matrix out = Complex(0, -1) * (model.hamiltonian * rho - rho * model.hamiltonian);
  for (const Channel& c : model.channels) {
    const Matrix crc = c.op * rho * c.op.adjoint();
    const Matrix cc = c.op.adjoint() * c.op;
    out += crc - 0.5 * (cc * rho + rho * cc);
  }
  return out;
}

Matrix diffusion_term(const SmeModel& model, std::size_t i, const Matrix& rho) {
  require_state_dim(model, rho, "diffusion_term");
  const Channel& c = channel_at(model, i, ChannelKind::Diffusive);
  const double r = ((c.op + c.op.adjoint()) * rho).trace().real();
  return c.op * rho + rho * c.op.adjoint() - r * rho;
}

std::pair<Matrix, double> jump_map(const SmeModel& model, std::size_t i,
                                   const Matrix& rho) {
  require_state_dim(model, rho, "jump_map");
  const Channel& c = channel_at(model, i, ChannelKind::Jump);
  Matrix mapped = c.op * rho * c.op.adjoint();
  const double intensity = std::max(0.0, mapped.trace().real());
  return {std::move(mapped), intensity};
}

RVector r_vector(const SmeModel& model, const Matrix& rho) {
  const auto idx = model.diffusive_indices();
  RVector out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Matrix& c = model.channels[idx[k]].op;
    out[static_cast<Eigen::Index>(k)] = ((c + c.adjoint()) * rho).trace().real();
  }
  return out;
}

RVector v_vector(const SmeModel& model, const Matrix& rho) {
  const auto idx = model.jump_indices();
  RVector out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Matrix& c = model.channels[idx[k]].op;
    out[static_cast<Eigen::Index>(k)] =
        std::max(0.0, (c * rho * c.adjoint()).trace().real());
  }
  return out;
}

RVector ModelBlocks::r_vector_r(const Matrix& rho_r) const {
  std::size_t n = 0;
  for (ChannelKind k : kind) n += (k == ChannelKind::Diffusive);
  RVector out(n);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < channel.size(); ++i) {
    if (kind[i] != ChannelKind::Diffusive) continue;
    const Matrix& cr = channel[i].r;
    out[at++] = ((cr + cr.adjoint()) * rho_r).trace().real();
  }
  return out;
}

RVector ModelBlocks::v_vector_r(const Matrix& rho_r) const {
  std::size_t n = 0;
  for (ChannelKind k : kind) n += (k == ChannelKind::Jump);
  RVector out(n);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < channel.size(); ++i) {
    if (kind[i] != ChannelKind::Jump) continue;
    const Matrix& cr = channel[i].r;
    out[at++] = std::max(0.0, (cr.adjoint() * cr * rho_r).trace().real());
  }
  return out;
}

ModelBlocks decompose_model(const SmeModel& model, const SubspaceSplit& split) {
  ModelBlocks out;
  out.h = block_decompose(model.hamiltonian, split);
  out.channel.reserve(model.channels.size());
  out.kind.reserve(model.channels.size());
  for (const Channel& c : model.channels) {
    out.channel.push_back(block_decompose(c.op, split));
    out.kind.push_back(c.kind);
  }
  return out;
}

}  // namespace qsme

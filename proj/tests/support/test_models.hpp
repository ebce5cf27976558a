#pragma once

// Shared builders for the test suites: closed-form reference models, seeded
// random model generators, and a small RK4 oracle for the mean flow.

#include <random>

#include "qsme/maps.hpp"
#include "qsme/model.hpp"
#include "qsme/stability.hpp"

namespace qsme::testing {

/// Two-level model: H = 0, C0 = [[0, l_p], [0, 0]] and C1 = diag(l_s, l_r),
/// both diffusive, target = first basis vector.
inline std::pair<SmeModel, SubspaceSplit> qubit_model(Complex l_p, Complex l_s,
                                                      Complex l_r) {
  Matrix h = Matrix::Zero(2, 2);
  Matrix c0 = Matrix::Zero(2, 2);
  c0(0, 1) = l_p;
  Matrix c1 = Matrix::Zero(2, 2);
  c1(0, 0) = l_s;
  c1(1, 1) = l_r;
  SmeModel model = make_model(h, {{c0, ChannelKind::Diffusive}, {c1, ChannelKind::Diffusive}});
  return {std::move(model), make_standard_split(2, 1)};
}

/// Three-level model: C0 = |e1><e3| diffusive, C1 = diag(1, 1, 0.5) jump,
/// H = 0, target = first basis vector. Note e2 is a dark state (nothing
/// couples it to the target), so this model is invariant and SP but not GAS.
inline std::pair<SmeModel, SubspaceSplit> three_level_model() {
  Matrix h = Matrix::Zero(3, 3);
  Matrix c0 = Matrix::Zero(3, 3);
  c0(0, 2) = 1.0;
  Matrix c1 = Matrix::Zero(3, 3);
  c1(0, 0) = 1.0;
  c1(1, 1) = 1.0;
  c1(2, 2) = 0.5;
  SmeModel model = make_model(h, {{c0, ChannelKind::Diffusive}, {c1, ChannelKind::Jump}});
  return {std::move(model), make_standard_split(3, 1)};
}

/// GAS variant of the three-level model: the diffusive channel drains both
/// complement levels (P block [1, 1]), removing the dark state.
inline std::pair<SmeModel, SubspaceSplit> three_level_gas_model() {
  Matrix h = Matrix::Zero(3, 3);
  Matrix c0 = Matrix::Zero(3, 3);
  c0(0, 1) = 1.0;
  c0(0, 2) = 1.0;
  Matrix c1 = Matrix::Zero(3, 3);
  c1(0, 0) = 1.0;
  c1(1, 1) = 1.0;
  c1(2, 2) = 0.5;
  SmeModel model = make_model(h, {{c0, ChannelKind::Diffusive}, {c1, ChannelKind::Jump}});
  return {std::move(model), make_standard_split(3, 1)};
}

inline double uniform01(std::mt19937_64& gen) {
  return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

inline double gaussian(std::mt19937_64& gen) {
  const double u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index d) {
  Matrix m(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) = Complex(gaussian(gen), gaussian(gen));
  return m;
}

inline Matrix random_hermitian(std::mt19937_64& gen, Eigen::Index d) {
  return hermitize(random_matrix(gen, d));
}

inline DensityMatrix random_density(std::mt19937_64& gen, Eigen::Index d) {
  const Matrix a = random_matrix(gen, d);
  Matrix rho = a * a.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix::from_matrix(hermitize(rho));
}

/// Generic model with no imposed structure.
inline SmeModel random_model(std::mt19937_64& gen, Eigen::Index d, int n_diffusive,
                             int n_jump) {
  std::vector<Channel> channels;
  for (int i = 0; i < n_diffusive; ++i)
    channels.push_back({random_matrix(gen, d), ChannelKind::Diffusive});
  for (int i = 0; i < n_jump; ++i)
    channels.push_back({random_matrix(gen, d), ChannelKind::Jump});
  return make_model(random_hermitian(gen, d), std::move(channels));
}

/// Upper-block-triangular channels plus the Hamiltonian coupling that makes
/// the target exactly invariant. Jump channels (when requested) get an
/// R-block bounded away from singular so SP holds.
inline std::pair<SmeModel, SubspaceSplit> random_invariant_model(std::mt19937_64& gen,
                                                                 Eigen::Index d,
                                                                 Eigen::Index d_s,
                                                                 bool with_jump) {
  const Eigen::Index dr = d - d_s;
  std::vector<Channel> channels;
  const int n_diff = 1 + static_cast<int>(gen() % 2);
  for (int i = 0; i < n_diff; ++i) {
    Matrix c = Matrix::Zero(d, d);
    c.topLeftCorner(d_s, d_s) = 0.7 * random_matrix(gen, d_s);
    for (Eigen::Index a = 0; a < d_s; ++a)
      for (Eigen::Index b = 0; b < dr; ++b)
        c(a, d_s + b) = 0.7 * Complex(gaussian(gen), gaussian(gen));
    for (Eigen::Index a = 0; a < dr; ++a)
      for (Eigen::Index b = 0; b < dr; ++b)
        c(d_s + a, d_s + b) = 0.7 * Complex(gaussian(gen), gaussian(gen));
    channels.push_back({std::move(c), ChannelKind::Diffusive});
  }
  if (with_jump) {
    Matrix c = Matrix::Zero(d, d);
    c.topLeftCorner(d_s, d_s) = 0.5 * random_matrix(gen, d_s);
    Matrix cr = 0.4 * random_matrix(gen, dr);
    cr += Matrix::Identity(dr, dr);  // keeps C_R* C_R strictly positive
    c.bottomRightCorner(dr, dr) = cr;
    channels.push_back({std::move(c), ChannelKind::Jump});
  }
  // Hamiltonian: free S/R blocks, coupling block fixed by the channels.
  Matrix h = Matrix::Zero(d, d);
  h.topLeftCorner(d_s, d_s) = random_hermitian(gen, d_s);
  h.bottomRightCorner(dr, dr) = random_hermitian(gen, dr);
  Matrix s = Matrix::Zero(d_s, dr);
  for (const Channel& c : channels)
    s += c.op.topLeftCorner(d_s, d_s).adjoint() * c.op.topRightCorner(d_s, dr);
  h.topRightCorner(d_s, dr) = Complex(0, -0.5) * s;
  h.bottomLeftCorner(dr, d_s) = h.topRightCorner(d_s, dr).adjoint();
  return {make_model(std::move(h), std::move(channels)), make_standard_split(d, d_s)};
}

/// Invariant model with alpha0 above a margin (retries deterministically).
inline std::pair<SmeModel, SubspaceSplit> random_gas_model(std::mt19937_64& gen,
                                                           Eigen::Index d,
                                                           Eigen::Index d_s,
                                                           bool with_jump = false) {
  for (;;) {
    auto [model, split] = random_invariant_model(gen, d, d_s, with_jump);
    if (alpha0(model, split) > 0.05) return {std::move(model), split};
  }
}

/// Classic fixed-step RK4 on d rho/dt = L(rho); independent of the
/// matrix-exponential path.
inline Matrix rk4_mean_evolve(const SmeModel& model, Matrix rho, double t, int n_steps) {
  const double h = t / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    const Matrix k1 = lindblad(model, rho);
    const Matrix k2 = lindblad(model, rho + 0.5 * h * k1);
    const Matrix k3 = lindblad(model, rho + 0.5 * h * k2);
    const Matrix k4 = lindblad(model, rho + h * k3);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return rho;
}

}  // namespace qsme::testing

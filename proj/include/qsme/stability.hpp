#pragma once

#include <cstdint>
#include <optional>

#include <json.hpp>

#include "qsme/superop.hpp"

namespace qsme {

inline constexpr double kStructureTol = 1e-9;  // invariance / SP default
inline constexpr double kGasTol = 1e-9;        // alpha0 > tol decides GAS
inline constexpr double kNdTol = 1e-6;         // alpha1 > tol decides ND

struct InvarianceCheck {
  bool invariant = false;
  double max_q_norm = 0.0;     // max_j ||C_{j,Q}||_F
  double coupling_norm = 0.0;  // ||i H_P - 1/2 sum_j C_{j,S}* C_{j,P}||_F
};

/// Structural invariance of the target subspace: every channel's Q block
/// vanishes and the Hamiltonian coupling is cancelled by the channels.
InvarianceCheck check_invariance(const SmeModel& model, const SubspaceSplit& split,
                                 double tol = kStructureTol);

struct SpCheck {
  bool sp = false;
  double min_eig = 0.0;  // min over jump channels of min eig(C_{j,R}* C_{j,R})
};

/// Jump channels act invertibly on the complement block.
SpCheck check_sp(const SmeModel& model, const SubspaceSplit& split,
                 double tol = kStructureTol);

/// Spectral abscissa of the reduced generator, min { -Re lambda }.
double alpha0(const SmeModel& model, const SubspaceSplit& split);

/// Global asymptotic stability of the (invariant) target subspace, decided
/// spectrally. Throws PreconditionError when the model is not invariant.
bool check_gas(const SmeModel& model, const SubspaceSplit& split);

/// Minimum eigenvalue of sum_j C_{j,P}* C_{j,P} over all channels.
double alpha0_prime(const SmeModel& model, const SubspaceSplit& split);

/// Measurement-discrimination rate between a state on H and a state on H_R:
/// zero when some jump channel cannot see rho_r, otherwise
///   1/2 ||r(rho) - r_R(rho_r)||^2
///   + sum_jump [ v_R - v + v ln(v / v_R) ],  with 0 ln 0 = 0.
double alpha_fn(const SmeModel& model, const SubspaceSplit& split,
                const DensityMatrix& rho, const DensityMatrix& rho_r);

struct OptConfig {
  int starts = 32;
  int max_iterations = 4000;     // function evaluations per local search
  std::uint64_t seed = 0x5eed;   // start #k uses seed ^ k
  // Bloch-ball grid resolution (radius, polar, azimuth) for blocks of
  // dimension two; halved-ish when both factors need a ball.
  int grid_radius = 20;
  int grid_polar = 25;
  int grid_azimuth = 20;
};

struct Alpha1Result {
  double value = 0.0;
  // argmin: a state supported on the target block, and a state on H_R
  DensityMatrix rho_star = DensityMatrix::maximally_mixed(1);
  DensityMatrix rho_r_star = DensityMatrix::maximally_mixed(1);
  bool converged = true;
  bool sp_holds = true;
  int starts = 0;
  long iterations = 0;  // total function evaluations across starts
  std::optional<double> optimizer_value;  // best multi-start local value
  std::optional<double> grid_value;       // deterministic grid value, if run
};

/// Minimum of alpha_fn over states supported on the target subspace times
/// states on the complement. Multi-start local search over unnormalized
/// factorizations, cross-checked against a deterministic grid when every
/// factor block has dimension <= 2; returns the smaller of the two routes.
/// If SP fails the minimum is zero by the definition's zero branch.
Alpha1Result alpha1(const SmeModel& model, const SubspaceSplit& split,
                    const OptConfig& cfg = {});

struct NdCheck {
  bool nd = false;
  double alpha1_value = 0.0;
};

NdCheck check_nd(const SmeModel& model, const SubspaceSplit& split,
                 const OptConfig& cfg = {});

struct LyapunovCertificate {
  Matrix k_r;             // Hermitian, min eigenvalue = 1
  double certified_rate;  // sharp rate: min eig of K^{-1/2}(-Herm L_R*(K))K^{-1/2}
  double epsilon;
  double eta;             // perturbation strength that produced the certificate
  double residual;        // max eig of Herm(L_R*(K_R)) + (alpha0 - eps) K_R
};

/// Constructs K_R >= I with L_R*(K_R) <= -(alpha0 - epsilon) K_R via the
/// Perron eigenoperator of the depolarizing-perturbed adjoint generator,
/// shrinking the perturbation geometrically until the certificate verifies.
/// epsilon defaults to alpha0 / 2 when not given.
LyapunovCertificate lyapunov_K(const SmeModel& model, const SubspaceSplit& split,
                               std::optional<double> epsilon = std::nullopt);

inline double beta0(double alpha0_value, double alpha0_prime_value, double alpha1_value) {
  return std::max(alpha0_value, alpha0_prime_value + alpha1_value);
}

/// Appends the diffusive channel l_s P_S + l_r P_R. Leaves both reduced
/// generators unchanged while shifting the measurement-discrimination rate.
SmeModel add_nd_channel(const SmeModel& model, const SubspaceSplit& split,
                        Complex l_s, Complex l_r);

struct StabilityReport {
  InvarianceCheck invariance;
  bool gas = false;
  SpCheck sp;
  NdCheck nd;
  double alpha0 = 0.0;
  double alpha0_prime = 0.0;
  double alpha1 = 0.0;
  double beta0 = 0.0;
  double epsilon = 0.0;
  Matrix k_r;
  double certified_rate = 0.0;
  double certificate_residual = 0.0;
  Alpha1Result alpha1_detail;
};

/// Full pipeline: structural checks, rates, certificate. Requires an
/// invariant GAS model (PreconditionError otherwise); CertificateError if no
/// certificate is found.
StabilityReport analyze_stability(const SmeModel& model, const SubspaceSplit& split,
                                  std::optional<double> epsilon = std::nullopt,
                                  const OptConfig& cfg = {});

nlohmann::json report_to_json(const StabilityReport& report);

}  // namespace qsme

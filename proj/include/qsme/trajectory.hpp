#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "qsme/maps.hpp"

namespace qsme {

/// Deterministic random stream: mt19937_64 engine (bit-exact per the
/// standard) with explicit bit-to-double mapping so output bytes do not
/// depend on library internals. Gaussians come from Box-Muller with a
/// one-sample cache.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // (0, 1]
  double normal(double stddev);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

struct RecordFlags {
  bool v = true;
  bool ln_v = true;
  bool full_state = false;
  bool jump_times = true;
  bool martingale_terms = false;
  bool noise = false;  // keep per-step increments (needed to replay)
};

struct SimConfig {
  double dt = 1e-4;
  double t_final = 10.0;
  std::uint64_t seed = 0;
  int n_traj = 1;
  RecordFlags record;
  double v_floor = 1e-12;
};

struct StepRecord {
  int jumped = -1;        // channel index, -1 when no jump
  RVector dw;             // one increment per diffusive channel (no-jump steps)
  RVector intensities;    // one per jump channel, evaluated pre-step
};

/// Recorded states and the final state are expressed in the caller's
/// coordinates (the basis the model and split were supplied in).
struct Trajectory {
  std::vector<double> times;
  std::vector<double> v_series;
  std::vector<double> ln_v_series;
  std::vector<double> mw_series;  // accumulated diffusive martingale
  std::vector<double> mj_series;  // accumulated compensated-jump martingale
  std::vector<std::pair<double, int>> jump_events;  // (time, channel)
  std::vector<Matrix> states;       // pre-step states, when full_state is set
  std::vector<StepRecord> steps;    // when noise is set
  DensityMatrix final_state = DensityMatrix::maximally_mixed(1);
  bool absorbed = false;
  std::uint64_t seed = 0;
};

struct Ensemble {
  std::vector<double> times;
  std::vector<double> mean_v;
  std::vector<double> stderr_v;
  int n_traj = 0;
  std::uint64_t base_seed = 0;
};

/// One positivity-preserving integrator step. Stage 1 draws a jump by
/// thinning on the total intensity; stage 2 (no jump) applies the normalized
/// Kraus update M rho M* / tr with
///   M = I + dt (-iH - 1/2 sum_i C_i* C_i) + sum_diff C_i (dW_i + r_i(rho) dt).
Matrix step(const SmeModel& model, const Matrix& rho, double dt, RngStream& rng,
            StepRecord* record = nullptr);

class Simulator {
 public:
  Simulator(const SmeModel& model, const SubspaceSplit& split);

  const SmeModel& model() const { return model_; }
  const SubspaceSplit& split() const { return split_; }

  Trajectory simulate(const DensityMatrix& rho0, const SimConfig& cfg) const;
  Ensemble ensemble(const DensityMatrix& rho0, const SimConfig& cfg) const;

 private:
  friend Matrix step(const SmeModel&, const Matrix&, double, RngStream&, StepRecord*);
  struct Workspace;
  void step_impl(const Matrix& rho, double dt, RngStream& rng, StepRecord* rec,
                 Workspace& ws) const;

  SmeModel model_;       // adapted basis
  SubspaceSplit split_;  // standard basis after adaptation
  Matrix input_basis_;   // rotates caller coordinates into the adapted frame
  bool rotated_ = false;
  ModelBlocks blocks_;
  Matrix drift_;  // -iH - 1/2 sum_i C_i* C_i
  std::vector<std::size_t> diffusive_, jumps_;
};

/// Replays the scalar recursion for ln V along a recorded trajectory (full
/// states + noise), using the same increments. Between jumps
///   d lnV = [tr(L_R rho_red) - 1/2 ||r_R - r||^2 - sum_jump (v_R - v)] dt
///           + (r_R - r) . dW,
/// and a jump on channel j adds ln(v_R / v). Errors out if V hits zero.
std::vector<double> doleans_track(const SmeModel& model, const SubspaceSplit& split,
                                  const Trajectory& traj, const DensityMatrix& rho0);

/// CSV: header t,V,lnV,jumped_channel,mw,mj; floats at 17 significant digits.
/// stride > 1 thins the output (the first and last rows are always kept).
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int stride = 1);

/// CSV: header t,mean_V,stderr_V,n.
void write_ensemble_csv(std::ostream& out, const Ensemble& ens, int stride = 1);

}  // namespace qsme

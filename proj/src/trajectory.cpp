#include "qsme/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <ostream>

#include "qsme/errors.hpp"
#include "qsme/parallel.hpp"

namespace qsme {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Ensemble reductions accumulate per fixed-size chunk and merge in chunk
// order, so results do not depend on the worker count.
constexpr std::size_t kEnsembleChunk = 16;

}  // namespace

RngStream::RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

double RngStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
}

double RngStream::normal(double stddev) {
  if (has_cached_) {
    has_cached_ = false;
    return cached_ * stddev;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  cached_ = radius * std::sin(kTwoPi * u2);
  has_cached_ = true;
  return radius * std::cos(kTwoPi * u2) * stddev;
}

struct Simulator::Workspace {
  Matrix m, tmp, out;
  explicit Workspace(Eigen::Index d) : m(d, d), tmp(d, d), out(d, d) {}
};

Simulator::Simulator(const SmeModel& model, const SubspaceSplit& split) {
  rotated_ = !split.is_standard_basis();
  input_basis_ = split.basis;
  auto [adapted_model, adapted_split] = to_adapted_basis(model, split);
  model_ = std::move(adapted_model);
  split_ = std::move(adapted_split);
  blocks_ = decompose_model(model_, split_);
  diffusive_ = model_.diffusive_indices();
  jumps_ = model_.jump_indices();
  drift_ = Complex(0, -1) * model_.hamiltonian;
  for (const Channel& c : model_.channels) drift_ -= 0.5 * (c.op.adjoint() * c.op);
}

// Leaves the post-step state in ws.out.
void Simulator::step_impl(const Matrix& rho, double dt, RngStream& rng,
                          StepRecord* rec, Workspace& ws) const {
  // Stage 1: jump thinning on the total intensity.
  if (!jumps_.empty()) {
    RVector intensities(static_cast<Eigen::Index>(jumps_.size()));
    double total = 0.0;
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
      const Matrix& c = model_.channels[jumps_[k]].op;
      ws.tmp.noalias() = c * rho;
      ws.out.noalias() = ws.tmp * c.adjoint();
      const double lambda = std::max(0.0, ws.out.trace().real());
      intensities[static_cast<Eigen::Index>(k)] = lambda;
      total += lambda;
    }
    if (rec) rec->intensities = intensities;
    const double u = rng.uniform();
    if (total > 0.0 && u <= -std::expm1(-total * dt)) {
      // Pick the jumping channel proportionally to its intensity.
      double pick = rng.uniform() * total;
      std::size_t k = 0;
      for (; k + 1 < jumps_.size(); ++k) {
        pick -= intensities[static_cast<Eigen::Index>(k)];
        if (pick <= 0.0) break;
      }
      const Matrix& c = model_.channels[jumps_[k]].op;
      ws.tmp.noalias() = c * rho;
      ws.out.noalias() = ws.tmp * c.adjoint();
      const double tr = ws.out.trace().real();
      if (!(tr > 0.0)) throw NumericError("jump applied to a state in the channel kernel");
      ws.out /= tr;
      if (rec) rec->jumped = static_cast<int>(jumps_[k]);
      ws.m = ws.out.adjoint();
      ws.out += ws.m;
      ws.out *= 0.5;
      return;
    }
  } else if (rec) {
    rec->intensities.resize(0);
  }

  // Stage 2: normalized Kraus update with the diffusive increments.
  ws.m = drift_;
  ws.m *= dt;
  ws.m.diagonal().array() += 1.0;
  if (rec) rec->dw.resize(static_cast<Eigen::Index>(diffusive_.size()));
  const double sqrt_dt = std::sqrt(dt);
  for (std::size_t k = 0; k < diffusive_.size(); ++k) {
    const Matrix& c = model_.channels[diffusive_[k]].op;
    const double r = (c * rho).trace().real() * 2.0;  // tr[(C + C*) rho], rho Hermitian
    const double dw = rng.normal(sqrt_dt);
    if (rec) rec->dw[static_cast<Eigen::Index>(k)] = dw;
    ws.m += Complex(dw + r * dt) * c;
  }
  ws.tmp.noalias() = ws.m * rho;
  ws.out.noalias() = ws.tmp * ws.m.adjoint();
  const double tr = ws.out.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr))
    throw NumericError("Kraus update produced a non-positive norm");
  ws.out /= tr;
  ws.m = ws.out.adjoint();
  ws.out += ws.m;
  ws.out *= 0.5;
}

Matrix step(const SmeModel& model, const Matrix& rho, double dt, RngStream& rng,
            StepRecord* record) {
  if (!(dt > 0)) throw ValidationError("step: dt must be positive");
  if (rho.rows() != model.dim() || rho.cols() != model.dim())
    throw ValidationError("step: state dimension mismatch");
  // The split only matters for recording, not for the update itself.
  Simulator sim(model, make_standard_split(model.dim(), 1));
  Simulator::Workspace ws(model.dim());
  sim.step_impl(rho, dt, rng, record, ws);
  return ws.out;
}

namespace {

void validate_config(const SimConfig& cfg) {
  if (!(cfg.dt > 0)) throw ValidationError("dt must be positive");
  if (cfg.t_final < 0) throw ValidationError("t_final must be nonnegative");
  if (cfg.t_final > 0 && cfg.dt > cfg.t_final)
    throw ValidationError("dt must not exceed t_final");
  if (cfg.n_traj < 1) throw ValidationError("n_traj must be positive");
  if (cfg.v_floor < 0) throw ValidationError("v_floor must be nonnegative");
}

long step_count(const SimConfig& cfg) {
  if (cfg.t_final <= 0) return 0;
  return std::max(1L, std::lround(cfg.t_final / cfg.dt));
}

}  // namespace

Trajectory Simulator::simulate(const DensityMatrix& rho0, const SimConfig& cfg) const {
  validate_config(cfg);
  if (rho0.dim() != model_.dim())
    throw ValidationError("simulate: initial state dimension mismatch");

  Matrix rho = rho0.mat();
  if (rotated_) rho = input_basis_.adjoint() * rho * input_basis_;

  {  // one-time step-size sanity check against the initial jump intensities
    double total = 0.0;
    for (std::size_t j : jumps_) {
      const Matrix& c = model_.channels[j].op;
      total += std::max(0.0, (c * rho * c.adjoint()).trace().real());
    }
    if (total * cfg.dt > 0.1)
      std::cerr << "warning: dt * total jump intensity = " << total * cfg.dt
                << " at t=0 exceeds 0.1; consider a smaller dt\n";
  }

  const long n_steps = step_count(cfg);
  Trajectory traj;
  traj.seed = cfg.seed;
  traj.times.resize(n_steps + 1);
  if (cfg.record.v) traj.v_series.resize(n_steps + 1);
  if (cfg.record.ln_v) traj.ln_v_series.resize(n_steps + 1);
  if (cfg.record.martingale_terms) {
    traj.mw_series.resize(n_steps + 1);
    traj.mj_series.resize(n_steps + 1);
  }
  if (cfg.record.full_state) traj.states.reserve(n_steps + 1);
  if (cfg.record.noise) traj.steps.resize(n_steps);

  RngStream rng(cfg.seed);
  Workspace ws(model_.dim());
  const Eigen::Index dr = split_.dim_r();
  double mw = 0.0, mj = 0.0;
  StepRecord local_rec;
  const bool need_rec = cfg.record.noise || cfg.record.martingale_terms ||
                        cfg.record.jump_times;

  for (long k = 0; k <= n_steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    traj.times[k] = t;
    const double v = subspace_leakage(rho, split_);
    if (cfg.record.v) traj.v_series[k] = v;
    if (cfg.record.ln_v)
      traj.ln_v_series[k] = v > 0 ? std::log(v) : -std::numeric_limits<double>::infinity();
    if (cfg.record.martingale_terms) {
      traj.mw_series[k] = mw;
      traj.mj_series[k] = mj;
    }
    if (cfg.record.full_state)
      traj.states.push_back(rotated_ ? Matrix(input_basis_ * rho * input_basis_.adjoint())
                                     : rho);
    if (v < cfg.v_floor) traj.absorbed = true;
    if (k == n_steps) break;

    StepRecord* rec = need_rec ? &local_rec : nullptr;
    if (rec) *rec = StepRecord{};

    try {
      step_impl(rho, cfg.dt, rng, rec, ws);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at t=" + std::to_string(t));
    }

    if (cfg.record.martingale_terms && v > cfg.v_floor) {
      const Matrix rho_red = rho.bottomRightCorner(dr, dr) / v;
      if (rec->jumped < 0 && !diffusive_.empty()) {
        const RVector f_w = blocks_.r_vector_r(rho_red) - r_vector(model_, rho);
        mw += f_w.dot(rec->dw);
      }
      if (!jumps_.empty()) {
        const RVector v_full = v_vector(model_, rho);
        const RVector v_red = blocks_.v_vector_r(rho_red);
        for (std::size_t j = 0; j < jumps_.size(); ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          if (!(v_full[jj] > 0) || !(v_red[jj] > 0)) continue;
          const double f_j = std::log(v_red[jj] / v_full[jj]);
          const double dn = (rec->jumped == static_cast<int>(jumps_[j])) ? 1.0 : 0.0;
          mj += f_j * (dn - v_full[jj] * cfg.dt);
        }
      }
    }

    if (rec && rec->jumped >= 0 && cfg.record.jump_times)
      traj.jump_events.emplace_back((k + 1) * cfg.dt, rec->jumped);
    if (cfg.record.noise) traj.steps[k] = *rec;
    rho = ws.out;
  }

  traj.final_state = DensityMatrix::from_matrix(
      rotated_ ? hermitize(input_basis_ * rho * input_basis_.adjoint()) : rho);
  return traj;
}

Ensemble Simulator::ensemble(const DensityMatrix& rho0, const SimConfig& cfg) const {
  validate_config(cfg);
  if (cfg.n_traj < 2) throw ValidationError("ensemble needs n_traj >= 2");

  const long n_steps = step_count(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.n_traj);
  const std::size_t n_chunks = (n + kEnsembleChunk - 1) / kEnsembleChunk;

  std::vector<std::vector<double>> sums(n_chunks), sqsums(n_chunks);
  SimConfig traj_cfg = cfg;
  traj_cfg.n_traj = 1;
  traj_cfg.record = RecordFlags{};
  traj_cfg.record.ln_v = false;
  traj_cfg.record.jump_times = false;

  parallel_for(n_chunks, [&](std::size_t chunk) {
    std::vector<double>& sum = sums[chunk];
    std::vector<double>& sq = sqsums[chunk];
    sum.assign(n_steps + 1, 0.0);
    sq.assign(n_steps + 1, 0.0);
    const std::size_t lo = chunk * kEnsembleChunk;
    const std::size_t hi = std::min(n, lo + kEnsembleChunk);
    for (std::size_t idx = lo; idx < hi; ++idx) {
      SimConfig one = traj_cfg;
      one.seed = cfg.seed ^ static_cast<std::uint64_t>(idx);
      const Trajectory traj = simulate(rho0, one);
      for (long k = 0; k <= n_steps; ++k) {
        sum[k] += traj.v_series[k];
        sq[k] += traj.v_series[k] * traj.v_series[k];
      }
    }
  });

  Ensemble out;
  out.n_traj = cfg.n_traj;
  out.base_seed = cfg.seed;
  out.times.resize(n_steps + 1);
  out.mean_v.resize(n_steps + 1);
  out.stderr_v.resize(n_steps + 1);
  for (long k = 0; k <= n_steps; ++k) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
      sum += sums[chunk][k];
      sq += sqsums[chunk][k];
    }
    const double mean = sum / double(n);
    const double var = std::max(0.0, (sq - double(n) * mean * mean) / double(n - 1));
    out.times[k] = static_cast<double>(k) * cfg.dt;
    out.mean_v[k] = mean;
    out.stderr_v[k] = std::sqrt(var / double(n));
  }
  return out;
}

std::vector<double> doleans_track(const SmeModel& model, const SubspaceSplit& split,
                                  const Trajectory& traj, const DensityMatrix& rho0) {
  auto [adapted_model, adapted_split] = to_adapted_basis(model, split);
  const ModelBlocks blocks = decompose_model(adapted_model, adapted_split);
  const auto jumps = adapted_model.jump_indices();
  const std::size_t n_steps = traj.steps.size();
  if (traj.states.size() != n_steps + 1 || traj.times.size() != n_steps + 1)
    throw ValidationError("doleans_track needs a trajectory recorded with "
                          "full_state and noise flags");
  if (rho0.dim() != adapted_model.dim())
    throw ValidationError("doleans_track: initial state dimension mismatch");

  const Eigen::Index dr = adapted_split.dim_r();
  std::vector<double> ln_v(n_steps + 1);
  const double v0 = subspace_leakage(traj.states[0], split);
  if (!(v0 > 0)) throw NumericError("doleans_track: V(0) is not positive");
  ln_v[0] = std::log(v0);

  const Matrix& u = split.basis;
  const bool rotated = !split.is_standard_basis();
  for (std::size_t k = 0; k < n_steps; ++k) {
    const Matrix rho = rotated ? Matrix(u.adjoint() * traj.states[k] * u)
                               : traj.states[k];
    const double v = subspace_leakage(rho, adapted_split);
    if (!(v > 0))
      throw NumericError("doleans_track: V hit zero at t=" + std::to_string(traj.times[k]));
    const Matrix rho_red = rho.bottomRightCorner(dr, dr) / v;
    const StepRecord& rec = traj.steps[k];
    const double dt = traj.times[k + 1] - traj.times[k];

    if (rec.jumped >= 0) {
      std::size_t ord = 0;
      while (ord < jumps.size() && jumps[ord] != static_cast<std::size_t>(rec.jumped)) ++ord;
      if (ord == jumps.size())
        throw ValidationError("doleans_track: recorded jump channel not in model");
      const RVector v_full = v_vector(adapted_model, rho);
      const RVector v_red = blocks.v_vector_r(rho_red);
      const auto jj = static_cast<Eigen::Index>(ord);
      if (!(v_full[jj] > 0) || !(v_red[jj] > 0))
        throw NumericError("doleans_track: jump with vanishing intensity");
      ln_v[k + 1] = ln_v[k] + std::log(v_red[jj] / v_full[jj]);
      continue;
    }

    // tr(L_R rho_red) = -sum_j tr(C_{j,P}* C_{j,P} rho_red)
    double trace_lr = 0.0;
    for (const BlockDecomposition& c : blocks.channel)
      trace_lr -= (c.p.adjoint() * c.p * rho_red).trace().real();

    const RVector f_w = blocks.r_vector_r(rho_red) - r_vector(adapted_model, rho);
    double drift = trace_lr - 0.5 * f_w.squaredNorm();
    const RVector v_full = v_vector(adapted_model, rho);
    const RVector v_red = blocks.v_vector_r(rho_red);
    for (Eigen::Index j = 0; j < v_full.size(); ++j) drift -= v_red[j] - v_full[j];
    ln_v[k + 1] = ln_v[k] + drift * dt + f_w.dot(rec.dw);
  }
  return ln_v;
}

namespace {

void print_float(std::ostream& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out << buf;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, int stride) {
  if (stride < 1) stride = 1;
  out << "t,V,lnV,jumped_channel,mw,mj\n";
  std::size_t next_event = 0;
  const std::size_t n = traj.times.size();
  for (std::size_t k = 0; k < n; ++k) {
    const bool keep = (k % static_cast<std::size_t>(stride) == 0) || k + 1 == n;
    int jumped = -1;
    while (next_event < traj.jump_events.size() &&
           traj.jump_events[next_event].first <= traj.times[k] + 1e-15) {
      jumped = traj.jump_events[next_event].second;
      ++next_event;
    }
    if (!keep) continue;
    print_float(out, traj.times[k]);
    out << ',';
    print_float(out, k < traj.v_series.size() ? traj.v_series[k] : 0.0);
    out << ',';
    print_float(out, k < traj.ln_v_series.size()
                         ? traj.ln_v_series[k]
                         : -std::numeric_limits<double>::infinity());
    out << ',';
    if (jumped >= 0) out << jumped;
    out << ',';
    print_float(out, k < traj.mw_series.size() ? traj.mw_series[k] : 0.0);
    out << ',';
    print_float(out, k < traj.mj_series.size() ? traj.mj_series[k] : 0.0);
    out << '\n';
  }
}

void write_ensemble_csv(std::ostream& out, const Ensemble& ens, int stride) {
  if (stride < 1) stride = 1;
  out << "t,mean_V,stderr_V,n\n";
  const std::size_t n = ens.times.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (k % static_cast<std::size_t>(stride) != 0 && k + 1 != n) continue;
    print_float(out, ens.times[k]);
    out << ',';
    print_float(out, ens.mean_v[k]);
    out << ',';
    print_float(out, ens.stderr_v[k]);
    out << ',' << ens.n_traj << '\n';
  }
}

}  // namespace qsme

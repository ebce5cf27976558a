#include "qsme/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qsme/errors.hpp"
#include "qsme/model_io.hpp"
#include "qsme/parallel.hpp"

namespace qsme {

namespace {

// v_R below this counts as the definition's zero branch; under SP the
// intensities are bounded away by the structure tolerance, so no overlap.
constexpr double kZeroBranchTol = 1e-13;

double frobenius(const Matrix& x) { return x.norm(); }

}  // namespace

InvarianceCheck check_invariance(const SmeModel& model, const SubspaceSplit& split,
                                 double tol) {
  const ModelBlocks blocks = decompose_model(model, split);
  InvarianceCheck out;
  for (const BlockDecomposition& c : blocks.channel)
    out.max_q_norm = std::max(out.max_q_norm, frobenius(c.q));
  Matrix coupling = Complex(0, 1) * blocks.h.p;
  for (const BlockDecomposition& c : blocks.channel)
    coupling -= 0.5 * (c.s.adjoint() * c.p);
  out.coupling_norm = frobenius(coupling);
  out.invariant = out.max_q_norm <= tol && out.coupling_norm <= tol;
  return out;
}

SpCheck check_sp(const SmeModel& model, const SubspaceSplit& split, double tol) {
  const ModelBlocks blocks = decompose_model(model, split);
  SpCheck out;
  out.min_eig = std::numeric_limits<double>::infinity();
  bool any_jump = false;
  for (std::size_t i = 0; i < blocks.channel.size(); ++i) {
    if (blocks.kind[i] != ChannelKind::Jump) continue;
    any_jump = true;
    const Matrix& cr = blocks.channel[i].r;
    out.min_eig = std::min(out.min_eig, min_eigenvalue_hermitian(cr.adjoint() * cr));
  }
  if (!any_jump) out.min_eig = std::numeric_limits<double>::infinity();
  out.sp = !any_jump || out.min_eig > tol;
  return out;
}

double alpha0(const SmeModel& model, const SubspaceSplit& split) {
  const Superoperator l_r = reduced_generators(model, split).l_r;
  Eigen::ComplexEigenSolver<Matrix> es(l_r.mat, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericError("alpha0: eigensolver failed");
  double out = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    out = std::min(out, -es.eigenvalues()[i].real());
  return out;
}

bool check_gas(const SmeModel& model, const SubspaceSplit& split) {
  const InvarianceCheck inv = check_invariance(model, split);
  if (!inv.invariant)
    throw PreconditionError("GAS is defined relative to an invariant subspace; "
                            "invariance check failed");
  return alpha0(model, split) > kGasTol;
}

double alpha0_prime(const SmeModel& model, const SubspaceSplit& split) {
  const ModelBlocks blocks = decompose_model(model, split);
  const Eigen::Index dr = split.dim_r();
  Matrix sum = Matrix::Zero(dr, dr);
  for (const BlockDecomposition& c : blocks.channel) sum += c.p.adjoint() * c.p;
  return std::max(0.0, min_eigenvalue_hermitian(sum));
}

namespace {

struct AlphaContext {
  const SmeModel& model;
  const SubspaceSplit& split;
  ModelBlocks blocks;
};

double alpha_eval(const AlphaContext& ctx, const Matrix& rho_full, const Matrix& rho_r) {
  const RVector r = r_vector(ctx.model, rho_full);
  const RVector r_r = ctx.blocks.r_vector_r(rho_r);
  const RVector v = v_vector(ctx.model, rho_full);
  const RVector v_r = ctx.blocks.v_vector_r(rho_r);
  for (Eigen::Index j = 0; j < v_r.size(); ++j)
    if (v_r[j] <= kZeroBranchTol) return 0.0;
  double out = 0.5 * (r - r_r).squaredNorm();
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    out += v_r[j] - v[j];
    if (v[j] > 0) out += v[j] * std::log(v[j] / v_r[j]);
  }
  return std::max(0.0, out);
}

Matrix embed_on_target(const Matrix& rho_s, const SubspaceSplit& split) {
  Matrix full = Matrix::Zero(split.dim, split.dim);
  full.topLeftCorner(split.dim_s, split.dim_s) = rho_s;
  if (!split.is_standard_basis()) full = split.basis * full * split.basis.adjoint();
  return full;
}

// ---- Nelder-Mead over unnormalized complex factor matrices ----

struct Objective {
  const AlphaContext& ctx;
  Eigen::Index ds, dr;

  Eigen::Index n_params() const { return 2 * ds * ds + 2 * dr * dr; }

  static Matrix factor_state(const double* x, Eigen::Index d) {
    Matrix a(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i) {
        a(i, j) = Complex(x[2 * (j * d + i)], x[2 * (j * d + i) + 1]);
      }
    Matrix rho = a * a.adjoint();
    const double tr = rho.trace().real();
    if (!(tr > 1e-14)) return Matrix();  // degenerate factor
    return rho / tr;
  }

  double operator()(const Eigen::VectorXd& x) const {
    const Matrix rho_s = factor_state(x.data(), ds);
    const Matrix rho_r = factor_state(x.data() + 2 * ds * ds, dr);
    if (rho_s.size() == 0 || rho_r.size() == 0)
      return std::numeric_limits<double>::max();
    return alpha_eval(ctx, embed_on_target(rho_s, ctx.split), rho_r);
  }
};

struct NmOutcome {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::max();
  long evals = 0;
  bool converged = false;
};

NmOutcome nelder_mead(const Objective& f, Eigen::VectorXd x0, long max_evals) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) xs[i + 1][i] += 0.25 * (1.0 + std::abs(x0[i]));
  long evals = 0;
  for (Eigen::Index i = 0; i <= n; ++i) {
    fs[i] = f(xs[i]);
    ++evals;
  }
  std::vector<Eigen::Index> order(n + 1);
  const auto sort_simplex = [&] {
    for (Eigen::Index i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return fs[a] < fs[b]; });
  };
  bool converged = false;
  while (evals < max_evals) {
    sort_simplex();
    const double fbest = fs[order[0]], fworst = fs[order[n]];
    if (fworst - fbest <= 1e-12 * (1.0 + std::abs(fbest))) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += xs[order[i]];
    centroid /= double(n);
    const Eigen::Index iw = order[n];
    const Eigen::VectorXd reflected = centroid + (centroid - xs[iw]);
    const double fr = f(reflected);
    ++evals;
    if (fr < fs[order[0]]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - xs[iw]);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        xs[iw] = expanded;
        fs[iw] = fe;
      } else {
        xs[iw] = reflected;
        fs[iw] = fr;
      }
    } else if (fr < fs[order[n - 1]]) {
      xs[iw] = reflected;
      fs[iw] = fr;
    } else {
      const bool outside = fr < fs[iw];
      const Eigen::VectorXd contracted =
          outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (xs[iw] - centroid));
      const double fc = f(contracted);
      ++evals;
      if (fc < std::min(fr, fs[iw])) {
        xs[iw] = contracted;
        fs[iw] = fc;
      } else {
        for (Eigen::Index i = 1; i <= n; ++i) {
          xs[order[i]] = xs[order[0]] + 0.5 * (xs[order[i]] - xs[order[0]]);
          fs[order[i]] = f(xs[order[i]]);
          ++evals;
        }
      }
    }
  }
  sort_simplex();
  return {xs[order[0]], fs[order[0]], evals, converged};
}

// ---- deterministic Bloch-ball grids for blocks of dimension <= 2 ----

std::vector<Matrix> block_state_grid(Eigen::Index d, int n_radius, int n_polar,
                                     int n_azimuth) {
  std::vector<Matrix> out;
  if (d == 1) {
    out.push_back(Matrix::Identity(1, 1));
    return out;
  }
  out.reserve(static_cast<std::size_t>(n_radius + 1) * n_polar * n_azimuth);
  const double pi = std::acos(-1.0);
  for (int ir = 0; ir <= n_radius; ++ir) {
    const double rad = double(ir) / n_radius;
    if (ir == 0) {
      out.push_back(0.5 * Matrix::Identity(2, 2));
      continue;
    }
    for (int it = 0; it < n_polar; ++it) {
      const double theta = pi * double(it) / (n_polar - 1);
      for (int ip = 0; ip < n_azimuth; ++ip) {
        const double phi = 2 * pi * double(ip) / n_azimuth;
        const double x = rad * std::sin(theta) * std::cos(phi);
        const double y = rad * std::sin(theta) * std::sin(phi);
        const double z = rad * std::cos(theta);
        Matrix rho(2, 2);
        rho(0, 0) = 0.5 * (1 + z);
        rho(1, 1) = 0.5 * (1 - z);
        rho(0, 1) = 0.5 * Complex(x, -y);
        rho(1, 0) = 0.5 * Complex(x, y);
        out.push_back(std::move(rho));
      }
    }
  }
  return out;
}

}  // namespace

double alpha_fn(const SmeModel& model, const SubspaceSplit& split,
                const DensityMatrix& rho, const DensityMatrix& rho_r) {
  if (rho.dim() != split.dim || rho_r.dim() != split.dim_r())
    throw ValidationError("alpha_fn: dimension mismatch");
  AlphaContext ctx{model, split, decompose_model(model, split)};
  return alpha_eval(ctx, rho.mat(), rho_r.mat());
}

Alpha1Result alpha1(const SmeModel& model, const SubspaceSplit& split,
                    const OptConfig& cfg) {
  const Eigen::Index ds = split.dim_s, dr = split.dim_r();
  AlphaContext ctx{model, split, decompose_model(model, split)};

  const SpCheck sp = check_sp(model, split);
  if (!sp.sp) {
    // Zero branch of the definition: some jump channel cannot see part of
    // H_R, and states along that null direction give alpha = 0.
    Matrix rho_r = Matrix::Identity(dr, dr) / double(dr);
    for (std::size_t i = 0; i < ctx.blocks.channel.size(); ++i) {
      if (ctx.blocks.kind[i] != ChannelKind::Jump) continue;
      const Matrix& cr = ctx.blocks.channel[i].r;
      Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(cr.adjoint() * cr));
      if (es.eigenvalues().minCoeff() <= kStructureTol) {
        const CVector null_dir = es.eigenvectors().col(0);
        rho_r = null_dir * null_dir.adjoint();
        break;
      }
    }
    Alpha1Result out;
    out.rho_star = DensityMatrix::unchecked(
        embed_on_target(Matrix::Identity(ds, ds) / double(ds), split));
    out.rho_r_star = DensityMatrix::unchecked(std::move(rho_r));
    out.sp_holds = false;
    return out;
  }

  const Objective objective{ctx, ds, dr};
  const Eigen::Index n = objective.n_params();

  struct StartResult {
    NmOutcome outcome;
    int index;
  };
  std::vector<StartResult> results(static_cast<std::size_t>(std::max(1, cfg.starts)));
  parallel_for(results.size(), [&](std::size_t s) {
    Eigen::VectorXd x0(n);
    if (s == 0) {
      x0.setZero();
      for (Eigen::Index i = 0; i < ds; ++i) x0[2 * (i * ds + i)] = 1.0;
      for (Eigen::Index i = 0; i < dr; ++i) x0[2 * ds * ds + 2 * (i * dr + i)] = 1.0;
    } else {
      std::mt19937_64 gen(cfg.seed ^ static_cast<std::uint64_t>(s));
      for (Eigen::Index i = 0; i < n; ++i) {
        // Box-Muller on explicit 53-bit uniforms keeps the draw reproducible.
        const double u1 = (double(gen() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = (double(gen() >> 11) + 1.0) * 0x1.0p-53;
        x0[i] = std::sqrt(-2.0 * std::log(u1)) *
                std::cos(2.0 * std::acos(-1.0) * u2);
      }
    }
    results[s] = {nelder_mead(objective, std::move(x0), cfg.max_iterations),
                  static_cast<int>(s)};
  });

  const StartResult* best = &results[0];
  long total_evals = 0;
  for (const StartResult& r : results) {
    total_evals += r.outcome.evals;
    if (r.outcome.value < best->outcome.value) best = &r;
  }

  Matrix rho_s_best = Objective::factor_state(best->outcome.x.data(), ds);
  Matrix rho_r_best = Objective::factor_state(best->outcome.x.data() + 2 * ds * ds, dr);
  double opt_value = best->outcome.value;
  bool converged = best->outcome.converged;

  std::optional<double> grid_value;
  if (ds <= 2 && dr <= 2) {
    const bool both_balls = (ds == 2 && dr == 2);
    const int nr = both_balls ? std::max(2, cfg.grid_radius / 2) : cfg.grid_radius;
    const int np = both_balls ? std::max(3, cfg.grid_polar / 2) : cfg.grid_polar;
    const int na = both_balls ? std::max(2, cfg.grid_azimuth / 2) : cfg.grid_azimuth;
    const auto grid_s = block_state_grid(ds, nr, np, na);
    const auto grid_r = block_state_grid(dr, nr, np, na);
    double gbest = std::numeric_limits<double>::max();
    const Matrix* gs = nullptr;
    const Matrix* gr = nullptr;
    for (const Matrix& s_state : grid_s) {
      const Matrix full = embed_on_target(s_state, split);
      for (const Matrix& r_state : grid_r) {
        const double val = alpha_eval(ctx, full, r_state);
        if (val < gbest) {
          gbest = val;
          gs = &s_state;
          gr = &r_state;
        }
      }
    }
    grid_value = gbest;
    if (gbest < opt_value) {
      rho_s_best = *gs;
      rho_r_best = *gr;
      opt_value = gbest;
      converged = true;
    }
  }

  Alpha1Result out;
  out.rho_star = DensityMatrix::unchecked(embed_on_target(hermitize(rho_s_best), split));
  out.rho_r_star = DensityMatrix::unchecked(hermitize(rho_r_best));
  out.converged = converged;
  out.starts = static_cast<int>(results.size());
  out.iterations = total_evals;
  out.optimizer_value = best->outcome.value;
  out.grid_value = grid_value;
  // The reported value is the alpha function evaluated at the argmin, so the
  // two agree exactly.
  out.value = alpha_fn(model, split, out.rho_star, out.rho_r_star);
  return out;
}

NdCheck check_nd(const SmeModel& model, const SubspaceSplit& split, const OptConfig& cfg) {
  const Alpha1Result a1 = alpha1(model, split, cfg);
  return NdCheck{a1.value > kNdTol, a1.value};
}

LyapunovCertificate lyapunov_K(const SmeModel& model, const SubspaceSplit& split,
                               std::optional<double> epsilon) {
  const double a0 = alpha0(model, split);
  if (a0 <= kGasTol)
    throw PreconditionError("Lyapunov certificate requires alpha0 > 0 (GAS)");
  const double eps = epsilon.value_or(a0 / 2);
  if (!(eps > 0.0 && eps < a0))
    throw ValidationError("epsilon must lie in (0, alpha0)");

  const Eigen::Index dr = split.dim_r();
  const Matrix l_r_adj = reduced_generators(model, split).l_r.mat.adjoint();
  const Superoperator depolarize = superop_matrix(
      [dr](const Matrix& x) { return Matrix(x.trace() * Matrix::Identity(dr, dr)); }, dr);

  const auto apply_adjoint = [&](const Matrix& k) {
    return unvec(l_r_adj * vec(k), dr, dr);
  };

  for (double eta = a0 / 10; eta >= 1e-12; eta *= 0.5) {
    const Matrix perturbed = l_r_adj + eta * depolarize.mat;
    Eigen::ComplexEigenSolver<Matrix> es(perturbed);
    if (es.info() != Eigen::Success) throw NumericError("lyapunov_K: eigensolver failed");
    Eigen::Index lead = 0;
    for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i].real() > es.eigenvalues()[lead].real()) lead = i;
    const double alpha_eta = -es.eigenvalues()[lead].real();

    Matrix k = unvec(es.eigenvectors().col(lead), dr, dr);
    const Complex tr = k.trace();
    if (std::abs(tr) < 1e-14) continue;
    k *= std::conj(tr) / std::abs(tr);  // rotate the eigenvector phase out
    k = hermitize(k);
    Eigen::SelfAdjointEigenSolver<Matrix> kes(k);
    const double lmin = kes.eigenvalues().minCoeff();
    const double lmax = kes.eigenvalues().maxCoeff();
    if (lmin <= 1e-12 * std::max(lmax, 1e-300)) continue;
    k /= lmin;  // min eigenvalue = 1

    const double residual =
        max_eigenvalue_hermitian(hermitize(apply_adjoint(k)) + (a0 - eps) * k);
    if (alpha_eta < a0 - eps || residual > 1e-8) continue;

    Eigen::SelfAdjointEigenSolver<Matrix> scaled(k);
    const Matrix inv_sqrt =
        scaled.eigenvectors() *
        scaled.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
        scaled.eigenvectors().adjoint();
    const double rate = min_eigenvalue_hermitian(
        inv_sqrt * (-hermitize(apply_adjoint(k))) * inv_sqrt);
    return LyapunovCertificate{std::move(k), rate, eps, eta, residual};
  }
  throw CertificateError("no certificate found");
}

SmeModel add_nd_channel(const SmeModel& model, const SubspaceSplit& split,
                        Complex l_s, Complex l_r) {
  Matrix op = l_s * split.projector_s() + l_r * split.projector_r();
  std::vector<Channel> channels = model.channels;
  channels.push_back({std::move(op), ChannelKind::Diffusive});
  return make_model(model.hamiltonian, std::move(channels));
}

StabilityReport analyze_stability(const SmeModel& model, const SubspaceSplit& split,
                                  std::optional<double> epsilon, const OptConfig& cfg) {
  StabilityReport report;
  report.invariance = check_invariance(model, split);
  if (!report.invariance.invariant)
    throw PreconditionError("stability analysis requires an invariant target subspace");
  report.gas = check_gas(model, split);
  if (!report.gas)
    throw PreconditionError("stability analysis requires a GAS target subspace");
  report.sp = check_sp(model, split);
  report.alpha0 = alpha0(model, split);
  report.alpha0_prime = alpha0_prime(model, split);
  report.alpha1_detail = alpha1(model, split, cfg);
  report.alpha1 = report.alpha1_detail.value;
  report.nd = NdCheck{report.alpha1 > kNdTol, report.alpha1};
  report.beta0 = beta0(report.alpha0, report.alpha0_prime, report.alpha1);
  const LyapunovCertificate cert = lyapunov_K(model, split, epsilon);
  report.epsilon = cert.epsilon;
  report.k_r = cert.k_r;
  report.certified_rate = cert.certified_rate;
  report.certificate_residual = cert.residual;
  return report;
}

nlohmann::json report_to_json(const StabilityReport& report) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["invariant"] = report.invariance.invariant;
  j["residuals"] = {{"max_q_norm", report.invariance.max_q_norm},
                    {"coupling_norm", report.invariance.coupling_norm}};
  j["gas"] = report.gas;
  j["sp"] = report.sp.sp;
  j["sp_min_eig"] = std::isfinite(report.sp.min_eig) ? report.sp.min_eig : -1.0;
  j["nd"] = report.nd.nd;
  j["alpha0"] = report.alpha0;
  j["alpha0_prime"] = report.alpha0_prime;
  j["alpha1"] = report.alpha1;
  j["beta0"] = report.beta0;
  j["epsilon"] = report.epsilon;
  j["K_R"] = matrix_to_json(report.k_r);
  j["certified_rate"] = report.certified_rate;
  j["certificate_residual"] = report.certificate_residual;
  j["optimizer"] = {{"starts", report.alpha1_detail.starts},
                    {"iterations", report.alpha1_detail.iterations},
                    {"converged", report.alpha1_detail.converged},
                    {"sp_holds", report.alpha1_detail.sp_holds}};
  if (report.alpha1_detail.optimizer_value)
    j["optimizer"]["local_value"] = *report.alpha1_detail.optimizer_value;
  if (report.alpha1_detail.grid_value)
    j["optimizer"]["grid_value"] = *report.alpha1_detail.grid_value;
  return j;
}

}  // namespace qsme

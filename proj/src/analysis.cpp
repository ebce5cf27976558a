#include "qsme/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "qsme/errors.hpp"

namespace qsme {

ExponentFit fit_exponent(std::span<const double> times, std::span<const double> ln_v,
                         std::optional<std::pair<double, double>> window,
                         double v_floor) {
  if (times.size() != ln_v.size())
    throw ValidationError("fit_exponent: series length mismatch");
  const double ln_floor = v_floor > 0 ? std::log(v_floor)
                                      : -std::numeric_limits<double>::infinity();

  double t_lo, t_hi;
  if (window) {
    t_lo = window->first;
    t_hi = window->second;
    if (!(t_lo < t_hi)) throw ValidationError("fit_exponent: empty window");
  } else {
    // Last two-thirds of the non-absorbed span.
    double span_lo = 0, span_hi = 0;
    bool any = false;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!(ln_v[i] > ln_floor) || !std::isfinite(ln_v[i])) continue;
      if (!any) span_lo = times[i];
      span_hi = times[i];
      any = true;
    }
    if (!any) throw ValidationError("fit_exponent: no usable points");
    t_lo = span_lo + (span_hi - span_lo) / 3.0;
    t_hi = span_hi;
  }

  double st = 0, sy = 0;
  long n = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_lo || times[i] > t_hi) continue;
    if (!(ln_v[i] > ln_floor) || !std::isfinite(ln_v[i])) continue;
    st += times[i];
    sy += ln_v[i];
    ++n;
  }
  if (n < 10) throw ValidationError("fit_exponent: fewer than 10 usable points in window");
  const double tbar = st / double(n), ybar = sy / double(n);
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_lo || times[i] > t_hi) continue;
    if (!(ln_v[i] > ln_floor) || !std::isfinite(ln_v[i])) continue;
    const double dt = times[i] - tbar, dy = ln_v[i] - ybar;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  ExponentFit fit;
  fit.slope = sty / stt;
  fit.intercept = ybar - fit.slope * tbar;
  const double ss_res = std::max(0.0, syy - fit.slope * sty);
  fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  fit.slope_stderr = n > 2 ? std::sqrt(ss_res / double(n - 2) / stt) : 0.0;
  fit.t_lo = t_lo;
  fit.t_hi = t_hi;
  fit.n_points = static_cast<int>(n);
  return fit;
}

QubitReference qubit_reference(Complex l_p, Complex l_s, Complex l_r) {
  QubitReference out;
  out.alpha0 = std::norm(l_p);
  out.alpha0_prime = out.alpha0;
  const double re = (l_s - l_r).real();
  out.alpha1 = 2.0 * re * re;
  out.as_exponent = -(out.alpha0 + out.alpha1);
  return out;
}

RateComparison compare_rates(const StabilityReport& report,
                             const std::vector<ExponentFit>& trajectory_fits,
                             const std::optional<ExponentFit>& mean_fit) {
  if (!report.gas) throw PreconditionError("compare_rates requires a GAS report");
  RateComparison cmp;
  cmp.alpha0 = report.alpha0;
  cmp.beta0 = report.beta0;
  if (trajectory_fits.empty() && !mean_fit) {
    cmp.has_data = false;
    return cmp;
  }
  cmp.has_data = !trajectory_fits.empty();

  if (mean_fit) {
    cmp.mean_slope = mean_fit->slope;
    cmp.mean_slack = 0.2 * report.beta0 + 2.0 * mean_fit->slope_stderr;
    cmp.mean_bound_ok = *cmp.mean_slope <= -report.alpha0 + *cmp.mean_slack;
  }

  if (!trajectory_fits.empty()) {
    std::vector<double> slopes, errors;
    slopes.reserve(trajectory_fits.size());
    for (const ExponentFit& f : trajectory_fits) {
      slopes.push_back(f.slope);
      errors.push_back(f.slope_stderr);
    }
    std::sort(slopes.begin(), slopes.end());
    std::sort(errors.begin(), errors.end());
    const auto quantile = [](const std::vector<double>& v, double q) {
      const double pos = q * double(v.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, v.size() - 1);
      return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
    };
    cmp.n_fits = static_cast<int>(slopes.size());
    cmp.median_slope = quantile(slopes, 0.5);
    cmp.iqr_lo = quantile(slopes, 0.25);
    cmp.iqr_hi = quantile(slopes, 0.75);
    cmp.as_slack = 0.2 * report.beta0 + 2.0 * quantile(errors, 0.5);
    cmp.as_bound_ok = cmp.median_slope <= -report.beta0 + cmp.as_slack;
  }
  return cmp;
}

nlohmann::json comparison_to_json(const RateComparison& cmp) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["has_data"] = cmp.has_data;
  j["theory"] = {{"alpha0", cmp.alpha0}, {"beta0", cmp.beta0}};
  if (cmp.mean_slope) {
    j["mean"] = {{"slope", *cmp.mean_slope},
                 {"slack", *cmp.mean_slack},
                 {"bound_respected", *cmp.mean_bound_ok}};
  }
  if (cmp.has_data) {
    j["almost_sure"] = {{"n_fits", cmp.n_fits},
                        {"median_slope", cmp.median_slope},
                        {"iqr", {cmp.iqr_lo, cmp.iqr_hi}},
                        {"slack", cmp.as_slack},
                        {"bound_respected", cmp.as_bound_ok}};
  }
  return j;
}

}  // namespace qsme

#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsme/stability.hpp"

namespace qsme {

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  int n_points = 0;
};

/// Ordinary least squares of lnV against t. Points at or below ln(v_floor)
/// are excluded; the default window is the last two-thirds of the remaining
/// span. Throws ValidationError with fewer than 10 usable points.
ExponentFit fit_exponent(std::span<const double> times, std::span<const double> ln_v,
                         std::optional<std::pair<double, double>> window = std::nullopt,
                         double v_floor = 1e-12);

struct QubitReference {
  double alpha0;
  double alpha0_prime;
  double alpha1;
  double as_exponent;  // -(alpha0 + alpha1)
};

/// Closed-form rates for the two-level model with channels
/// [[0, l_p], [0, 0]] and diag(l_s, l_r).
QubitReference qubit_reference(Complex l_p, Complex l_s, Complex l_r);

struct RateComparison {
  bool has_data = false;
  double alpha0 = 0.0;
  double beta0 = 0.0;
  std::optional<double> mean_slope;
  std::optional<double> mean_slack;
  std::optional<bool> mean_bound_ok;  // mean_slope <= -alpha0 + slack
  int n_fits = 0;
  double median_slope = 0.0;
  double iqr_lo = 0.0;
  double iqr_hi = 0.0;
  double as_slack = 0.0;
  bool as_bound_ok = false;  // median_slope <= -beta0 + slack
};

/// Checks the fitted exponents against the theoretical bounds with slack
/// 0.2 beta0 + 2 fit standard errors. GAS must hold in the report.
RateComparison compare_rates(const StabilityReport& report,
                             const std::vector<ExponentFit>& trajectory_fits,
                             const std::optional<ExponentFit>& mean_fit);

nlohmann::json comparison_to_json(const RateComparison& cmp);

}  // namespace qsme

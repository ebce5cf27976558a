#include <doctest.h>

#include <cmath>
#include <vector>

#include "qsme/analysis.hpp"
#include "qsme/errors.hpp"
#include "support/test_models.hpp"

using namespace qsme;

TEST_CASE("fit_exponent recovers an exact line") {
  std::vector<double> t, y;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.1 * k);
    y.push_back(-3.0 * t.back() + 0.7);
  }
  const ExponentFit fit = fit_exponent(t, y, std::make_pair(0.0, 10.0));
  CHECK(fit.slope == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));

  // Default window: last two thirds of the span that sits above the floor
  // (this series crosses ln(1e-12) just before t = 9.5).
  const ExponentFit dft = fit_exponent(t, y);
  CHECK(dft.slope == doctest::Approx(-3.0).epsilon(1e-12));
  const double crossing = (0.7 - std::log(1e-12)) / 3.0;
  const double expected_hi = std::floor(crossing / 0.1) * 0.1;
  CHECK(dft.t_hi == doctest::Approx(expected_hi).epsilon(1e-9));
  CHECK(dft.t_lo == doctest::Approx(expected_hi / 3.0).epsilon(1e-6));
}

TEST_CASE("fit_exponent recovers noisy slopes within 0.05") {
  std::mt19937_64 gen(41);
  for (double a : {-10.0, -3.0, -0.5, 0.0, 2.0, 10.0}) {
    std::vector<double> t, y;
    for (int k = 0; k <= 1000; ++k) {
      t.push_back(0.012 * k);  // T = 12
      y.push_back(a * t.back() + 1.3 + 0.1 * testing::gaussian(gen));
    }
    const ExponentFit fit = fit_exponent(t, y, std::make_pair(0.0, 12.0));
    CHECK(std::abs(fit.slope - a) <= 0.05);
    CHECK(fit.slope_stderr > 0);
  }
}

TEST_CASE("fit_exponent drops absorbed points and enforces the minimum count") {
  std::vector<double> t, y;
  for (int k = 0; k <= 50; ++k) {
    t.push_back(0.1 * k);
    // below the floor after t = 2.5
    y.push_back(t.back() < 2.5 ? -2.0 * t.back() : std::log(1e-13));
  }
  const ExponentFit fit = fit_exponent(t, y);
  CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(fit.t_hi <= 2.5);

  std::vector<double> t_short = {0, 1, 2}, y_short = {0, -1, -2};
  CHECK_THROWS_AS(fit_exponent(t_short, y_short), ValidationError);

  std::vector<double> all_absorbed(60, std::log(1e-14)), tt;
  for (int k = 0; k < 60; ++k) tt.push_back(k * 0.1);
  CHECK_THROWS_AS(fit_exponent(tt, all_absorbed), ValidationError);
}

TEST_CASE("qubit_reference closed forms") {
  const auto left = qubit_reference(1.0, 0.5, 0.0);
  CHECK(left.alpha0 == 1.0);
  CHECK(left.alpha0_prime == 1.0);
  CHECK(left.alpha1 == 0.5);
  CHECK(left.as_exponent == -1.5);

  const auto right = qubit_reference(1.0, 2.0, 0.0);
  CHECK(right.alpha1 == 8.0);
  CHECK(right.as_exponent == -9.0);

  const auto flat = qubit_reference(Complex(0.6, 0.8), Complex(0.4, 0.9), Complex(0.4, -0.3));
  CHECK(flat.alpha0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(flat.alpha1 == doctest::Approx(0.0).epsilon(1e-12));  // equal real parts
  CHECK(flat.as_exponent == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("qubit_reference agrees with the stability-module numerics") {
  for (auto [ls, lr] : {std::pair{0.5, 0.0}, std::pair{2.0, 0.0}, std::pair{0.9, 0.4}}) {
    auto [model, split] = testing::qubit_model(1.0, ls, lr);
    const auto ref = qubit_reference(1.0, ls, lr);
    CHECK(std::abs(ref.alpha0 - alpha0(model, split)) <= 1e-10);
    CHECK(std::abs(ref.alpha0_prime - alpha0_prime(model, split)) <= 1e-10);
    CHECK(std::abs(ref.alpha1 - alpha1(model, split).value) <= 1e-6);
  }
}

TEST_CASE("compare_rates checks both bounds and reports the hierarchy") {
  auto [model, split] = testing::qubit_model(1.0, 0.5, 0.0);
  const auto report = analyze_stability(model, split);
  REQUIRE(report.beta0 >= report.alpha0);  // -beta0 <= -alpha0 always

  std::vector<ExponentFit> fits;
  for (double s : {-1.45, -1.52, -1.62, -1.38, -1.55}) {
    ExponentFit f;
    f.slope = s;
    f.slope_stderr = 0.05;
    fits.push_back(f);
  }
  ExponentFit mean_fit;
  mean_fit.slope = -0.98;
  mean_fit.slope_stderr = 0.02;

  const auto cmp = compare_rates(report, fits, mean_fit);
  CHECK(cmp.has_data);
  CHECK(cmp.median_slope == doctest::Approx(-1.52));
  CHECK(cmp.iqr_lo <= cmp.median_slope);
  CHECK(cmp.iqr_hi >= cmp.median_slope);
  CHECK(cmp.as_bound_ok);           // -1.52 <= -1.5 + slack
  CHECK(*cmp.mean_bound_ok);        // -0.98 <= -1 + slack
  const auto j = comparison_to_json(cmp);
  CHECK(j["schema_version"] == 1);
  CHECK(j["almost_sure"]["bound_respected"].get<bool>());

  // A mean slope far above the bound fails.
  mean_fit.slope = -0.3;
  const auto bad = compare_rates(report, fits, mean_fit);
  CHECK_FALSE(*bad.mean_bound_ok);

  // No usable fits at all: report "no data" instead of a verdict.
  const auto empty = compare_rates(report, {}, std::nullopt);
  CHECK(!empty.has_data);
}

TEST_CASE("compare_rates requires GAS") {
  auto [model, split] = testing::qubit_model(1.0, 0.5, 0.0);
  auto report = analyze_stability(model, split);
  report.gas = false;
  CHECK_THROWS_AS(compare_rates(report, {}, std::nullopt), PreconditionError);
}

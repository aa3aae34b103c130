#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fcu {

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  /// Absent when the actuals have zero variance.
  std::optional<double> r2;
};

/// Errors e = y - yhat: mse = mean e^2, mae = mean |e|, r2 = 1 - sum e^2 / sum (y - mean y)^2.
Metrics error_measures(std::span<const double> y, std::span<const double> yhat);

/// Squared forecast errors of one bin or model.
struct ErrorSample {
  std::string label;
  std::vector<double> values;
};

/// Validates the invariants (finite, non-negative). Throws std::invalid_argument.
void validate(const ErrorSample& sample);

enum class FitMethod { mle, moments };
std::string_view to_string(FitMethod m);

/// Gamma(shape, scale) fit; a chi-square with nu d.o.f. scaled by s is gamma(nu/2, 2s).
struct GammaFit {
  double shape = 1.0;
  double scale = 1.0;
  std::size_t n = 0;
  FitMethod method = FitMethod::mle;

  double mean() const { return shape * scale; }
};

/// Values below this are clamped before fitting since the log-likelihood diverges at 0.
inline constexpr double kZeroClamp = 1e-12;

/// Moments: shape = m^2 / v, scale = v / m with the unbiased sample variance.
/// MLE: Newton on log(k) - digamma(k) = log(mean) - mean(log x), started from the moment
/// estimate; falls back to moments (method = moments) when Newton fails.
GammaFit fit_gamma(const ErrorSample& sample, FitMethod method = FitMethod::mle);

double gamma_log_pdf(double x, double shape, double scale);

/// KL(p || q) between two gamma densities, closed form.
double kld_gamma(const GammaFit& p, const GammaFit& q);

struct KwResult {
  double h = 0.0;
  int dof = 0;
  double p_value = 1.0;
  /// 1 - sum(t^3 - t) / (N^3 - N) over tie groups.
  double tie_correction = 1.0;
  double alpha = 0.05;
  bool significant = false;
};

/// Kruskal-Wallis H test with mid-ranks and tie correction; p from the chi-square survival
/// function with groups-1 d.o.f. Returns nullopt when every pooled value is identical.
std::optional<KwResult> kruskal_wallis(std::span<const ErrorSample> groups, double alpha = 0.05);
std::optional<KwResult> kruskal_wallis(std::span<const std::vector<double>> groups, double alpha = 0.05);

} // namespace fcu

#include "fcu/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fcu/special.hpp"

namespace fcu {

Metrics error_measures(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("error_measures: length mismatch");
  if (y.empty()) throw std::invalid_argument("error_measures: empty input");
  const double n = static_cast<double>(y.size());
  double sse = 0.0, sae = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    sse += e * e;
    sae += std::abs(e);
    y_mean += y[i];
  }
  y_mean /= n;
  double sst = 0.0;
  for (double v : y) sst += (v - y_mean) * (v - y_mean);
  Metrics m{sse / n, sae / n, std::nullopt};
  if (sst > 0.0) m.r2 = 1.0 - sse / sst;
  return m;
}

void validate(const ErrorSample& sample) {
  for (double v : sample.values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("error sample '" + sample.label + "' holds a negative or non-finite value");
    }
  }
}

std::string_view to_string(FitMethod m) { return m == FitMethod::mle ? "mle" : "moments"; }

namespace {

GammaFit moments_fit(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n - 1.0;
  if (!(mean > 0.0)) throw std::invalid_argument("gamma fit needs a positive sample mean");
  if (!(var > 0.0)) throw std::invalid_argument("gamma fit needs a non-degenerate sample");
  return GammaFit{mean * mean / var, var / mean, x.size(), FitMethod::moments};
}

} // namespace

GammaFit fit_gamma(const ErrorSample& sample, FitMethod method) {
  validate(sample);
  if (sample.values.size() < 2) throw std::invalid_argument("gamma fit needs at least two values");
  std::vector<double> x(sample.values);
  for (double& v : x) v = std::max(v, kZeroClamp);
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) {
    throw std::invalid_argument("gamma fit on degenerate sample '" + sample.label + "' (all values equal)");
  }
  const GammaFit start = moments_fit(x);
  if (method == FitMethod::moments) return start;

  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double mean_log = 0.0;
  for (double v : x) mean_log += std::log(v);
  mean_log /= n;
  const double s = std::log(mean) - mean_log;
  if (!(s > 0.0)) return start;

  double k = start.shape;
  for (int it = 0; it < 200; ++it) {
    const double f = std::log(k) - digamma(k) - s;
    const double df = 1.0 / k - trigamma(k);
    double next = k - f / df;
    if (!(next > 0.0) || !std::isfinite(next)) next = 0.5 * k;
    const double step = std::abs(next - k);
    k = next;
    if (step < 1e-10 * std::max(1.0, k)) {
      return GammaFit{k, mean / k, x.size(), FitMethod::mle};
    }
  }
  return start;
}

double gamma_log_pdf(double x, double shape, double scale) {
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double kld_gamma(const GammaFit& p, const GammaFit& q) {
  for (const auto* g : {&p, &q}) {
    if (!(g->shape > 0.0 && g->scale > 0.0) || !std::isfinite(g->shape) || !std::isfinite(g->scale)) {
      throw std::invalid_argument("kld_gamma: invalid gamma parameters");
    }
  }
  if (p.shape == q.shape && p.scale == q.scale) return 0.0;
  const double kl = (p.shape - q.shape) * digamma(p.shape) - std::lgamma(p.shape) + std::lgamma(q.shape) +
                    q.shape * (std::log(q.scale) - std::log(p.scale)) + p.shape * (p.scale - q.scale) / q.scale;
  return std::max(kl, 0.0);
}

std::optional<KwResult> kruskal_wallis(std::span<const std::vector<double>> groups, double alpha) {
  if (groups.size() < 2) throw std::invalid_argument("Kruskal-Wallis needs at least two groups");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  struct Entry {
    double value;
    std::size_t group;
  };
  std::vector<Entry> pooled;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw std::invalid_argument("Kruskal-Wallis group " + std::to_string(g) + " is empty");
    for (double v : groups[g]) pooled.push_back({v, g});
  }
  const std::size_t N = pooled.size();
  if (N < 3) throw std::invalid_argument("Kruskal-Wallis needs at least three pooled values");
  std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });

  std::vector<double> rank_sum(groups.size(), 0.0);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < N;) {
    std::size_t j = i + 1;
    while (j < N && pooled[j].value == pooled[i].value) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) rank_sum[pooled[k].group] += mid_rank;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double Nd = static_cast<double>(N);
  const double correction = 1.0 - tie_term / (Nd * Nd * Nd - Nd);
  if (!(correction > 0.0)) return std::nullopt;

  double sum = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    sum += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
  }
  const double h_raw = 12.0 / (Nd * (Nd + 1.0)) * sum - 3.0 * (Nd + 1.0);
  KwResult r;
  r.h = std::max(0.0, h_raw / correction);
  r.dof = static_cast<int>(groups.size()) - 1;
  r.p_value = std::clamp(chi_square_sf(r.h, r.dof), 0.0, 1.0);
  r.tie_correction = correction;
  r.alpha = alpha;
  r.significant = r.p_value < alpha;
  return r;
}

std::optional<KwResult> kruskal_wallis(std::span<const ErrorSample> groups, double alpha) {
  std::vector<std::vector<double>> values;
  values.reserve(groups.size());
  for (const auto& g : groups) values.push_back(g.values);
  return kruskal_wallis(std::span<const std::vector<double>>(values), alpha);
}

} // namespace fcu

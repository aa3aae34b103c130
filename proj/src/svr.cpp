#include "fcu/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fcu {

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double svr_dual_objective(const Matrix& X, std::span<const double> y, std::span<const double> beta,
                          double epsilon, double gamma) {
  const std::size_t n = X.rows();
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (beta[i] == 0.0) continue;
    lin += y[i] * beta[i] - epsilon * std::abs(beta[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (beta[j] != 0.0) quad += beta[i] * beta[j] * rbf_kernel(X.row(i), X.row(j), gamma);
    }
  }
  return -0.5 * quad + lin;
}

namespace {

constexpr std::size_t kDenseKernelLimit = 5000;

class KernelRows {
public:
  KernelRows(const Matrix& X, double gamma) : X_(X), gamma_(gamma), n_(X.rows()) {
    if (n_ <= kDenseKernelLimit) {
      dense_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i) {
        dense_[i * n_ + i] = 1.0;
        for (std::size_t j = i + 1; j < n_; ++j) {
          const double k = rbf_kernel(X.row(i), X.row(j), gamma);
          dense_[i * n_ + j] = k;
          dense_[j * n_ + i] = k;
        }
      }
    } else {
      scratch_a_.resize(n_);
      scratch_b_.resize(n_);
    }
  }

  std::span<const double> row(std::size_t i, bool second) {
    if (!dense_.empty()) return {dense_.data() + i * n_, n_};
    auto& buf = second ? scratch_b_ : scratch_a_;
    for (std::size_t j = 0; j < n_; ++j) buf[j] = rbf_kernel(X_.row(i), X_.row(j), gamma_);
    return buf;
  }

private:
  const Matrix& X_;
  double gamma_;
  std::size_t n_;
  std::vector<double> dense_;
  std::vector<double> scratch_a_, scratch_b_;
};

double pair_value(double t, double eta, double g, double beta_i, double beta_j, double eps) {
  return -0.5 * eta * t * t + g * t - eps * (std::abs(beta_i + t) + std::abs(beta_j - t));
}

} // namespace

SvrFit train_svr(const Matrix& X, std::span<const double> y, const SvrOptions& options) {
  if (!(options.C > 0.0)) throw std::invalid_argument("SVR C must be positive");
  if (!(options.epsilon >= 0.0)) throw std::invalid_argument("SVR epsilon must be non-negative");
  if (!(options.gamma > 0.0)) throw std::invalid_argument("SVR gamma must be positive");
  if (X.rows() == 0 || X.rows() != y.size()) throw std::invalid_argument("SVR: bad training shape");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("SVR: non-finite feature value");
  }

  const std::size_t n = X.rows();
  const double C = options.C;
  const double eps = options.epsilon;
  KernelRows kernel(X, options.gamma);

  std::vector<double> beta(n, 0.0);
  std::vector<double> grad(y.begin(), y.end());  // y - K beta
  double objective = 0.0;

  auto up_rate = [&](std::size_t i) { return beta[i] >= 0.0 ? grad[i] - eps : grad[i] + eps; };
  auto down_rate = [&](std::size_t i) { return beta[i] > 0.0 ? grad[i] - eps : grad[i] + eps; };

  SvrFit fit;
  const long max_iter = static_cast<long>(options.max_sweeps) * static_cast<long>(n);
  double violation = 0.0;
  long it = 0;
  for (;; ++it) {
    std::size_t best_up = n, best_down = n;
    double max_up = -std::numeric_limits<double>::infinity();
    double min_down = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (beta[k] < C) {
        const double r = up_rate(k);
        if (r > max_up) {
          max_up = r;
          best_up = k;
        }
      }
      if (beta[k] > -C) {
        const double r = down_rate(k);
        if (r < min_down) {
          min_down = r;
          best_down = k;
        }
      }
    }
    violation = (best_up < n && best_down < n) ? max_up - min_down : 0.0;
    if (violation < options.tol) {
      fit.converged = true;
      break;
    }
    if (it >= max_iter) break;

    const std::size_t i = best_up;
    const std::size_t j = best_down;
    if (i == j) {
      fit.converged = true;
      break;
    }
    const auto ki = kernel.row(i, false);
    const auto kj = kernel.row(j, true);
    const double eta = ki[i] + kj[j] - 2.0 * ki[j];
    const double g = grad[i] - grad[j];
    const double lo = std::max(-C - beta[i], beta[j] - C);
    const double hi = std::min(C - beta[i], beta[j] + C);

    double candidates[10];
    int nc = 0;
    candidates[nc++] = lo;
    candidates[nc++] = hi;
    if (-beta[i] > lo && -beta[i] < hi) candidates[nc++] = -beta[i];
    if (beta[j] > lo && beta[j] < hi) candidates[nc++] = beta[j];
    if (eta > 1e-12) {
      for (double si : {-1.0, 1.0}) {
        for (double sj : {-1.0, 1.0}) {
          candidates[nc++] = std::clamp((g - eps * (si - sj)) / eta, lo, hi);
        }
      }
    }
    double best_t = 0.0;
    double best_val = pair_value(0.0, eta, g, beta[i], beta[j], eps);
    const double base = best_val;
    for (int c = 0; c < nc; ++c) {
      const double v = pair_value(candidates[c], eta, g, beta[i], beta[j], eps);
      if (v > best_val) {
        best_val = v;
        best_t = candidates[c];
      }
    }
    if (best_t == 0.0) break;  // numerically stalled

    beta[i] = std::clamp(beta[i] + best_t, -C, C);
    beta[j] = std::clamp(beta[j] - best_t, -C, C);
    for (std::size_t k = 0; k < n; ++k) grad[k] -= best_t * (ki[k] - kj[k]);
    objective += best_val - base;

    if ((it + 1) % static_cast<long>(n) == 0) fit.objective_trace.push_back(objective);
  }
  fit.iterations = it;
  fit.max_violation = violation;
  fit.objective_trace.push_back(objective);

  // Bias from free variables where the KKT conditions pin it exactly; otherwise the
  // midpoint of the feasible interval.
  double bias_sum = 0.0;
  std::size_t n_free = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    if (beta[k] > 0.0 && beta[k] < C) {
      bias_sum += grad[k] - eps;
      ++n_free;
    } else if (beta[k] < 0.0 && beta[k] > -C) {
      bias_sum += grad[k] + eps;
      ++n_free;
    }
    if (beta[k] < C) lower = std::max(lower, up_rate(k));
    if (beta[k] > -C) upper = std::min(upper, down_rate(k));
  }
  double bias = 0.0;
  if (n_free > 0) {
    bias = bias_sum / static_cast<double>(n_free);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    bias = 0.5 * (lower + upper);
  } else if (std::isfinite(lower)) {
    bias = lower;
  } else if (std::isfinite(upper)) {
    bias = upper;
  }

  fit.model.C = C;
  fit.model.epsilon = eps;
  fit.model.gamma = options.gamma;
  fit.model.bias = bias;
  std::vector<std::size_t> sv;
  for (std::size_t k = 0; k < n; ++k) {
    if (beta[k] != 0.0) {
      sv.push_back(k);
      fit.model.dual_coef.push_back(beta[k]);
    }
  }
  fit.model.support_vectors = X.select_rows(sv);
  if (sv.empty()) fit.model.support_vectors = Matrix(0, X.cols());
  fit.beta = std::move(beta);
  return fit;
}

std::vector<double> predict(const SvrModel& model, const Matrix& X) {
  if (X.cols() != model.support_vectors.cols()) {
    throw std::invalid_argument("SVR predict: expected " + std::to_string(model.support_vectors.cols()) +
                                " features, got " + std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows(), model.bias);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < model.dual_coef.size(); ++k) {
      s += model.dual_coef[k] * rbf_kernel(model.support_vectors.row(k), X.row(r), model.gamma);
    }
    out[r] += s;
  }
  return out;
}

} // namespace fcu

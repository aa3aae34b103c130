#include "fcu/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace fcu {

std::string_view to_string(Activation a) {
  switch (a) {
  case Activation::tanh: return "tanh";
  case Activation::relu: return "relu";
  case Activation::identity: return "identity";
  }
  return "tanh";
}

Activation parse_activation(std::string_view text) {
  if (text == "tanh") return Activation::tanh;
  if (text == "relu") return Activation::relu;
  if (text == "identity" || text == "linear") return Activation::identity;
  throw std::invalid_argument("unknown activation: " + std::string(text));
}

std::size_t MlpModel::n_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.rows() * l.weights.cols() + l.bias.size();
  return n;
}

namespace {

double activate(Activation a, double z) {
  switch (a) {
  case Activation::tanh: return std::tanh(z);
  case Activation::relu: return z > 0.0 ? z : 0.0;
  case Activation::identity: return z;
  }
  return z;
}

// Derivative expressed through the pre-activation z and the activation value a.
double activate_derivative(Activation act, double z, double a) {
  switch (act) {
  case Activation::tanh: return 1.0 - a * a;
  case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
  case Activation::identity: return 1.0;
  }
  return 1.0;
}

struct Workspace {
  std::vector<std::vector<double>> z;  // pre-activations per layer
  std::vector<std::vector<double>> a;  // a[0] = input, a[l+1] = output of layer l
  std::vector<std::vector<double>> delta;

  explicit Workspace(const MlpModel& m) {
    a.resize(m.layers.size() + 1);
    z.resize(m.layers.size());
    delta.resize(m.layers.size());
    a[0].resize(m.n_inputs());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      z[l].resize(m.layers[l].weights.rows());
      a[l + 1].resize(m.layers[l].weights.rows());
      delta[l].resize(m.layers[l].weights.rows());
    }
  }
};

double forward(const MlpModel& m, std::span<const double> x, Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.a[0].begin());
  const std::size_t last = m.layers.size() - 1;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    const auto& in = ws.a[l];
    for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
      const auto w = layer.weights.row(o);
      double s = layer.bias[o];
      for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * in[i];
      ws.z[l][o] = s;
      ws.a[l + 1][o] = l == last ? s : activate(m.activation, s);
    }
  }
  return ws.a.back()[0];
}

// Accumulates scale * d(output)/d(params) into grad, in flatten_parameters order.
void backward(const MlpModel& m, Workspace& ws, double scale, std::span<double> grad,
              std::span<const std::size_t> offsets) {
  const std::size_t L = m.layers.size();
  ws.delta[L - 1][0] = scale;
  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = m.layers[l];
    const auto& in = ws.a[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + layer.weights.rows() * layer.weights.cols();
    for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
      const double d = ws.delta[l][o];
      gb[o] += d;
      double* row = gw + o * layer.weights.cols();
      for (std::size_t i = 0; i < in.size(); ++i) row[i] += d * in[i];
    }
    if (l == 0) break;
    auto& prev = ws.delta[l - 1];
    std::fill(prev.begin(), prev.end(), 0.0);
    for (std::size_t o = 0; o < layer.weights.rows(); ++o) {
      const double d = ws.delta[l][o];
      const auto w = layer.weights.row(o);
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] += w[i] * d;
    }
    for (std::size_t i = 0; i < prev.size(); ++i) {
      prev[i] *= activate_derivative(m.activation, ws.z[l - 1][i], ws.a[l][i]);
    }
  }
}

std::vector<std::size_t> parameter_offsets(const MlpModel& m) {
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& l : m.layers) {
    offsets.push_back(off);
    off += l.weights.rows() * l.weights.cols() + l.bias.size();
  }
  return offsets;
}

double training_mse(const MlpModel& m, const Matrix& X, std::span<const double> y) {
  Workspace ws(m);
  double s = 0.0;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double e = forward(m, X.row(r), ws) - y[r];
    s += e * e;
  }
  return s / static_cast<double>(X.rows());
}

} // namespace

MlpModel init_mlp(std::size_t n_inputs, std::span<const int> hidden_sizes, Activation activation,
                  std::uint64_t seed, bool zero_init) {
  if (n_inputs == 0) throw std::invalid_argument("MLP needs at least one input");
  MlpModel m;
  m.activation = activation;
  std::mt19937_64 rng(seed);
  std::size_t fan_in = n_inputs;
  std::vector<std::size_t> widths;
  for (int h : hidden_sizes) {
    if (h <= 0) throw std::invalid_argument("hidden layer sizes must be positive");
    widths.push_back(static_cast<std::size_t>(h));
  }
  widths.push_back(1);
  for (auto fan_out : widths) {
    DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
    if (!zero_init) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (std::size_t o = 0; o < fan_out; ++o) {
        for (auto& w : layer.weights.row(o)) w = dist(rng);
      }
    }
    m.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return m;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> out;
  out.reserve(model.n_parameters());
  for (const auto& l : model.layers) {
    out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void assign_parameters(MlpModel& model, std::span<const double> params) {
  if (params.size() != model.n_parameters()) throw std::invalid_argument("parameter count mismatch");
  std::size_t k = 0;
  for (auto& l : model.layers) {
    for (std::size_t o = 0; o < l.weights.rows(); ++o) {
      for (auto& w : l.weights.row(o)) w = params[k++];
    }
    for (auto& b : l.bias) b = params[k++];
  }
}

double mlp_loss_and_gradient(const MlpModel& model, const Matrix& X, std::span<const double> y,
                             std::vector<double>* gradient) {
  if (X.rows() == 0 || X.rows() != y.size()) throw std::invalid_argument("MLP: bad data shape");
  if (X.cols() != model.n_inputs()) throw std::invalid_argument("MLP: input width mismatch");
  const auto offsets = parameter_offsets(model);
  if (gradient) gradient->assign(model.n_parameters(), 0.0);
  Workspace ws(model);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  double loss = 0.0;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double e = forward(model, X.row(r), ws) - y[r];
    loss += 0.5 * e * e * inv_n;
    if (gradient) backward(model, ws, e * inv_n, *gradient, offsets);
  }
  return loss;
}

MlpFit train_mlp(const Matrix& X, std::span<const double> y, const MlpOptions& options) {
  if (X.rows() == 0 || X.rows() != y.size()) throw std::invalid_argument("MLP: bad data shape");
  if (options.epochs < 0 || options.batch_size < 1) throw std::invalid_argument("MLP: bad schedule");
  if (!(options.learning_rate > 0.0)) throw std::invalid_argument("MLP: learning rate must be positive");

  MlpFit fit;
  fit.model = init_mlp(X.cols(), options.hidden_sizes, options.activation, options.seed, options.zero_init);
  auto& m = fit.model;
  const auto offsets = parameter_offsets(m);
  const std::size_t n_params = m.n_parameters();
  std::vector<double> params = flatten_parameters(m);
  std::vector<double> velocity(n_params, 0.0);
  std::vector<double> grad(n_params, 0.0);
  Workspace ws(m);

  std::mt19937_64 rng(options.seed ^ 0x5deece66dULL);
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  fit.loss_trace.push_back(training_mse(m, X, y));
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const auto r = order[b];
        const double e = forward(m, X.row(r), ws) - y[r];
        backward(m, ws, e * inv_b, grad, offsets);
      }
      for (std::size_t k = 0; k < n_params; ++k) {
        velocity[k] = options.momentum * velocity[k] - options.learning_rate * grad[k];
        params[k] += velocity[k];
      }
      assign_parameters(m, params);
    }
    const double mse = training_mse(m, X, y);
    if (!std::isfinite(mse)) {
      throw std::runtime_error("MLP training diverged at epoch " + std::to_string(epoch) +
                               " (learning_rate=" + std::to_string(options.learning_rate) + ")");
    }
    fit.loss_trace.push_back(mse);
  }
  return fit;
}

std::vector<double> predict(const MlpModel& model, const Matrix& X) {
  if (X.cols() != model.n_inputs()) {
    throw std::invalid_argument("MLP predict: expected " + std::to_string(model.n_inputs()) +
                                " features, got " + std::to_string(X.cols()));
  }
  Workspace ws(model);
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = forward(model, X.row(r), ws);
  return out;
}

} // namespace fcu

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fcu/matrix.hpp"

namespace fcu {

enum class Activation { tanh, relu, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);

struct DenseLayer {
  /// out x in
  Matrix weights;
  std::vector<double> bias;
};

/// Fully connected net: hidden layers use `activation`, the output layer is one linear unit.
struct MlpModel {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::tanh;

  std::size_t n_inputs() const { return layers.empty() ? 0 : layers.front().weights.cols(); }
  std::size_t n_parameters() const;
};

struct MlpOptions {
  /// Empty means a purely linear model.
  std::vector<int> hidden_sizes{16};
  Activation activation = Activation::tanh;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int epochs = 40;
  int batch_size = 32;
  std::uint64_t seed = 0;
  /// All weights and biases start at zero instead of Glorot-uniform.
  bool zero_init = false;
};

struct MlpFit {
  MlpModel model;
  /// Training MSE before the first epoch (index 0) and after each epoch.
  std::vector<double> loss_trace;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpModel init_mlp(std::size_t n_inputs, std::span<const int> hidden_sizes, Activation activation,
                  std::uint64_t seed, bool zero_init = false);

/// Mini-batch SGD (with momentum) on the mean squared error. Throws std::runtime_error
/// when the loss turns non-finite.
MlpFit train_mlp(const Matrix& X, std::span<const double> y, const MlpOptions& options);

/// Loss (1/2n) sum (f(x_i) - y_i)^2 and, when `gradient` is non-null, its gradient with
/// respect to flatten_parameters(model).
double mlp_loss_and_gradient(const MlpModel& model, const Matrix& X, std::span<const double> y,
                             std::vector<double>* gradient);

/// Layer by layer: weights row-major, then biases.
std::vector<double> flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, std::span<const double> params);

std::vector<double> predict(const MlpModel& model, const Matrix& X);

} // namespace fcu

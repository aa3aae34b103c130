#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fcu/gbrt.hpp"
#include "fcu/lasso.hpp"
#include "fcu/matrix.hpp"
#include "fcu/mlp.hpp"
#include "fcu/svr.hpp"

namespace fcu {

enum class ModelFamily { lasso, svr, mlp, gbrt };

inline constexpr std::array<ModelFamily, 4> kAllFamilies{ModelFamily::lasso, ModelFamily::svr,
                                                         ModelFamily::mlp, ModelFamily::gbrt};

/// "LASSO", "SVR", "MLP", "GBRT".
std::string_view to_string(ModelFamily f);
/// Case-insensitive inverse of to_string.
ModelFamily parse_family(std::string_view text);

struct LassoParams {
  double lambda = 1e-3;
};
struct SvrParams {
  double C = 1.0;
  double epsilon = 0.05;
  double gamma = 0.1;
};
struct MlpParams {
  std::vector<int> hidden_sizes{16};
  double learning_rate = 1e-2;
};
struct GbrtParams {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
};

/// One grid-search candidate.
using Hyperparams = std::variant<LassoParams, SvrParams, MlpParams, GbrtParams>;

ModelFamily family_of(const Hyperparams& h);
/// Compact `key=value` rendering, stable across runs.
std::string describe(const Hyperparams& h);

/// Solver settings that are not grid-searched.
struct TrainingSettings {
  double lasso_tol = 1e-6;
  int lasso_max_iter = 10000;
  double svr_tol = 1e-4;
  int svr_max_sweeps = 200;
  /// Larger training sets are subsampled (seeded) before the O(n^2) kernel solve.
  std::size_t svr_max_samples = 2000;
  Activation mlp_activation = Activation::tanh;
  int mlp_epochs = 40;
  int mlp_batch_size = 32;
  double mlp_momentum = 0.9;
  int gbrt_min_leaf = 5;
};

struct TrainingInfo {
  std::string hyperparameters;
  long iterations = 0;
  bool converged = true;
  double final_training_loss = 0.0;
};

/// A trained model of any family behind one prediction interface.
class Predictor {
public:
  using Model = std::variant<LassoModel, SvrModel, MlpModel, GbrtModel>;

  Predictor() = default;
  Predictor(Model model, TrainingInfo info) : model_(std::move(model)), info_(std::move(info)) {}

  ModelFamily family() const;
  const Model& model() const { return model_; }
  const TrainingInfo& info() const { return info_; }

  /// Raw model output; no clipping. Throws std::invalid_argument on a width mismatch.
  std::vector<double> predict(const Matrix& X) const;

private:
  Model model_;
  TrainingInfo info_;
};

Predictor train_model(const Hyperparams& params, const Matrix& X, std::span<const double> y,
                      const TrainingSettings& settings, std::uint64_t seed);

/// Versioned JSON document: {"format_version", "family", "training", "model"}.
std::string predictor_to_json(const Predictor& p);
Predictor predictor_from_json(std::string_view text);

} // namespace fcu

#include "fcu/predictor.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fcu/textio.hpp"

namespace fcu {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

json tree_to_json(const RegressionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
  }
  return nodes;
}

RegressionTree tree_from_json(const json& j) {
  RegressionTree t;
  for (const auto& n : j) {
    t.nodes.push_back(TreeNode{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                               n.at(3).get<int>(), n.at(4).get<double>()});
  }
  return t;
}

std::string format_param(double v) { return format_double(v); }

} // namespace

std::string_view to_string(ModelFamily f) {
  switch (f) {
  case ModelFamily::lasso: return "LASSO";
  case ModelFamily::svr: return "SVR";
  case ModelFamily::mlp: return "MLP";
  case ModelFamily::gbrt: return "GBRT";
  }
  return "LASSO";
}

ModelFamily parse_family(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto f : kAllFamilies) {
    if (to_string(f) == upper) return f;
  }
  throw std::invalid_argument("unknown model family: " + std::string(text));
}

ModelFamily family_of(const Hyperparams& h) {
  return std::visit(overloaded{[](const LassoParams&) { return ModelFamily::lasso; },
                               [](const SvrParams&) { return ModelFamily::svr; },
                               [](const MlpParams&) { return ModelFamily::mlp; },
                               [](const GbrtParams&) { return ModelFamily::gbrt; }},
                    h);
}

std::string describe(const Hyperparams& h) {
  return std::visit(
      overloaded{
          [](const LassoParams& p) { return "lambda=" + format_param(p.lambda); },
          [](const SvrParams& p) {
            return "C=" + format_param(p.C) + ";epsilon=" + format_param(p.epsilon) + ";gamma=" + format_param(p.gamma);
          },
          [](const MlpParams& p) {
            std::string hidden;
            for (std::size_t i = 0; i < p.hidden_sizes.size(); ++i) {
              hidden += (i ? "x" : "") + std::to_string(p.hidden_sizes[i]);
            }
            if (hidden.empty()) hidden = "none";
            return "hidden=" + hidden + ";learning_rate=" + format_param(p.learning_rate);
          },
          [](const GbrtParams& p) {
            return "n_trees=" + std::to_string(p.n_trees) + ";max_depth=" + std::to_string(p.max_depth) +
                   ";learning_rate=" + format_param(p.learning_rate);
          }},
      h);
}

ModelFamily Predictor::family() const {
  return static_cast<ModelFamily>(model_.index());
}

std::vector<double> Predictor::predict(const Matrix& X) const {
  return std::visit([&](const auto& m) { return fcu::predict(m, X); }, model_);
}

Predictor train_model(const Hyperparams& params, const Matrix& X, std::span<const double> y,
                      const TrainingSettings& settings, std::uint64_t seed) {
  TrainingInfo info;
  info.hyperparameters = describe(params);
  return std::visit(
      overloaded{
          [&](const LassoParams& p) {
            auto fit = train_lasso(X, y, p.lambda, settings.lasso_tol, settings.lasso_max_iter);
            info.iterations = fit.iterations;
            info.converged = fit.converged;
            info.final_training_loss = fit.objective;
            return Predictor(std::move(fit.model), info);
          },
          [&](const SvrParams& p) {
            SvrOptions opt{p.C, p.epsilon, p.gamma, settings.svr_tol, settings.svr_max_sweeps};
            SvrFit fit;
            if (X.rows() > settings.svr_max_samples) {
              std::vector<std::size_t> rows(X.rows());
              std::iota(rows.begin(), rows.end(), std::size_t{0});
              std::mt19937_64 rng(mix_seed(seed, 0x5f5));
              std::shuffle(rows.begin(), rows.end(), rng);
              rows.resize(settings.svr_max_samples);
              std::sort(rows.begin(), rows.end());
              const auto sub_y = select(y, std::span<const std::size_t>(rows));
              fit = train_svr(X.select_rows(rows), sub_y, opt);
            } else {
              fit = train_svr(X, y, opt);
            }
            info.iterations = fit.iterations;
            info.converged = fit.converged;
            info.final_training_loss = fit.objective_trace.back();
            return Predictor(std::move(fit.model), info);
          },
          [&](const MlpParams& p) {
            MlpOptions opt;
            opt.hidden_sizes = p.hidden_sizes;
            opt.activation = settings.mlp_activation;
            opt.learning_rate = p.learning_rate;
            opt.momentum = settings.mlp_momentum;
            opt.epochs = settings.mlp_epochs;
            opt.batch_size = settings.mlp_batch_size;
            opt.seed = seed;
            auto fit = train_mlp(X, y, opt);
            info.iterations = settings.mlp_epochs;
            info.final_training_loss = fit.loss_trace.back();
            return Predictor(std::move(fit.model), info);
          },
          [&](const GbrtParams& p) {
            GbrtOptions opt{p.n_trees, p.max_depth, p.learning_rate, settings.gbrt_min_leaf};
            opt.min_leaf = std::min<int>(opt.min_leaf, static_cast<int>(X.rows()));
            auto fit = train_gbrt(X, y, opt);
            info.iterations = p.n_trees;
            info.final_training_loss = fit.mse_trace.back();
            return Predictor(std::move(fit.model), info);
          }},
      params);
}

std::string predictor_to_json(const Predictor& p) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["family"] = std::string(to_string(p.family()));
  doc["training"] = {{"hyperparameters", p.info().hyperparameters},
                     {"iterations", p.info().iterations},
                     {"converged", p.info().converged},
                     {"final_training_loss", p.info().final_training_loss}};
  doc["model"] = std::visit(
      overloaded{
          [](const LassoModel& m) {
            return json{{"coefficients", m.coefficients}, {"intercept", m.intercept}, {"lambda", m.lambda}};
          },
          [](const SvrModel& m) {
            return json{{"support_vectors", matrix_to_json(m.support_vectors)},
                        {"dual_coef", m.dual_coef},
                        {"bias", m.bias},
                        {"C", m.C},
                        {"epsilon", m.epsilon},
                        {"gamma", m.gamma}};
          },
          [](const MlpModel& m) {
            json layers = json::array();
            for (const auto& l : m.layers) {
              layers.push_back({{"weights", matrix_to_json(l.weights)}, {"bias", l.bias}});
            }
            return json{{"activation", std::string(to_string(m.activation))}, {"layers", layers}};
          },
          [](const GbrtModel& m) {
            json trees = json::array();
            for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
            return json{{"initial_prediction", m.initial_prediction},
                        {"learning_rate", m.learning_rate},
                        {"n_inputs", m.n_inputs},
                        {"trees", trees}};
          }},
      p.model());
  return doc.dump() + "\n";
}

Predictor predictor_from_json(std::string_view text) {
  const json doc = json::parse(text);
  const int version = doc.at("format_version").get<int>();
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported model format version " + std::to_string(version));
  }
  TrainingInfo info;
  const auto& t = doc.at("training");
  info.hyperparameters = t.at("hyperparameters").get<std::string>();
  info.iterations = t.at("iterations").get<long>();
  info.converged = t.at("converged").get<bool>();
  info.final_training_loss = t.at("final_training_loss").get<double>();

  const auto& m = doc.at("model");
  switch (parse_family(doc.at("family").get<std::string>())) {
  case ModelFamily::lasso: {
    LassoModel lm{m.at("coefficients").get<std::vector<double>>(), m.at("intercept").get<double>(),
                  m.at("lambda").get<double>()};
    return Predictor(std::move(lm), info);
  }
  case ModelFamily::svr: {
    SvrModel sm;
    sm.support_vectors = matrix_from_json(m.at("support_vectors"));
    sm.dual_coef = m.at("dual_coef").get<std::vector<double>>();
    sm.bias = m.at("bias").get<double>();
    sm.C = m.at("C").get<double>();
    sm.epsilon = m.at("epsilon").get<double>();
    sm.gamma = m.at("gamma").get<double>();
    return Predictor(std::move(sm), info);
  }
  case ModelFamily::mlp: {
    MlpModel mm;
    mm.activation = parse_activation(m.at("activation").get<std::string>());
    for (const auto& l : m.at("layers")) {
      mm.layers.push_back(DenseLayer{matrix_from_json(l.at("weights")), l.at("bias").get<std::vector<double>>()});
    }
    return Predictor(std::move(mm), info);
  }
  case ModelFamily::gbrt: {
    GbrtModel gm;
    gm.initial_prediction = m.at("initial_prediction").get<double>();
    gm.learning_rate = m.at("learning_rate").get<double>();
    gm.n_inputs = m.at("n_inputs").get<std::size_t>();
    for (const auto& tr : m.at("trees")) gm.trees.push_back(tree_from_json(tr));
    return Predictor(std::move(gm), info);
  }
  }
  throw std::runtime_error("unreachable model family");
}

} // namespace fcu

#ifndef FEELSIM_LEARNING_HPP
#define FEELSIM_LEARNING_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "feelsim/data_model.hpp"

namespace feelsim {

enum class LossKind { mse_onehot, cross_entropy };
enum class ModelKind { logistic, mlp };

struct TrainingConfig {
  double learning_rate = 0.001;
  int epochs = 3;
  int batch_size = 16;
  LossKind loss_kind = LossKind::mse_onehot;
  ModelKind model_kind = ModelKind::logistic;
  std::vector<int> hidden_dims = {32};  // used when model_kind == mlp
};

struct ModelShape {
  int feature_dim = 0;
  int class_count = 0;
  std::vector<int> hidden;  // empty for logistic

  std::size_t param_count() const;
  bool operator==(const ModelShape&) const = default;
};

ModelShape model_shape(const TrainingConfig& cfg, int feature_dim, int class_count);

// Flat parameter vector. Logistic layout: W (C x d) row-major, then b (C).
// MLP layout: W1 (h x d), b1 (h), W2 (C x h), b2 (C) with tanh hidden units.
struct ModelParams {
  ModelShape shape;
  std::vector<double> values;
};

// Uniform init in [-0.05, 0.05].
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

struct LocalUpdate {
  int device_id = 0;
  ModelParams params;
  long long sample_count = 0;  // samples used this round
  double train_loss = 0.0;
};

// Class scores after softmax.
std::vector<double> predict(const ModelParams& params, const Sample& sample);

// Mean per-sample loss over the dataset.
double local_loss(const ModelParams& params, std::span<const Sample> data,
                  const TrainingConfig& cfg);

// Gradient of local_loss with respect to every parameter.
std::vector<double> loss_gradient(const ModelParams& params, std::span<const Sample> data,
                                  const TrainingConfig& cfg);

// Mini-batch SGD for cfg.epochs epochs with seeded per-epoch shuffling.
// The final short batch is used as-is. params_in is not modified.
LocalUpdate local_train(const ModelParams& params_in, std::span<const Sample> data,
                        const TrainingConfig& cfg, std::uint64_t seed, int device_id = 0);

// Weighted average with weights sample_count_k / total, summed in ascending
// device_id order.
ModelParams aggregate(const std::vector<LocalUpdate>& updates);

// Weighted mean of the participants' training losses under the same weights.
double global_loss(const std::vector<LocalUpdate>& updates);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

EvalResult evaluate(const ModelParams& params, std::span<const Sample> test,
                    const TrainingConfig& cfg);

}  // namespace feelsim

#endif

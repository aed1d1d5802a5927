#include "feelsim/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "feelsim/rng.hpp"

namespace feelsim {

namespace {

void softmax_inplace(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// Flat layout offsets. Logistic: [W (CxD), b (C)]. One-hidden-layer MLP:
// [W1 (HxD), b1 (H), W2 (CxH), b2 (C)].
struct Layout {
  int d = 0, c = 0, h = 0;  // h == 0 -> logistic
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;

  explicit Layout(const ModelShape& shape) {
    d = shape.feature_dim;
    c = shape.class_count;
    if (shape.hidden.size() > 1)
      throw std::invalid_argument("model: at most one hidden layer is supported");
    h = shape.hidden.empty() ? 0 : shape.hidden[0];
    if (h == 0) {
      w1 = 0;
      b1 = std::size_t(c) * d;
    } else {
      w1 = 0;
      b1 = std::size_t(h) * d;
      w2 = b1 + std::size_t(h);
      b2 = w2 + std::size_t(c) * h;
    }
  }

  std::size_t total() const {
    if (h == 0) return std::size_t(c) * d + c;
    return std::size_t(h) * d + h + std::size_t(c) * h + c;
  }
};

struct Forward {
  std::vector<double> hidden;  // tanh activations, empty for logistic
  std::vector<double> probs;   // softmax outputs
};

Forward forward(const Layout& L, const std::vector<double>& w, const Sample& s) {
  Forward f;
  if (static_cast<int>(s.features.size()) != L.d)
    throw std::invalid_argument("model: feature dimension mismatch");
  if (L.h == 0) {
    f.probs.resize(L.c);
    for (int j = 0; j < L.c; ++j) {
      double z = w[L.b1 + j];
      const double* row = &w[L.w1 + std::size_t(j) * L.d];
      for (int i = 0; i < L.d; ++i) z += row[i] * s.features[i];
      f.probs[j] = z;
    }
  } else {
    f.hidden.resize(L.h);
    for (int j = 0; j < L.h; ++j) {
      double z = w[L.b1 + j];
      const double* row = &w[L.w1 + std::size_t(j) * L.d];
      for (int i = 0; i < L.d; ++i) z += row[i] * s.features[i];
      f.hidden[j] = std::tanh(z);
    }
    f.probs.resize(L.c);
    for (int j = 0; j < L.c; ++j) {
      double z = w[L.b2 + j];
      const double* row = &w[L.w2 + std::size_t(j) * L.h];
      for (int i = 0; i < L.h; ++i) z += row[i] * f.hidden[i];
      f.probs[j] = z;
    }
  }
  softmax_inplace(f.probs);
  return f;
}

double sample_loss(const std::vector<double>& probs, int label, LossKind kind) {
  const int c = static_cast<int>(probs.size());
  if (kind == LossKind::mse_onehot) {
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      const double y = (j == label) ? 1.0 : 0.0;
      const double e = probs[j] - y;
      sum += e * e;
    }
    return sum / c;
  }
  return -std::log(std::max(probs[label], 1e-300));
}

// dLoss/dlogits for one sample.
std::vector<double> logit_gradient(const std::vector<double>& probs, int label, LossKind kind) {
  const int c = static_cast<int>(probs.size());
  std::vector<double> dz(c);
  if (kind == LossKind::mse_onehot) {
    // L = (1/C) sum_j (p_j - y_j)^2 with p = softmax(z):
    // dL/dz_j = (2/C) p_j ((p_j - y_j) - sum_m (p_m - y_m) p_m)
    double s = 0.0;
    for (int m = 0; m < c; ++m) {
      const double y = (m == label) ? 1.0 : 0.0;
      s += (probs[m] - y) * probs[m];
    }
    for (int j = 0; j < c; ++j) {
      const double y = (j == label) ? 1.0 : 0.0;
      dz[j] = (2.0 / c) * probs[j] * ((probs[j] - y) - s);
    }
  } else {
    for (int j = 0; j < c; ++j) dz[j] = probs[j] - ((j == label) ? 1.0 : 0.0);
  }
  return dz;
}

// Accumulates the gradient of the mean loss over [begin, end) of indices.
void accumulate_gradient(const Layout& L, const std::vector<double>& w,
                         std::span<const Sample> data, const std::vector<std::size_t>& order,
                         std::size_t begin, std::size_t end, LossKind kind,
                         std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv = 1.0 / static_cast<double>(end - begin);
  for (std::size_t t = begin; t < end; ++t) {
    const Sample& s = data[order[t]];
    const Forward f = forward(L, w, s);
    const std::vector<double> dz = logit_gradient(f.probs, s.label, kind);
    if (L.h == 0) {
      for (int j = 0; j < L.c; ++j) {
        const double g = dz[j] * inv;
        double* row = &grad[L.w1 + std::size_t(j) * L.d];
        for (int i = 0; i < L.d; ++i) row[i] += g * s.features[i];
        grad[L.b1 + j] += g;
      }
    } else {
      std::vector<double> dh(L.h, 0.0);
      for (int j = 0; j < L.c; ++j) {
        const double g = dz[j] * inv;
        double* row = &grad[L.w2 + std::size_t(j) * L.h];
        const double* w2row = &w[L.w2 + std::size_t(j) * L.h];
        for (int i = 0; i < L.h; ++i) {
          row[i] += g * f.hidden[i];
          dh[i] += g * w2row[i];
        }
        grad[L.b2 + j] += g;
      }
      for (int j = 0; j < L.h; ++j) {
        const double da = dh[j] * (1.0 - f.hidden[j] * f.hidden[j]);
        double* row = &grad[L.w1 + std::size_t(j) * L.d];
        for (int i = 0; i < L.d; ++i) row[i] += da * s.features[i];
        grad[L.b1 + j] += da;
      }
    }
  }
}

void check_shapes(const ModelParams& params) {
  const Layout L(params.shape);
  if (params.values.size() != L.total())
    throw std::invalid_argument("model: parameter vector does not match shape");
}

}  // namespace

std::size_t ModelShape::param_count() const { return Layout(*this).total(); }

ModelShape model_shape(const TrainingConfig& cfg, int feature_dim, int class_count) {
  ModelShape shape;
  shape.feature_dim = feature_dim;
  shape.class_count = class_count;
  if (cfg.model_kind == ModelKind::mlp) shape.hidden = cfg.hidden_dims;
  return shape;
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p;
  p.shape = shape;
  p.values.resize(shape.param_count());
  Rng rng(seed);
  for (double& v : p.values) v = rng.uniform(-0.05, 0.05);
  return p;
}

std::vector<double> predict(const ModelParams& params, const Sample& sample) {
  check_shapes(params);
  return forward(Layout(params.shape), params.values, sample).probs;
}

double local_loss(const ModelParams& params, std::span<const Sample> data,
                  const TrainingConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("local_loss: empty data");
  check_shapes(params);
  const Layout L(params.shape);
  double sum = 0.0;
  for (const Sample& s : data)
    sum += sample_loss(forward(L, params.values, s).probs, s.label, cfg.loss_kind);
  return sum / static_cast<double>(data.size());
}

std::vector<double> loss_gradient(const ModelParams& params, std::span<const Sample> data,
                                  const TrainingConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("loss_gradient: empty data");
  check_shapes(params);
  const Layout L(params.shape);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(params.values.size());
  accumulate_gradient(L, params.values, data, order, 0, data.size(), cfg.loss_kind, grad);
  return grad;
}

LocalUpdate local_train(const ModelParams& params_in, std::span<const Sample> data,
                        const TrainingConfig& cfg, std::uint64_t seed, int device_id) {
  if (data.empty()) throw std::invalid_argument("local_train: empty data");
  check_shapes(params_in);
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate < 0)
    throw std::invalid_argument("local_train: invalid training config");

  const Layout L(params_in.shape);
  LocalUpdate update;
  update.device_id = device_id;
  update.params = params_in;
  update.sample_count = static_cast<long long>(data.size());

  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(params_in.values.size());
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(begin + batch, order.size());
      accumulate_gradient(L, update.params.values, data, order, begin, end, cfg.loss_kind, grad);
      for (std::size_t i = 0; i < grad.size(); ++i)
        update.params.values[i] -= cfg.learning_rate * grad[i];
    }
  }
  update.train_loss = local_loss(update.params, data, cfg);
  return update;
}

ModelParams aggregate(const std::vector<LocalUpdate>& updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  std::vector<const LocalUpdate*> ordered;
  ordered.reserve(updates.size());
  long long total = 0;
  for (const LocalUpdate& u : updates) {
    if (u.sample_count < 1) throw std::invalid_argument("aggregate: sample_count < 1");
    if (!(u.params.shape == updates.front().params.shape))
      throw std::invalid_argument("aggregate: shape mismatch");
    ordered.push_back(&u);
    total += u.sample_count;
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const LocalUpdate* a, const LocalUpdate* b) { return a->device_id < b->device_id; });

  // Weighted mean in delta form around the first update: identical updates
  // aggregate to themselves exactly, with no floating-point drift.
  ModelParams out;
  out.shape = updates.front().params.shape;
  const std::vector<double>& base = ordered.front()->params.values;
  out.values = base;
  for (const LocalUpdate* u : ordered) {
    const double weight = static_cast<double>(u->sample_count) / static_cast<double>(total);
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] += weight * (u->params.values[i] - base[i]);
  }
  return out;
}

double global_loss(const std::vector<LocalUpdate>& updates) {
  if (updates.empty()) throw std::invalid_argument("global_loss: no updates");
  long long total = 0;
  for (const LocalUpdate& u : updates) {
    if (u.sample_count < 1) throw std::invalid_argument("global_loss: sample_count < 1");
    total += u.sample_count;
  }
  double loss = 0.0;
  for (const LocalUpdate& u : updates)
    loss += (static_cast<double>(u.sample_count) / static_cast<double>(total)) * u.train_loss;
  return loss;
}

EvalResult evaluate(const ModelParams& params, std::span<const Sample> test,
                    const TrainingConfig& cfg) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  check_shapes(params);
  const Layout L(params.shape);
  std::size_t correct = 0;
  double loss = 0.0;
  for (const Sample& s : test) {
    const Forward f = forward(L, params.values, s);
    const auto argmax =
        std::distance(f.probs.begin(), std::max_element(f.probs.begin(), f.probs.end()));
    if (static_cast<int>(argmax) == s.label) ++correct;
    loss += sample_loss(f.probs, s.label, cfg.loss_kind);
  }
  return {static_cast<double>(correct) / static_cast<double>(test.size()),
          loss / static_cast<double>(test.size())};
}

}  // namespace feelsim

#include "lwfa/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lwfa/error.hpp"
#include "lwfa/nn/engine.hpp"

namespace lwfa::nn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be positive");
  for (int e : lr_decay_epochs) {
    if (e < 0) throw ConfigError("lr_decay_epochs entries must be nonnegative");
  }
}

double TrainConfig::learning_rate_at(int epoch) const {
  double lr = learning_rate;
  for (int milestone : lr_decay_epochs) {
    if (epoch >= milestone) lr *= lr_decay_factor;
  }
  return lr;
}

namespace {

void check_dataset(const Network& net, std::span<const Sample> data) {
  if (data.empty()) throw DataError("training set is empty");
  for (const auto& s : data) {
    if (s.label >= net.num_classes()) {
      throw DataError("label " + std::to_string(s.label) + " outside [0, " +
                      std::to_string(net.num_classes()) + ")");
    }
    if (s.input.shape() != net.input_shape()) {
      throw DataError("training sample shape " + shape_to_string(s.input.shape()) +
                      " does not match network input " + shape_to_string(net.input_shape()));
    }
  }
}

}  // namespace

TrainResult train(Network net, std::span<const Sample> data, const TrainConfig& config) {
  return train_with_penalty(std::move(net), data, config, nullptr);
}

TrainResult train_with_penalty(Network net, std::span<const Sample> data,
                               const TrainConfig& config, TapPenalty* penalty) {
  config.validate();
  check_dataset(net, data);

  const std::size_t in_vol = shape_volume(net.input_shape());
  const std::size_t num_classes = net.num_classes();
  const std::size_t batch_cap = static_cast<std::size_t>(config.batch_size);
  auto& layers = net.mutable_layers();

  engine::ParamGrads<float> grads;
  engine::ParamGrads<float> velocity;
  velocity.reset(net);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);

  std::vector<float> batch_input;
  std::vector<std::size_t> batch_labels;
  std::vector<std::vector<float>> outputs;
  std::vector<float> grad_logits;
  std::vector<std::vector<float>> tap_grads;
  std::vector<std::span<const float>> tap_views;

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (penalty) penalty->begin_epoch(net, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    const float lr = static_cast<float>(config.learning_rate_at(epoch));
    const float mom = static_cast<float>(config.momentum);
    const float wd = static_cast<float>(config.weight_decay);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += batch_cap) {
      const std::size_t n = std::min(batch_cap, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      batch_input.resize(n * in_vol);
      batch_labels.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& s = data[idx[i]];
        std::copy(s.input.values().begin(), s.input.values().end(), batch_input.begin() + i * in_vol);
        batch_labels[i] = s.label;
      }

      const auto params = engine::views_of(net);
      engine::forward_pass<float>(net, params, batch_input, n, outputs);
      double loss = engine::cross_entropy<float>(outputs.back(), batch_labels, num_classes, grad_logits);

      tap_grads.clear();
      if (penalty) {
        const double beta = penalty->weight();
        tap_views.clear();
        for (std::size_t t = 1; t <= net.tap_count(); ++t) tap_views.emplace_back(outputs[net.tap_layer(t)]);
        tap_grads.assign(net.tap_count(), {});
        const double extra = penalty->evaluate(idx, tap_views, tap_grads);
        const auto ce_scale = static_cast<float>(1.0 - beta);
        for (auto& g : grad_logits) g *= ce_scale;
        for (auto& tg : tap_grads) {
          for (auto& g : tg) g *= static_cast<float>(beta);
        }
        loss = mixed_objective(beta, loss, extra);
      }

      grads.reset(net);
      engine::backward_pass<float>(net, params, batch_input, n, outputs, grad_logits, tap_grads, grads);

      for (std::size_t li = 0; li < layers.size(); ++li) {
        if (!layers[li].has_parameters()) continue;
        auto update = [&](std::span<float> w, std::vector<float>& g, std::vector<float>& v) {
          for (std::size_t j = 0; j < w.size(); ++j) {
            const float d = g[j] + wd * w[j];
            v[j] = mom * v[j] + d;
            w[j] -= lr * v[j];
          }
        };
        update(layers[li].weights.values(), grads.weights[li], velocity.weights[li]);
        update(layers[li].biases.values(), grads.biases[li], velocity.biases[li]);
      }
      epoch_loss += loss * static_cast<double>(n);
    }
    const double mean_loss = epoch_loss / static_cast<double>(data.size());
    if (!std::isfinite(mean_loss)) throw ComputationError("training diverged at epoch " + std::to_string(epoch));
    result.loss_history.push_back(mean_loss);
  }
  for (const auto& layer : layers) {
    for (float w : layer.weights.values()) {
      if (!std::isfinite(w)) throw ComputationError("training produced non-finite weights");
    }
  }
  result.network = std::move(net);
  return result;
}

double accuracy(const Network& net, std::span<const Sample> data) {
  if (data.empty()) throw DataError("accuracy of an empty set is undefined");
  std::size_t correct = 0;
  for (const auto& s : data) {
    if (forward(net, s.input).predicted_class == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lwfa::nn

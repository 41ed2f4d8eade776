#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lwfa/nn/network.hpp"

namespace lwfa::nn {

/// A labeled input. Labels are 0-based class indices.
struct Sample {
  Tensor input;
  std::size_t label = 0;

  bool operator==(const Sample&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 30;
  int batch_size = 32;
  std::vector<int> lr_decay_epochs;  // 0-based epochs at which the rate is multiplied
  double lr_decay_factor = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate_at(int epoch) const;
};

struct TrainResult {
  Network network;
  std::vector<double> loss_history;  // mean objective per epoch
};

/// Extra objective defined on tap activations, mixed in as
/// (1 - weight) * cross_entropy + weight * penalty.
class TapPenalty {
 public:
  virtual ~TapPenalty() = default;

  virtual double weight() const = 0;

  /// Called before every epoch with the current weights.
  virtual void begin_epoch(const Network& net, int epoch) = 0;

  /// `taps[k]` holds tap k+1's batch output (batch-major). Returns the penalty
  /// value for the batch and fills `tap_grads[k]` with its gradient (same
  /// layout; left empty for taps the penalty ignores).
  virtual double evaluate(std::span<const std::size_t> sample_indices,
                          const std::vector<std::span<const float>>& taps,
                          std::vector<std::vector<float>>& tap_grads) = 0;
};

/// (1 - weight) * cross_entropy + weight * penalty.
inline double mixed_objective(double weight, double cross_entropy, double penalty) {
  return (1.0 - weight) * cross_entropy + weight * penalty;
}

/// Mini-batch SGD with momentum, weight decay and a step-decay schedule on the
/// mean cross-entropy loss. Batches are drawn from a fresh seeded shuffle every
/// epoch; identical seeds give bit-identical weights.
TrainResult train(Network net, std::span<const Sample> data, const TrainConfig& config);

/// As train(), with `penalty` folded into the objective. A null penalty is
/// exactly train().
TrainResult train_with_penalty(Network net, std::span<const Sample> data,
                               const TrainConfig& config, TapPenalty* penalty);

/// Fraction of `data` the network labels correctly.
double accuracy(const Network& net, std::span<const Sample> data);

}  // namespace lwfa::nn

#pragma once

// Batched forward/backward kernels shared by inference, training and gradient
// checking. Templated on the scalar so gradient checks can run the same code
// in double precision.

#include <cstddef>
#include <span>
#include <vector>

#include "lwfa/nn/network.hpp"

namespace lwfa::nn::engine {

template <class T>
struct ParamViews {
  std::vector<std::span<const T>> weights;  // one entry per layer, empty when unused
  std::vector<std::span<const T>> biases;
};

template <class T>
struct ParamGrads {
  std::vector<std::vector<T>> weights;
  std::vector<std::vector<T>> biases;

  void reset(const Network& net);
};

ParamViews<float> views_of(const Network& net);

/// Runs the whole stack over `batch` inputs laid out back to back.
/// `outputs[i]` receives layer i's output for the batch.
template <class T>
void forward_pass(const Network& net, const ParamViews<T>& params, std::span<const T> input,
                  std::size_t batch, std::vector<std::vector<T>>& outputs);

/// Back-propagates `grad_logits` through the stack and accumulates parameter
/// gradients into `grads`. When `tap_grads` is non-empty, `tap_grads[k]` is
/// added to the gradient at tap k+1's output before flowing further down.
template <class T>
void backward_pass(const Network& net, const ParamViews<T>& params, std::span<const T> input,
                   std::size_t batch, const std::vector<std::vector<T>>& outputs,
                   std::span<const T> grad_logits,
                   const std::vector<std::vector<T>>& tap_grads, ParamGrads<T>& grads);

/// Mean softmax cross-entropy over the batch; writes d(loss)/d(logits).
template <class T>
double cross_entropy(std::span<const T> logits, std::span<const std::size_t> labels,
                     std::size_t num_classes, std::vector<T>& grad_logits);

}  // namespace lwfa::nn::engine

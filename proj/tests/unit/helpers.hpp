#pragma once

#include <random>
#include <vector>

#include "lwfa/nn/network.hpp"
#include "lwfa/nn/train.hpp"

namespace lwfa::test {

inline nn::Tensor random_tensor(const nn::Shape& shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(nn::shape_volume(shape));
  for (auto& x : v) x = u(rng);
  return nn::Tensor(shape, std::move(v));
}

// Random flat traces with the given per-tap widths, values in [lo, hi).
inline nn::ActivationTrace random_trace(const std::vector<std::size_t>& widths, std::mt19937_64& rng,
                                        float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  nn::ActivationTrace t;
  for (auto w : widths) {
    std::vector<float> v(w);
    for (auto& x : v) x = u(rng);
    t.taps.push_back(std::move(v));
  }
  return t;
}

inline nn::Network small_net(const char* blocks, nn::Shape input, std::size_t classes, std::uint64_t seed) {
  return nn::build_network({std::move(input), classes, nn::parse_blocks(blocks)}, seed);
}

// He init leaves biases at zero, so a unit fed only by dead ReLUs sits exactly on
// its own kink. Finite differences are meaningless there; jitter the biases.
inline nn::Network jitter_biases(nn::Network net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.1f, 0.1f);
  for (auto& layer : net.mutable_layers()) {
    for (auto& b : layer.biases.values()) b = u(rng);
  }
  return net;
}

}  // namespace lwfa::test

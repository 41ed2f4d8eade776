#include "lwfa/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lwfa/error.hpp"
#include "lwfa/nn/engine.hpp"

namespace lwfa::nn {

namespace {

struct DoubleParams {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  engine::ParamViews<double> views() const {
    engine::ParamViews<double> v;
    for (const auto& w : weights) v.weights.emplace_back(w);
    for (const auto& b : biases) v.biases.emplace_back(b);
    return v;
  }
};

// ReLU input signs and the first-max position of every pool window.
std::vector<std::size_t> kink_pattern(const Network& net, std::span<const double> x,
                                      const std::vector<std::vector<double>>& outputs) {
  std::vector<std::size_t> pat;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const auto& spec = net.layers()[li];
    const double* in = li == 0 ? x.data() : outputs[li - 1].data();
    if (spec.kind == LayerKind::relu) {
      for (std::size_t j = 0; j < shape_volume(net.layer_input_shape(li)); ++j) pat.push_back(in[j] > 0.0);
    } else if (spec.kind == LayerKind::max_pool) {
      const auto& is = net.layer_input_shape(li);
      const auto& os = net.layer_output_shape(li);
      const std::size_t w = spec.pool;
      for (std::size_t c = 0; c < is[0]; ++c) {
        const double* plane = in + c * is[1] * is[2];
        for (std::size_t oy = 0; oy < os[1]; ++oy) {
          for (std::size_t ox = 0; ox < os[2]; ++ox) {
            std::size_t arg = oy * w * is[2] + ox * w;
            for (std::size_t dy = 0; dy < w; ++dy) {
              for (std::size_t dx = 0; dx < w; ++dx) {
                const std::size_t idx = (oy * w + dy) * is[2] + ox * w + dx;
                if (plane[idx] > plane[arg]) arg = idx;
              }
            }
            pat.push_back(arg);
          }
        }
      }
    }
  }
  return pat;
}

struct Eval {
  double loss;
  std::vector<std::size_t> pattern;
};

Eval loss_at(const Network& net, const DoubleParams& p, std::span<const double> x, std::size_t label) {
  std::vector<std::vector<double>> outputs;
  engine::forward_pass<double>(net, p.views(), x, 1, outputs);
  std::vector<double> unused;
  const std::size_t labels[] = {label};
  const double loss = engine::cross_entropy<double>(outputs.back(), labels, net.num_classes(), unused);
  return {loss, kink_pattern(net, x, outputs)};
}

}  // namespace

GradCheckResult grad_check(const Network& net, const Tensor& x, std::size_t label, double eps,
                           std::size_t per_tensor, std::uint64_t seed) {
  if (!(eps > 0.0)) throw ConfigError("grad_check step must be positive");
  if (x.shape() != net.input_shape()) throw DataError("grad_check input does not match the network");
  if (label >= net.num_classes()) throw DataError("grad_check label out of range");

  DoubleParams params;
  for (const auto& layer : net.layers()) {
    params.weights.emplace_back(layer.weights.values().begin(), layer.weights.values().end());
    params.biases.emplace_back(layer.biases.values().begin(), layer.biases.values().end());
  }
  const std::vector<double> input(x.values().begin(), x.values().end());

  std::vector<std::vector<double>> outputs;
  engine::forward_pass<double>(net, params.views(), input, 1, outputs);
  std::vector<double> grad_logits;
  const std::size_t labels[] = {label};
  const double loss = engine::cross_entropy<double>(outputs.back(), labels, net.num_classes(), grad_logits);
  if (!std::isfinite(loss)) throw ComputationError("grad_check loss is not finite");
  engine::ParamGrads<double> grads;
  grads.reset(net);
  engine::backward_pass<double>(net, params.views(), input, 1, outputs, grad_logits, {}, grads);

  GradCheckResult result;
  const auto base_pattern = kink_pattern(net, input, outputs);
  double sq = 0.0;
  for (const auto& g : grads.weights) sq += std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
  for (const auto& g : grads.biases) sq += std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
  result.gradient_norm = std::sqrt(sq);

  std::mt19937_64 rng(seed);
  auto probe = [&](std::vector<double>& values, const std::vector<double>& analytic) {
    if (values.empty()) return;
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(per_tensor, idx.size()));
    for (std::size_t j : idx) {
      const double saved = values[j];
      values[j] = saved + eps;
      const auto up = loss_at(net, params, input, label);
      values[j] = saved - eps;
      const auto down = loss_at(net, params, input, label);
      values[j] = saved;
      if (up.pattern != base_pattern || down.pattern != base_pattern) {
        ++result.kinks;
        continue;
      }
      const double numeric = (up.loss - down.loss) / (2.0 * eps);
      const double a = analytic[j];
      const double denom = std::max(std::abs(a) + std::abs(numeric), 1e-6);
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  };
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    probe(params.weights[li], grads.weights[li]);
    probe(params.biases[li], grads.biases[li]);
  }
  return result;
}

}  // namespace lwfa::nn

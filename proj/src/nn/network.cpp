#include "lwfa/nn/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>

#include "lwfa/error.hpp"
#include "lwfa/nn/engine.hpp"

namespace lwfa::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::convolution: return "convolution";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::max_pool: return "max-pool";
    case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

LayerSpec LayerSpec::convolution(std::size_t in, std::size_t out, std::size_t kernel,
                                 std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::convolution;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.padding = padding;
  s.weights = Tensor({out, in, kernel, kernel});
  s.biases = Tensor({out});
  return s;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_channels = in;
  s.out_channels = out;
  s.weights = Tensor({out, in});
  s.biases = Tensor({out});
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::max_pool(std::size_t window) {
  LayerSpec s;
  s.kind = LayerKind::max_pool;
  s.pool = window;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

namespace {

Shape infer_output(const LayerSpec& spec, const Shape& in, std::size_t index) {
  const auto where = [&] { return "layer " + std::to_string(index) + " (" + std::string(to_string(spec.kind)) + ")"; };
  switch (spec.kind) {
    case LayerKind::convolution: {
      if (in.size() != 3) throw DataError(where() + " expects a CxHxW input");
      if (spec.in_channels != in[0]) throw DataError(where() + " channel count mismatch");
      if (spec.kernel == 0 || spec.out_channels == 0) throw DataError(where() + " has zero extent");
      if (in[1] + 2 * spec.padding < spec.kernel || in[2] + 2 * spec.padding < spec.kernel) {
        throw DataError(where() + " kernel larger than padded input");
      }
      if (spec.weights.shape() != Shape{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel} ||
          spec.biases.shape() != Shape{spec.out_channels}) {
        throw DataError(where() + " parameter shapes disagree with its declaration");
      }
      return {spec.out_channels, in[1] + 2 * spec.padding - spec.kernel + 1,
              in[2] + 2 * spec.padding - spec.kernel + 1};
    }
    case LayerKind::dense: {
      if (in.size() != 1) throw DataError(where() + " expects a flat input");
      if (spec.in_channels != in[0]) throw DataError(where() + " feature count mismatch");
      if (spec.out_channels == 0) throw DataError(where() + " has zero outputs");
      if (spec.weights.shape() != Shape{spec.out_channels, spec.in_channels} ||
          spec.biases.shape() != Shape{spec.out_channels}) {
        throw DataError(where() + " parameter shapes disagree with its declaration");
      }
      return {spec.out_channels};
    }
    case LayerKind::relu:
      return in;
    case LayerKind::max_pool: {
      if (in.size() != 3) throw DataError(where() + " expects a CxHxW input");
      if (spec.pool == 0 || in[1] < spec.pool || in[2] < spec.pool) {
        throw DataError(where() + " window does not fit the input");
      }
      return {in[0], in[1] / spec.pool, in[2] / spec.pool};
    }
    case LayerKind::flatten:
      return {shape_volume(in)};
  }
  throw DataError(where() + " has an unknown kind");
}

}  // namespace

Network::Network(Shape input_shape, std::size_t num_classes, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), num_classes_(num_classes), layers_(std::move(layers)) {
  if (input_shape_.empty() || shape_volume(input_shape_) == 0) {
    throw DataError("network input shape must be non-empty with positive extents");
  }
  if (num_classes_ < 2) throw DataError("a classifier needs at least two classes");
  if (layers_.empty()) throw DataError("network has no layers");
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i].has_parameters() && (!layers_[i].weights.empty() || !layers_[i].biases.empty())) {
      throw DataError("layer " + std::to_string(i) + " carries parameters it cannot use");
    }
    shapes_.push_back(infer_output(layers_[i], shapes_.back(), i));
    if (layers_[i].is_tap) tap_layers_.push_back(i);
  }
  if (shapes_.back() != Shape{num_classes_}) {
    throw DataError("final layer must emit " + std::to_string(num_classes_) + " logits, emits " +
                    shape_to_string(shapes_.back()));
  }
  if (layers_.back().is_tap) throw DataError("the logits layer cannot be a tap");
}

std::size_t Network::tap_width(std::size_t tap) const {
  return shape_volume(layer_output_shape(tap_layer(tap)));
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
  return n;
}

void Network::require_analysis_taps() const {
  if (tap_count() < kMinAnalysisTaps) {
    throw DataError("layer-wise analysis needs at least " + std::to_string(kMinAnalysisTaps) +
                    " taps, network has " + std::to_string(tap_count()));
  }
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - zmax);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

namespace {

PredictionResult make_prediction(std::span<const float> logits) {
  PredictionResult r;
  r.logits.assign(logits.begin(), logits.end());
  r.probabilities = softmax(logits);
  r.predicted_class = static_cast<std::size_t>(
      std::max_element(r.probabilities.begin(), r.probabilities.end()) - r.probabilities.begin());
  return r;
}

void check_input(const Network& net, const Tensor& x) {
  if (x.shape() != net.input_shape()) {
    throw DataError("input shape " + shape_to_string(x.shape()) + " does not match network input " +
                    shape_to_string(net.input_shape()));
  }
}

}  // namespace

PredictionResult forward(const Network& net, const Tensor& x) {
  return forward_traced(net, x).first;
}

std::pair<PredictionResult, ActivationTrace> forward_traced(const Network& net, const Tensor& x) {
  check_input(net, x);
  std::vector<std::vector<float>> outputs;
  engine::forward_pass<float>(net, engine::views_of(net), x.values(), 1, outputs);
  ActivationTrace trace;
  trace.taps.reserve(net.tap_count());
  for (std::size_t t = 1; t <= net.tap_count(); ++t) trace.taps.push_back(outputs[net.tap_layer(t)]);
  return {make_prediction(outputs.back()), std::move(trace)};
}

std::vector<BlockSpec> parse_blocks(std::string_view text) {
  std::vector<BlockSpec> blocks;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view tok = text.substr(pos, end - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    pos = end + 1;
    if (tok.empty()) continue;
    BlockSpec b;
    if (tok.front() == 'c') {
      b.kind = BlockSpec::Kind::conv;
    } else if (tok.front() == 'd') {
      b.kind = BlockSpec::Kind::dense;
    } else {
      throw ConfigError("unknown block '" + std::string(tok) + "'");
    }
    tok.remove_prefix(1);
    if (!tok.empty() && tok.back() == 'p') {
      if (b.kind != BlockSpec::Kind::conv) throw ConfigError("only conv blocks can pool");
      b.pool = true;
      tok.remove_suffix(1);
    }
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), b.width);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || b.width == 0) {
      throw ConfigError("bad block width in '" + std::string(text) + "'");
    }
    blocks.push_back(b);
  }
  if (blocks.empty()) throw ConfigError("architecture has no blocks");
  return blocks;
}

std::string format_blocks(std::span<const BlockSpec> blocks) {
  std::string out;
  for (const auto& b : blocks) {
    if (!out.empty()) out += ',';
    out += b.kind == BlockSpec::Kind::conv ? 'c' : 'd';
    out += std::to_string(b.width);
    if (b.pool) out += 'p';
  }
  return out;
}

Network build_network(const ArchSpec& arch, std::uint64_t seed) {
  if (arch.blocks.empty()) throw ConfigError("architecture has no blocks");
  std::vector<LayerSpec> layers;
  Shape cur = arch.input_shape;
  bool flat = cur.size() == 1;
  bool first_conv = true;
  for (const auto& b : arch.blocks) {
    if (b.kind == BlockSpec::Kind::conv) {
      if (flat) throw ConfigError("conv block after the network was flattened");
      layers.push_back(LayerSpec::convolution(cur[0], b.width, 3, 1));
      layers.push_back(LayerSpec::relu());
      cur = {b.width, cur[1], cur[2]};
      if (b.pool) {
        layers.push_back(LayerSpec::max_pool(2));
        cur = {b.width, cur[1] / 2, cur[2] / 2};
      }
      layers.back().is_tap = !first_conv;
      first_conv = false;
    } else {
      if (!flat) {
        layers.push_back(LayerSpec::flatten());
        cur = {shape_volume(cur)};
        flat = true;
      }
      layers.push_back(LayerSpec::dense(cur[0], b.width));
      layers.push_back(LayerSpec::relu());
      layers.back().is_tap = true;
      cur = {b.width};
    }
  }
  if (!flat) {
    layers.push_back(LayerSpec::flatten());
    cur = {shape_volume(cur)};
  }
  layers.push_back(LayerSpec::dense(cur[0], arch.num_classes));

  std::mt19937_64 rng(seed);
  for (auto& layer : layers) {
    if (!layer.has_parameters()) continue;
    const std::size_t fan_in = layer.weights.size() / layer.out_channels;
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (auto& w : layer.weights.values()) w = dist(rng);
  }
  return Network(arch.input_shape, arch.num_classes, std::move(layers));
}

}  // namespace lwfa::nn

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lwfa/nn/tensor.hpp"

namespace lwfa::nn {

enum class LayerKind : std::uint8_t {
  convolution = 0,
  dense = 1,
  relu = 2,
  max_pool = 3,
  flatten = 4,
};

std::string_view to_string(LayerKind kind);

/// One layer of a feed-forward network. Convolutions are stride 1 with square
/// kernels and symmetric zero padding; max-pool windows are square with stride
/// equal to the window. `in_channels`/`out_channels` double as feature counts
/// for dense layers.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t padding = 0;
  std::size_t pool = 0;
  Tensor weights;  // conv: out x in x k x k, dense: out x in
  Tensor biases;   // out
  bool is_tap = false;

  static LayerSpec convolution(std::size_t in, std::size_t out, std::size_t kernel,
                               std::size_t padding);
  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec relu();
  static LayerSpec max_pool(std::size_t window);
  static LayerSpec flatten();

  bool has_parameters() const {
    return kind == LayerKind::convolution || kind == LayerKind::dense;
  }

  bool operator==(const LayerSpec&) const = default;
};

/// An ordered stack of layers mapping a (channels, height, width) or flat input
/// to `num_classes` logits. Layers flagged `is_tap` emit the per-layer feature
/// vectors used for analysis; they are numbered 1..tap_count() in order.
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::size_t num_classes, std::vector<LayerSpec> layers);

  const Shape& input_shape() const { return input_shape_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t tap_count() const { return tap_layers_.size(); }

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<LayerSpec>& mutable_layers() { return layers_; }

  const Shape& layer_input_shape(std::size_t layer) const { return shapes_[layer]; }
  const Shape& layer_output_shape(std::size_t layer) const { return shapes_[layer + 1]; }

  /// Index into layers() of tap `tap` (1-based).
  std::size_t tap_layer(std::size_t tap) const { return tap_layers_.at(tap - 1); }
  /// Flattened feature width at tap `tap` (1-based).
  std::size_t tap_width(std::size_t tap) const;

  std::size_t parameter_count() const;

  /// Throws unless the network has enough taps for layer-wise analysis.
  void require_analysis_taps() const;

  bool operator==(const Network& other) const {
    return input_shape_ == other.input_shape_ && num_classes_ == other.num_classes_ &&
           layers_ == other.layers_;
  }

 private:
  Shape input_shape_;
  std::size_t num_classes_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;  // shapes_[i] is the input of layer i; back() is the logits
  std::vector<std::size_t> tap_layers_;
};

inline constexpr std::size_t kMinAnalysisTaps = 4;

struct PredictionResult {
  std::vector<float> logits;
  std::vector<double> probabilities;
  std::size_t predicted_class = 0;
};

/// Flattened tap outputs of one input, taps 1..L.
struct ActivationTrace {
  std::vector<std::vector<float>> taps;

  std::size_t tap_count() const { return taps.size(); }
  std::span<const float> at(std::size_t tap) const { return taps.at(tap - 1); }
  std::vector<float>& mutable_at(std::size_t tap) { return taps.at(tap - 1); }
};

/// Numerically stable softmax evaluated in double precision.
std::vector<double> softmax(std::span<const float> logits);

PredictionResult forward(const Network& net, const Tensor& x);
std::pair<PredictionResult, ActivationTrace> forward_traced(const Network& net,
                                                            const Tensor& x);

// Building networks from a compact block description.

struct BlockSpec {
  enum class Kind { conv, dense } kind = Kind::conv;
  std::size_t width = 0;  // conv channels or dense units
  bool pool = false;      // conv only: 2x2 max-pool after the activation
};

/// The first conv block acts as the stem and is not tapped; every later block
/// is one tap (post-activation, post-pool), and the closing logits layer is
/// not tapped either.
struct ArchSpec {
  Shape input_shape;
  std::size_t num_classes = 0;
  std::vector<BlockSpec> blocks;
};

/// Parses "c8,c8,c16p,c16,c32p,c32,d64,d32": `cN` conv block with N channels
/// (suffix `p` adds pooling), `dN` dense block with N units.
std::vector<BlockSpec> parse_blocks(std::string_view text);
std::string format_blocks(std::span<const BlockSpec> blocks);

/// Builds the layer stack and draws He-scaled normal weights from `seed`;
/// biases start at zero.
Network build_network(const ArchSpec& arch, std::uint64_t seed);

}  // namespace lwfa::nn

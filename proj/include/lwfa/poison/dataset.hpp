#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "lwfa/nn/train.hpp"

namespace lwfa::poison {

/// Image with pixel values in [0, 1], shaped channels x height x width.
using ImageSample = nn::Sample;
using Dataset = std::vector<ImageSample>;

struct SyntheticDatasetConfig {
  std::size_t num_classes = 10;
  std::size_t image_size = 16;
  std::size_t channels = 3;
  std::size_t train_count = 2000;
  std::size_t test_count = 500;
  double noise_level = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr std::size_t kMinImageSize = 8;
inline constexpr std::size_t kShapeCount = 10;

enum class Split : std::uint8_t { train = 0, test = 1 };

/// Per-sample nuisance parameters of a class motif: where the shape sits, how
/// large it is, and its colors. The class itself fixes the shape family.
struct MotifParams {
  std::size_t size = 0;
  std::size_t top = 0;
  std::size_t left = 0;
  float foreground[3] = {};
  float background[3] = {};
  float gradient = 0.0f;  // background brightness slope along the diagonal
};

/// Draws the motif parameters of sample `index` in `split`. Pure function of
/// (config, label, split, index).
MotifParams motif_params(const SyntheticDatasetConfig& config, std::size_t label, Split split,
                         std::size_t index);

/// Noise-free rendering of `label`'s motif.
nn::Tensor render_motif(const SyntheticDatasetConfig& config, std::size_t label,
                        const MotifParams& params);

/// Balanced procedural classes (stripes, checkers, squares, rings, crosses,
/// disks, triangles); labels cycle 0..C-1 so per-class counts differ by at
/// most one. Additive Gaussian noise with sigma `noise_level` is clamped to
/// [0, 1].
std::pair<Dataset, Dataset> gen_synthetic_dataset(const SyntheticDatasetConfig& config);

void check_pixel_range(const ImageSample& s);

}  // namespace lwfa::poison

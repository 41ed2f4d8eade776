#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "lwfa/poison/dataset.hpp"

namespace lwfa::poison {

enum class TriggerKind : std::uint8_t { patch = 0, blended = 1 };

std::string_view to_string(TriggerKind kind);
TriggerKind trigger_kind_from_string(std::string_view name);

struct TriggerSpec {
  TriggerKind kind = TriggerKind::patch;
  // patch kind
  nn::Tensor patch_pixels;  // channels x rows x cols
  std::size_t anchor_row = 0;
  std::size_t anchor_col = 0;
  // blended kind
  nn::Tensor pattern;  // same shape as the image
  double blend_ratio = 0.1;

  /// Solid square stamped at the bottom-right corner.
  static TriggerSpec square_patch(std::size_t channels, std::size_t image_size,
                                  std::size_t patch_size = 2, float value = 1.0f);
  /// Uniform random noise pattern mixed in at `ratio`.
  static TriggerSpec noise_blend(const nn::Shape& image_shape, double ratio, std::uint64_t seed);

  /// Throws unless the trigger can be applied to images of `image_shape`.
  void validate(const nn::Shape& image_shape) const;

  bool operator==(const TriggerSpec&) const = default;
};

/// Overwrites the anchored patch region; everything else, including the label,
/// is left alone.
ImageSample apply_patch_trigger(const ImageSample& img, const TriggerSpec& trigger);

/// clamp((1 - ratio) * image + ratio * pattern, 0, 1) per pixel.
ImageSample apply_blended_trigger(const ImageSample& img, const TriggerSpec& trigger);

ImageSample apply_trigger(const ImageSample& img, const TriggerSpec& trigger);

}  // namespace lwfa::poison

#include "lwfa/poison/trigger.hpp"

#include <algorithm>
#include <random>

#include "lwfa/error.hpp"

namespace lwfa::poison {

std::string_view to_string(TriggerKind kind) {
  return kind == TriggerKind::patch ? "patch" : "blended";
}

TriggerKind trigger_kind_from_string(std::string_view name) {
  if (name == "patch" || name == "badnets") return TriggerKind::patch;
  if (name == "blended") return TriggerKind::blended;
  throw ConfigError("unknown trigger kind '" + std::string(name) + "'");
}

TriggerSpec TriggerSpec::square_patch(std::size_t channels, std::size_t image_size,
                                      std::size_t patch_size, float value) {
  if (patch_size == 0 || patch_size > image_size) throw ConfigError("patch does not fit the image");
  TriggerSpec t;
  t.kind = TriggerKind::patch;
  t.patch_pixels = nn::Tensor({channels, patch_size, patch_size}, value);
  t.anchor_row = image_size - patch_size;
  t.anchor_col = image_size - patch_size;
  return t;
}

TriggerSpec TriggerSpec::noise_blend(const nn::Shape& image_shape, double ratio, std::uint64_t seed) {
  TriggerSpec t;
  t.kind = TriggerKind::blended;
  t.blend_ratio = ratio;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::vector<float> values(nn::shape_volume(image_shape));
  for (auto& v : values) v = unit(rng);
  t.pattern = nn::Tensor(image_shape, std::move(values));
  return t;
}

void TriggerSpec::validate(const nn::Shape& image_shape) const {
  if (image_shape.size() != 3) throw DataError("triggers apply to channels x height x width images");
  if (kind == TriggerKind::patch) {
    const auto& ps = patch_pixels.shape();
    if (ps.size() != 3 || ps[0] != image_shape[0]) throw DataError("patch shape does not match image channels");
    if (anchor_row + ps[1] > image_shape[1] || anchor_col + ps[2] > image_shape[2]) {
      throw DataError("patch anchor places the trigger outside the image");
    }
  } else {
    if (!(blend_ratio > 0.0 && blend_ratio < 1.0)) throw ConfigError("blend ratio must lie in (0, 1)");
    if (pattern.shape() != image_shape) throw DataError("blend pattern shape does not match the image");
  }
}

ImageSample apply_patch_trigger(const ImageSample& img, const TriggerSpec& trigger) {
  if (trigger.kind != TriggerKind::patch) throw ConfigError("not a patch trigger");
  trigger.validate(img.input.shape());
  ImageSample out = img;
  const auto& ps = trigger.patch_pixels.shape();
  for (std::size_t c = 0; c < ps[0]; ++c) {
    for (std::size_t y = 0; y < ps[1]; ++y) {
      for (std::size_t x = 0; x < ps[2]; ++x) {
        out.input.at(c, trigger.anchor_row + y, trigger.anchor_col + x) = trigger.patch_pixels.at(c, y, x);
      }
    }
  }
  return out;
}

ImageSample apply_blended_trigger(const ImageSample& img, const TriggerSpec& trigger) {
  if (trigger.kind != TriggerKind::blended) throw ConfigError("not a blended trigger");
  trigger.validate(img.input.shape());
  ImageSample out = img;
  const double lambda = trigger.blend_ratio;
  auto px = out.input.values();
  const auto pat = trigger.pattern.values();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = (1.0 - lambda) * px[i] + lambda * pat[i];
    px[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

ImageSample apply_trigger(const ImageSample& img, const TriggerSpec& trigger) {
  return trigger.kind == TriggerKind::patch ? apply_patch_trigger(img, trigger)
                                            : apply_blended_trigger(img, trigger);
}

}  // namespace lwfa::poison

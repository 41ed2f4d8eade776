#include "lwfa/poison/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lwfa/error.hpp"
#include "lwfa/seeding.hpp"

namespace lwfa::poison {

void SyntheticDatasetConfig::validate() const {
  if (num_classes < 2) throw ConfigError("dataset needs at least two classes");
  if (train_count == 0 || test_count == 0) throw ConfigError("dataset counts must be positive");
  if (channels != 1 && channels != 3) throw ConfigError("dataset channels must be 1 or 3");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) throw ConfigError("noise_level must be nonnegative");
  if (image_size < kMinImageSize) {
    throw DataError("image size " + std::to_string(image_size) + " is too small to render class motifs (minimum " +
                    std::to_string(kMinImageSize) + ")");
  }
}

namespace {

std::mt19937_64 sample_rng(const SyntheticDatasetConfig& config, Split split, std::size_t index,
                           std::uint64_t stream) {
  return std::mt19937_64(
      derive_seed(config.seed, static_cast<std::uint64_t>(split) * 4 + stream, index));
}

bool motif_covers(std::size_t shape, std::size_t s, std::size_t u, std::size_t v) {
  const double half = (static_cast<double>(s) - 1.0) / 2.0;
  const double du = static_cast<double>(u) - half;
  const double dv = static_cast<double>(v) - half;
  switch (shape) {
    case 0: return u % 4 < 2;
    case 1: return v % 4 < 2;
    case 2: return (u + v) % 6 < 3;
    case 3: return ((u / 3) + (v / 3)) % 2 == 0;
    case 4: return true;
    case 5: {
      const std::size_t t = std::max<std::size_t>(1, s / 5);
      return u < t || v < t || u >= s - t || v >= s - t;
    }
    case 6: {
      const double t = static_cast<double>(s) / 6.0 + 0.5;
      return std::abs(du) < t || std::abs(dv) < t;
    }
    case 7: return std::abs(du - dv) < 1.0 || std::abs(du + dv) < 1.0;
    case 8: return du * du + dv * dv <= (half + 0.5) * (half + 0.5);
    case 9: return std::abs(dv) <= (static_cast<double>(u) + 1.0) / 2.0;
  }
  return false;
}

}  // namespace

MotifParams motif_params(const SyntheticDatasetConfig& config, std::size_t label, Split split,
                         std::size_t index) {
  auto rng = sample_rng(config, split, index, 0);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  const std::size_t img = config.image_size;
  MotifParams p;

  // Beyond the shape catalog, classes also differ by the image quadrant they
  // occupy.
  std::size_t lo = img * 3 / 8, hi = img * 5 / 8;
  std::size_t area = img, off_r = 0, off_c = 0;
  if (config.num_classes > kShapeCount) {
    area = img / 2;
    lo = std::max<std::size_t>(3, area / 2);
    hi = area;
    const std::size_t quadrant = (label / kShapeCount) % 4;
    off_r = (quadrant / 2) * area;
    off_c = (quadrant % 2) * area;
  }
  p.size = lo + static_cast<std::size_t>(unit(rng) * static_cast<float>(hi - lo + 1));
  p.size = std::min(p.size, hi);
  const std::size_t slack = area - p.size;
  p.top = off_r + static_cast<std::size_t>(unit(rng) * static_cast<float>(slack + 1)) % (slack + 1);
  p.left = off_c + static_cast<std::size_t>(unit(rng) * static_cast<float>(slack + 1)) % (slack + 1);

  const bool dark_background = unit(rng) < 0.5f;
  // Luminance stays below ~0.85 so a saturated white patch is never camouflaged.
  const float bg_lum = dark_background ? 0.05f + 0.25f * unit(rng) : 0.5f + 0.25f * unit(rng);
  const float fg_lum = dark_background ? 0.5f + 0.25f * unit(rng) : 0.05f + 0.25f * unit(rng);
  for (int c = 0; c < 3; ++c) {
    p.background[c] = std::clamp(bg_lum + 0.2f * (unit(rng) - 0.5f), 0.0f, 1.0f);
    p.foreground[c] = std::clamp(fg_lum + 0.2f * (unit(rng) - 0.5f), 0.0f, 1.0f);
  }
  p.gradient = 0.3f * (unit(rng) - 0.5f);
  return p;
}

nn::Tensor render_motif(const SyntheticDatasetConfig& config, std::size_t label,
                        const MotifParams& params) {
  const std::size_t img = config.image_size;
  const std::size_t shape = label % kShapeCount;
  nn::Tensor out({config.channels, img, img});
  const float denom = static_cast<float>(2 * (img - 1));
  for (std::size_t y = 0; y < img; ++y) {
    for (std::size_t x = 0; x < img; ++x) {
      const bool fg = y >= params.top && y < params.top + params.size && x >= params.left &&
                      x < params.left + params.size &&
                      motif_covers(shape, params.size, y - params.top, x - params.left);
      const float ramp = params.gradient * (static_cast<float>(y + x) / denom - 0.5f);
      for (std::size_t c = 0; c < config.channels; ++c) {
        const std::size_t src = config.channels == 1 ? 0 : c;
        const float v = fg ? params.foreground[src] : params.background[src] + ramp;
        out.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  }
  return out;
}

std::pair<Dataset, Dataset> gen_synthetic_dataset(const SyntheticDatasetConfig& config) {
  config.validate();
  auto make = [&](Split split, std::size_t count) {
    Dataset out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t label = i % config.num_classes;
      nn::Tensor img = render_motif(config, label, motif_params(config, label, split, i));
      if (config.noise_level > 0.0) {
        auto rng = sample_rng(config, split, i, 1);
        std::normal_distribution<double> noise(0.0, config.noise_level);
        for (auto& v : img.values()) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
      }
      out.push_back({std::move(img), label});
    }
    return out;
  };
  return {make(Split::train, config.train_count), make(Split::test, config.test_count)};
}

void check_pixel_range(const ImageSample& s) {
  for (float v : s.input.values()) {
    if (v < 0.0f || v > 1.0f) throw DataError("pixel value outside [0, 1]");
  }
}

}  // namespace lwfa::poison

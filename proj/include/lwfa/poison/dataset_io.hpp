#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "lwfa/poison/poison.hpp"

namespace lwfa::poison {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

struct DatasetFile {
  std::size_t num_classes = 0;
  Dataset samples;
};

// Binary layout is documented in docs/file-formats.md.
std::vector<unsigned char> encode_dataset(std::span<const ImageSample> samples, std::size_t num_classes);
DatasetFile decode_dataset(std::span<const unsigned char> bytes);

void save_dataset(std::span<const ImageSample> samples, std::size_t num_classes,
                  const std::filesystem::path& path);
DatasetFile load_dataset(const std::filesystem::path& path);

nlohmann::json trigger_to_json(const TriggerSpec& trigger);
TriggerSpec trigger_from_json(const nlohmann::json& j);
nlohmann::json poison_spec_to_json(const PoisonSpec& spec);
PoisonSpec poison_spec_from_json(const nlohmann::json& j);

/// Companion manifest of a poisoned training set: the PoisonSpec used and the
/// ground-truth poisoned indices.
void save_poison_manifest(const PoisonSpec& spec, std::span<const std::size_t> poisoned_indices,
                          const std::filesystem::path& path);

struct PoisonManifest {
  PoisonSpec spec;
  std::vector<std::size_t> poisoned_indices;
};

PoisonManifest load_poison_manifest(const std::filesystem::path& path);

}  // namespace lwfa::poison

#include "lwfa/poison/dataset_io.hpp"

#include <fstream>

#include "lwfa/binary_io.hpp"

namespace lwfa::poison {

namespace {
constexpr std::string_view kMagic{"LWFADAT\0", 8};
}

std::vector<unsigned char> encode_dataset(std::span<const ImageSample> samples, std::size_t num_classes) {
  if (samples.empty()) throw DataError("refusing to write an empty dataset");
  const auto& shape = samples.front().input.shape();
  if (shape.size() != 3) throw DataError("dataset images must be channels x height x width");
  io::ByteWriter w;
  w.put_magic(kMagic);
  w.put<std::uint32_t>(kDatasetFormatVersion);
  w.put<std::uint64_t>(samples.size());
  w.put<std::uint64_t>(num_classes);
  w.put<std::uint64_t>(shape[0]);
  w.put<std::uint64_t>(shape[1]);
  w.put<std::uint64_t>(shape[2]);
  for (const auto& s : samples) {
    if (s.input.shape() != shape) throw DataError("dataset images differ in shape");
    for (float v : s.input.values()) w.put(v);
  }
  for (const auto& s : samples) {
    if (s.label >= num_classes) throw DataError("label outside the declared class count");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.label));
  }
  return w.bytes();
}

DatasetFile decode_dataset(std::span<const unsigned char> bytes) {
  io::ByteReader r(bytes, "dataset file");
  r.expect_magic(kMagic);
  if (const auto v = r.get<std::uint32_t>(); v != kDatasetFormatVersion) {
    r.fail("unsupported version " + std::to_string(v));
  }
  const auto count = r.get<std::uint64_t>();
  DatasetFile out;
  out.num_classes = r.get<std::uint64_t>();
  const nn::Shape shape{r.get<std::uint64_t>(), r.get<std::uint64_t>(), r.get<std::uint64_t>()};
  const std::size_t vol = nn::shape_volume(shape);
  if (vol == 0 || count == 0) r.fail("empty dataset header");
  if (count * (vol * sizeof(float) + sizeof(std::uint32_t)) != r.remaining()) r.fail("size does not match header");
  out.samples.resize(count);
  for (auto& s : out.samples) {
    std::vector<float> px(vol);
    for (auto& v : px) v = r.get<float>();
    s.input = nn::Tensor(shape, std::move(px));
  }
  for (auto& s : out.samples) {
    s.label = r.get<std::uint32_t>();
    if (s.label >= out.num_classes) r.fail("label outside the declared class count");
  }
  r.expect_end();
  return out;
}

void save_dataset(std::span<const ImageSample> samples, std::size_t num_classes,
                  const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(samples, num_classes));
}

DatasetFile load_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

nlohmann::json trigger_to_json(const TriggerSpec& t) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(t.kind));
  if (t.kind == TriggerKind::patch) {
    j["patch_shape"] = t.patch_pixels.shape();
    j["patch_pixels"] = t.patch_pixels.data();
    j["anchor"] = {t.anchor_row, t.anchor_col};
  } else {
    j["blend_ratio"] = t.blend_ratio;
    j["pattern_shape"] = t.pattern.shape();
    j["pattern"] = t.pattern.data();
  }
  return j;
}

TriggerSpec trigger_from_json(const nlohmann::json& j) {
  try {
    TriggerSpec t;
    t.kind = trigger_kind_from_string(j.at("kind").get<std::string>());
    if (t.kind == TriggerKind::patch) {
      t.patch_pixels = nn::Tensor(j.at("patch_shape").get<nn::Shape>(), j.at("patch_pixels").get<std::vector<float>>());
      t.anchor_row = j.at("anchor").at(0).get<std::size_t>();
      t.anchor_col = j.at("anchor").at(1).get<std::size_t>();
    } else {
      t.blend_ratio = j.at("blend_ratio").get<double>();
      t.pattern = nn::Tensor(j.at("pattern_shape").get<nn::Shape>(), j.at("pattern").get<std::vector<float>>());
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trigger description: ") + e.what());
  }
}

nlohmann::json poison_spec_to_json(const PoisonSpec& spec) {
  return {{"trigger", trigger_to_json(spec.trigger)},
          {"target_class", spec.target_class},
          {"poison_rate", spec.poison_rate},
          {"seed", spec.seed}};
}

PoisonSpec poison_spec_from_json(const nlohmann::json& j) {
  try {
    PoisonSpec spec;
    spec.trigger = trigger_from_json(j.at("trigger"));
    spec.target_class = j.at("target_class").get<std::size_t>();
    spec.poison_rate = j.at("poison_rate").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed poison spec: ") + e.what());
  }
}

void save_poison_manifest(const PoisonSpec& spec, std::span<const std::size_t> poisoned_indices,
                          const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "lwfa-poison-manifest";
  j["version"] = 1;
  j["poison_spec"] = poison_spec_to_json(spec);
  j["poisoned_indices"] = std::vector<std::size_t>(poisoned_indices.begin(), poisoned_indices.end());
  io::write_text_file(path, j.dump(2) + "\n");
}

PoisonManifest load_poison_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return {poison_spec_from_json(j.at("poison_spec")), j.at("poisoned_indices").get<std::vector<std::size_t>>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed poison manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace lwfa::poison

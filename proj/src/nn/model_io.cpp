#include "lwfa/nn/model_io.hpp"

#include "lwfa/binary_io.hpp"

namespace lwfa::nn {

namespace {
constexpr std::string_view kMagic{"LWFANET\0", 8};
}

std::vector<unsigned char> encode_network(const Network& net) {
  io::ByteWriter w;
  w.put_magic(kMagic);
  w.put<std::uint32_t>(kModelFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.input_shape().size()));
  for (auto e : net.input_shape()) w.put<std::uint64_t>(e);
  w.put<std::uint64_t>(net.num_classes());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(l.kind));
    w.put<std::uint8_t>(l.is_tap ? 1 : 0);
    w.put<std::uint64_t>(l.in_channels);
    w.put<std::uint64_t>(l.out_channels);
    w.put<std::uint64_t>(l.kernel);
    w.put<std::uint64_t>(l.padding);
    w.put<std::uint64_t>(l.pool);
    w.put_array<float>(l.weights.values());
    w.put_array<float>(l.biases.values());
  }
  return w.bytes();
}

Network decode_network(std::span<const unsigned char> bytes) {
  io::ByteReader r(bytes, "model file");
  r.expect_magic(kMagic);
  if (const auto v = r.get<std::uint32_t>(); v != kModelFormatVersion) {
    r.fail("unsupported version " + std::to_string(v));
  }
  const auto rank = r.get<std::uint32_t>();
  if (rank == 0 || rank > 3) r.fail("bad input rank");
  Shape input(rank);
  for (auto& e : input) e = r.get<std::uint64_t>();
  const auto num_classes = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  std::vector<LayerSpec> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec l;
    const auto kind = r.get<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(LayerKind::flatten)) r.fail("unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.is_tap = r.get<std::uint8_t>() != 0;
    l.in_channels = r.get<std::uint64_t>();
    l.out_channels = r.get<std::uint64_t>();
    l.kernel = r.get<std::uint64_t>();
    l.padding = r.get<std::uint64_t>();
    l.pool = r.get<std::uint64_t>();
    auto weights = r.get_array<float>();
    auto biases = r.get_array<float>();
    if (l.kind == LayerKind::convolution) {
      l.weights = Tensor({l.out_channels, l.in_channels, l.kernel, l.kernel}, std::move(weights));
      l.biases = Tensor({l.out_channels}, std::move(biases));
    } else if (l.kind == LayerKind::dense) {
      l.weights = Tensor({l.out_channels, l.in_channels}, std::move(weights));
      l.biases = Tensor({l.out_channels}, std::move(biases));
    } else if (!weights.empty() || !biases.empty()) {
      r.fail("parameters on a parameter-free layer");
    }
    layers.push_back(std::move(l));
  }
  r.expect_end();
  return Network(std::move(input), num_classes, std::move(layers));
}

void save_network(const Network& net, const std::filesystem::path& path) {
  io::write_file(path, encode_network(net));
}

Network load_network(const std::filesystem::path& path) {
  return decode_network(io::read_file(path));
}

}  // namespace lwfa::nn

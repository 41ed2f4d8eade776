#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lwfa/nn/network.hpp"

namespace lwfa::nn {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Layout is documented in docs/file-formats.md.
std::vector<unsigned char> encode_network(const Network& net);
Network decode_network(std::span<const unsigned char> bytes);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace lwfa::nn

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lwfa/nn/network.hpp"

namespace lwfa::scope {

/// Inclusive range of 1-based tap indices.
struct LayerRange {
  std::size_t first = 1;
  std::size_t last = 1;

  std::size_t size() const { return last - first + 1; }
  bool contains(std::size_t layer) const { return layer >= first && layer <= last; }
  bool operator==(const LayerRange&) const = default;
};

/// Per-layer centroids of one class's benign features.
struct ClassCentroids {
  std::size_t cls = 0;
  LayerRange range;
  std::vector<std::vector<double>> centroids;  // centroids[l - range.first]
  std::size_t sample_count = 0;

  const std::vector<double>& at(std::size_t layer) const { return centroids.at(layer - range.first); }
};

/// Cosine similarities of one sample to a class's centroids, one per layer.
struct SimilarityRecord {
  LayerRange range;
  std::vector<double> values;

  double at(std::size_t layer) const { return values.at(layer - range.first); }
};

/// Per-layer mean of many similarity records of class `cls`.
struct SimilarityProfile {
  std::size_t cls = 0;
  LayerRange range;
  std::vector<double> values;

  double at(std::size_t layer) const { return values.at(layer - range.first); }
};

/// <a, b> / (|a| |b|) accumulated in double; 0 when either norm is 0.
double cosine_similarity(std::span<const float> a, std::span<const double> b);
double euclidean_distance(std::span<const float> a, std::span<const double> b);

/// Elementwise mean of the tap vectors over `traces`, for every layer in
/// `range`.
ClassCentroids compute_centroids(std::span<const nn::ActivationTrace> traces, std::size_t cls,
                                 LayerRange range);

SimilarityRecord layerwise_cosine(const nn::ActivationTrace& trace, const ClassCentroids& cents);

SimilarityProfile mean_profile(std::span<const SimilarityRecord> records, std::size_t cls);

/// Sub-profile restricted to `range`, which must lie inside the profile.
SimilarityProfile restrict_profile(const SimilarityProfile& profile, LayerRange range);

/// Layer of interest: the layer l in (first, last] with the largest jump
/// profile[l] - profile[l - 1], scanning upward and keeping the earliest layer
/// on ties.
std::size_t identify_loi(const SimilarityProfile& profile);

/// Taps analyzed by the defense for a network with `tap_count` taps: the
/// second half, floor(L/2)..L, widened downward by two layers so the
/// three-layer window below any LOI stays populated.
LayerRange analysis_range(std::size_t tap_count);
LayerRange loi_search_range(std::size_t tap_count);

/// CSV with header `layer,benign_mean_cs,poisoned_mean_cs,diff`, one row per
/// layer, 6 decimals.
std::string format_profiles(const SimilarityProfile& benign, const SimilarityProfile& poisoned);
void export_profiles(const SimilarityProfile& benign, const SimilarityProfile& poisoned,
                     const std::filesystem::path& path);

}  // namespace lwfa::scope

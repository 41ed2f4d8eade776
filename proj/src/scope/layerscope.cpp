#include "lwfa/scope/layerscope.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lwfa/binary_io.hpp"
#include "lwfa/error.hpp"

namespace lwfa::scope {

double cosine_similarity(std::span<const float> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine similarity of vectors with different widths");
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    dot += x * b[i];
    aa += x * x;
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  // sqrt(x * x) == x exactly, so a vector against itself scores exactly 1.
  return std::clamp(dot / std::sqrt(aa * bb), -1.0, 1.0);
}

double euclidean_distance(std::span<const float> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("distance between vectors with different widths");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

ClassCentroids compute_centroids(std::span<const nn::ActivationTrace> traces, std::size_t cls,
                                 LayerRange range) {
  if (traces.empty()) throw DataError("cannot compute centroids from zero traces");
  if (range.first < 1 || range.first > range.last) throw DataError("invalid layer range");
  ClassCentroids out{cls, range, {}, traces.size()};
  for (std::size_t l = range.first; l <= range.last; ++l) {
    if (l > traces.front().tap_count()) throw DataError("layer range exceeds the trace length");
    std::vector<double> sum(traces.front().at(l).size(), 0.0);
    for (const auto& t : traces) {
      if (t.tap_count() < range.last) throw DataError("trace is shorter than the layer range");
      const auto a = t.at(l);
      if (a.size() != sum.size()) throw DataError("inconsistent tap widths at layer " + std::to_string(l));
      for (std::size_t j = 0; j < a.size(); ++j) sum[j] += a[j];
    }
    const double n = static_cast<double>(traces.size());
    for (auto& v : sum) v /= n;
    out.centroids.push_back(std::move(sum));
  }
  return out;
}

SimilarityRecord layerwise_cosine(const nn::ActivationTrace& trace, const ClassCentroids& cents) {
  if (trace.tap_count() < cents.range.last) throw DataError("trace does not cover the centroid range");
  SimilarityRecord rec{cents.range, {}};
  rec.values.reserve(cents.range.size());
  for (std::size_t l = cents.range.first; l <= cents.range.last; ++l) {
    const auto a = trace.at(l);
    const auto& c = cents.at(l);
    if (a.size() != c.size()) throw DataError("tap width mismatch at layer " + std::to_string(l));
    rec.values.push_back(cosine_similarity(a, c));
  }
  return rec;
}

SimilarityProfile mean_profile(std::span<const SimilarityRecord> records, std::size_t cls) {
  if (records.empty()) throw DataError("cannot average zero similarity records");
  SimilarityProfile p{cls, records.front().range, std::vector<double>(records.front().values.size(), 0.0)};
  for (const auto& r : records) {
    if (!(r.range == p.range) || r.values.size() != p.values.size()) {
      throw DataError("similarity records cover different layer ranges");
    }
    for (std::size_t i = 0; i < r.values.size(); ++i) p.values[i] += r.values[i];
  }
  const double n = static_cast<double>(records.size());
  for (auto& v : p.values) v /= n;
  return p;
}

SimilarityProfile restrict_profile(const SimilarityProfile& profile, LayerRange range) {
  if (range.first < profile.range.first || range.last > profile.range.last || range.first > range.last) {
    throw DataError("requested range lies outside the profile");
  }
  SimilarityProfile out{profile.cls, range, {}};
  for (std::size_t l = range.first; l <= range.last; ++l) out.values.push_back(profile.at(l));
  return out;
}

std::size_t identify_loi(const SimilarityProfile& profile) {
  const auto& r = profile.range;
  if (r.first > r.last || r.size() < 2 || profile.values.size() != r.size()) {
    throw DataError("layer-of-interest search needs a profile of at least two layers");
  }
  std::size_t loi = r.first + 1;
  double max_diff = profile.at(r.first + 1) - profile.at(r.first);
  for (std::size_t l = r.first + 2; l <= r.last; ++l) {
    const double diff = profile.at(l) - profile.at(l - 1);
    if (diff > max_diff) {
      max_diff = diff;
      loi = l;
    }
  }
  return loi;
}

LayerRange loi_search_range(std::size_t tap_count) {
  if (tap_count < nn::kMinAnalysisTaps) throw DataError("too few taps for layer-wise analysis");
  return {tap_count / 2, tap_count};
}

LayerRange analysis_range(std::size_t tap_count) {
  const auto search = loi_search_range(tap_count);
  return {search.first > 2 ? search.first - 2 : 1, tap_count};
}

std::string format_profiles(const SimilarityProfile& benign, const SimilarityProfile& poisoned) {
  if (!(benign.range == poisoned.range)) throw DataError("profiles cover different layer ranges");
  std::string out = "layer,benign_mean_cs,poisoned_mean_cs,diff\n";
  char line[128];
  for (std::size_t l = benign.range.first; l <= benign.range.last; ++l) {
    const double b = benign.at(l), p = poisoned.at(l);
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", l, b, p, b - p);
    out += line;
  }
  return out;
}

void export_profiles(const SimilarityProfile& benign, const SimilarityProfile& poisoned,
                     const std::filesystem::path& path) {
  io::write_text_file(path, format_profiles(benign, poisoned));
}

}  // namespace lwfa::scope

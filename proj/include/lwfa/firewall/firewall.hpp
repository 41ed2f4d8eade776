#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "lwfa/nn/train.hpp"
#include "lwfa/scope/layerscope.hpp"

namespace lwfa::firewall {

enum class Metric : std::uint8_t { cosine = 0, euclidean = 1 };

std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view name);

inline constexpr double kDefaultTau = 2.5;
inline constexpr double kSigmaFloor = 1e-12;

/// Offline statistics of one class: its layer of interest, the window of taps
/// summed at detection time, the benign centroids over that window, and the
/// mean / population standard deviation of the benign window scores.
struct ClassCalibration {
  std::size_t cls = 0;
  std::size_t loi = 0;
  std::vector<std::size_t> window;             // ascending tap indices
  std::vector<std::vector<double>> centroids;  // one per window entry
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t sample_count = 0;

  bool operator==(const ClassCalibration&) const = default;
};

struct FirewallModel {
  std::vector<ClassCalibration> calibrations;  // indexed by class
  double tau = kDefaultTau;
  Metric metric = Metric::cosine;

  const ClassCalibration& for_class(std::size_t cls) const;
  bool operator==(const FirewallModel&) const = default;
};

struct Verdict {
  std::size_t predicted_class = 0;
  double score = 0.0;            // summed similarity, or summed distance
  double threshold_value = 0.0;  // mu - tau*sigma, or mu + tau*sigma
  bool is_poisoned = false;
};

struct ScoredInput {
  std::size_t predicted_class = 0;
  double score = 0.0;
  bool operator==(const ScoredInput&) const = default;
};

/// The window {loi-2, loi-1, loi} clipped to taps >= 1.
std::vector<std::size_t> detection_window(std::size_t loi);

/// Window score of a trace against one calibration: summed cosine similarity
/// or summed Euclidean distance to the window centroids.
double window_score(const ClassCalibration& cal, Metric metric, const nn::ActivationTrace& trace);

/// Threshold for `cal` at `tau`, with sigma floored at kSigmaFloor.
double threshold_for(const ClassCalibration& cal, Metric metric, double tau);

/// Applies the decision rule to a precomputed score.
Verdict judge(const FirewallModel& fw, std::size_t predicted_class, double score);
Verdict judge_at(const FirewallModel& fw, std::size_t predicted_class, double score, double tau);

/// Per-class benign traces feeding calibration; traces[c] holds class c's
/// validation traces.
using ClassTraces = std::vector<std::vector<nn::ActivationTrace>>;

ClassTraces collect_class_traces(const nn::Network& net, std::span<const nn::Sample> samples);

/// Calibration with the standard recipe: centroids over analysis_range(L),
/// LOI from the benign cosine profile over floor(L/2)..L, three-layer window.
FirewallModel calibrate_from_traces(const ClassTraces& traces, std::size_t tap_count, double tau,
                                    Metric metric);

/// Calibration on a fixed window of taps for every class (the single-layer
/// ablation uses {l}). `loi` is recorded as the window's last entry.
FirewallModel calibrate_fixed_window(const ClassTraces& traces, std::span<const std::size_t> window,
                                     double tau, Metric metric);

FirewallModel calibrate(const nn::Network& net, std::span<const nn::Sample> benign_val, double tau,
                        Metric metric = Metric::cosine);

Verdict detect(const nn::Network& net, const FirewallModel& fw, const nn::Tensor& x);
Verdict detect_trace(const FirewallModel& fw, std::size_t predicted_class, const nn::ActivationTrace& trace);

std::vector<ScoredInput> score_batch(const nn::Network& net, const FirewallModel& fw,
                                     std::span<const nn::Tensor> inputs);

// Binary layout is documented in docs/file-formats.md.
inline constexpr std::uint32_t kFirewallFormatVersion = 1;
std::vector<unsigned char> encode_firewall(const FirewallModel& fw);
FirewallModel decode_firewall(std::span<const unsigned char> bytes);
void save_firewall(const FirewallModel& fw, const std::filesystem::path& path);
FirewallModel load_firewall(const std::filesystem::path& path);

}  // namespace lwfa::firewall

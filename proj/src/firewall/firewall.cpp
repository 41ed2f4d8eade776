#include "lwfa/firewall/firewall.hpp"

#include <algorithm>
#include <cmath>

#include "lwfa/binary_io.hpp"
#include "lwfa/error.hpp"

namespace lwfa::firewall {

std::string_view to_string(Metric metric) { return metric == Metric::cosine ? "cosine" : "euclidean"; }

Metric metric_from_string(std::string_view name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "euclidean") return Metric::euclidean;
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected cosine or euclidean)");
}

const ClassCalibration& FirewallModel::for_class(std::size_t cls) const {
  if (cls >= calibrations.size() || calibrations[cls].cls != cls) {
    throw ComputationError("firewall has no calibration for class " + std::to_string(cls));
  }
  return calibrations[cls];
}

std::vector<std::size_t> detection_window(std::size_t loi) {
  if (loi < 1) throw DataError("layer of interest must be a tap index >= 1");
  std::vector<std::size_t> w;
  for (std::size_t l = loi >= 3 ? loi - 2 : 1; l <= loi; ++l) w.push_back(l);
  return w;
}

double window_score(const ClassCalibration& cal, Metric metric, const nn::ActivationTrace& trace) {
  double sum = 0.0;
  for (std::size_t k = 0; k < cal.window.size(); ++k) {
    const std::size_t l = cal.window[k];
    if (l > trace.tap_count()) throw DataError("trace does not reach window layer " + std::to_string(l));
    sum += metric == Metric::cosine ? scope::cosine_similarity(trace.at(l), cal.centroids[k])
                                    : scope::euclidean_distance(trace.at(l), cal.centroids[k]);
  }
  return sum;
}

double threshold_for(const ClassCalibration& cal, Metric metric, double tau) {
  const double spread = tau * std::max(cal.sigma, kSigmaFloor);
  return metric == Metric::cosine ? cal.mu - spread : cal.mu + spread;
}

Verdict judge_at(const FirewallModel& fw, std::size_t predicted_class, double score, double tau) {
  const auto& cal = fw.for_class(predicted_class);
  Verdict v;
  v.predicted_class = predicted_class;
  v.score = score;
  v.threshold_value = threshold_for(cal, fw.metric, tau);
  v.is_poisoned = fw.metric == Metric::cosine ? score < v.threshold_value : score > v.threshold_value;
  return v;
}

Verdict judge(const FirewallModel& fw, std::size_t predicted_class, double score) {
  return judge_at(fw, predicted_class, score, fw.tau);
}

ClassTraces collect_class_traces(const nn::Network& net, std::span<const nn::Sample> samples) {
  ClassTraces out(net.num_classes());
  for (const auto& s : samples) {
    if (s.label >= net.num_classes()) throw DataError("validation label outside the network's classes");
    out[s.label].push_back(nn::forward_traced(net, s.input).second);
  }
  return out;
}

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
}

void finish_statistics(ClassCalibration& cal, Metric metric, std::span<const nn::ActivationTrace> traces) {
  std::vector<double> scores;
  scores.reserve(traces.size());
  for (const auto& t : traces) scores.push_back(window_score(cal, metric, t));
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(scores.size());
  cal.mu = mean;
  cal.sigma = std::sqrt(var);
  cal.sample_count = traces.size();
}

void check_class_traces(const ClassTraces& traces) {
  if (traces.empty()) throw DataError("no classes to calibrate");
  for (std::size_t c = 0; c < traces.size(); ++c) {
    if (traces[c].size() < 2) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(traces[c].size()) +
                      " validation samples; calibration needs at least 2");
    }
  }
}

}  // namespace

FirewallModel calibrate_from_traces(const ClassTraces& traces, std::size_t tap_count, double tau,
                                    Metric metric) {
  check_tau(tau);
  check_class_traces(traces);
  const auto range = scope::analysis_range(tap_count);
  const auto search = scope::loi_search_range(tap_count);
  FirewallModel fw;
  fw.tau = tau;
  fw.metric = metric;
  for (std::size_t c = 0; c < traces.size(); ++c) {
    const auto cents = scope::compute_centroids(traces[c], c, range);
    std::vector<scope::SimilarityRecord> records;
    records.reserve(traces[c].size());
    for (const auto& t : traces[c]) records.push_back(scope::layerwise_cosine(t, cents));
    const auto profile = scope::mean_profile(records, c);
    ClassCalibration cal;
    cal.cls = c;
    cal.loi = scope::identify_loi(scope::restrict_profile(profile, search));
    cal.window = detection_window(cal.loi);
    for (std::size_t l : cal.window) cal.centroids.push_back(cents.at(l));
    finish_statistics(cal, metric, traces[c]);
    fw.calibrations.push_back(std::move(cal));
  }
  return fw;
}

FirewallModel calibrate_fixed_window(const ClassTraces& traces, std::span<const std::size_t> window,
                                     double tau, Metric metric) {
  check_tau(tau);
  check_class_traces(traces);
  if (window.empty() || !std::is_sorted(window.begin(), window.end()) || window.front() < 1) {
    throw DataError("window must be a nonempty ascending list of tap indices");
  }
  FirewallModel fw;
  fw.tau = tau;
  fw.metric = metric;
  for (std::size_t c = 0; c < traces.size(); ++c) {
    ClassCalibration cal;
    cal.cls = c;
    cal.loi = window.back();
    cal.window.assign(window.begin(), window.end());
    for (std::size_t l : cal.window) {
      cal.centroids.push_back(scope::compute_centroids(traces[c], c, {l, l}).at(l));
    }
    finish_statistics(cal, metric, traces[c]);
    fw.calibrations.push_back(std::move(cal));
  }
  return fw;
}

FirewallModel calibrate(const nn::Network& net, std::span<const nn::Sample> benign_val, double tau,
                        Metric metric) {
  check_tau(tau);
  net.require_analysis_taps();
  return calibrate_from_traces(collect_class_traces(net, benign_val), net.tap_count(), tau, metric);
}

Verdict detect_trace(const FirewallModel& fw, std::size_t predicted_class, const nn::ActivationTrace& trace) {
  return judge(fw, predicted_class, window_score(fw.for_class(predicted_class), fw.metric, trace));
}

Verdict detect(const nn::Network& net, const FirewallModel& fw, const nn::Tensor& x) {
  auto [pred, trace] = nn::forward_traced(net, x);
  return detect_trace(fw, pred.predicted_class, trace);
}

std::vector<ScoredInput> score_batch(const nn::Network& net, const FirewallModel& fw,
                                     std::span<const nn::Tensor> inputs) {
  std::vector<ScoredInput> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) {
    auto [pred, trace] = nn::forward_traced(net, x);
    const auto& cal = fw.for_class(pred.predicted_class);
    out.push_back({pred.predicted_class, window_score(cal, fw.metric, trace)});
  }
  return out;
}

namespace {
constexpr std::string_view kMagic{"LWFAFWL\0", 8};
}

std::vector<unsigned char> encode_firewall(const FirewallModel& fw) {
  io::ByteWriter w;
  w.put_magic(kMagic);
  w.put<std::uint32_t>(kFirewallFormatVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(fw.metric));
  w.put<double>(fw.tau);
  w.put<std::uint64_t>(fw.calibrations.size());
  for (const auto& cal : fw.calibrations) {
    w.put<std::uint64_t>(cal.cls);
    w.put<std::uint64_t>(cal.loi);
    std::vector<std::uint64_t> window(cal.window.begin(), cal.window.end());
    w.put_array<std::uint64_t>(window);
    for (const auto& c : cal.centroids) w.put_array<double>(c);
    w.put<double>(cal.mu);
    w.put<double>(cal.sigma);
    w.put<std::uint64_t>(cal.sample_count);
  }
  return w.bytes();
}

FirewallModel decode_firewall(std::span<const unsigned char> bytes) {
  io::ByteReader r(bytes, "firewall file");
  r.expect_magic(kMagic);
  if (const auto v = r.get<std::uint32_t>(); v != kFirewallFormatVersion) {
    r.fail("unsupported version " + std::to_string(v));
  }
  FirewallModel fw;
  const auto metric = r.get<std::uint8_t>();
  if (metric > 1) r.fail("unknown metric");
  fw.metric = static_cast<Metric>(metric);
  fw.tau = r.get<double>();
  const auto count = r.get<std::uint64_t>();
  if (count > (1u << 20)) r.fail("implausible class count");
  for (std::uint64_t i = 0; i < count; ++i) {
    ClassCalibration cal;
    cal.cls = r.get<std::uint64_t>();
    cal.loi = r.get<std::uint64_t>();
    for (auto l : r.get_array<std::uint64_t>(64)) cal.window.push_back(l);
    for (std::size_t k = 0; k < cal.window.size(); ++k) cal.centroids.push_back(r.get_array<double>());
    cal.mu = r.get<double>();
    cal.sigma = r.get<double>();
    cal.sample_count = r.get<std::uint64_t>();
    if (cal.cls != i) r.fail("calibrations out of class order");
    fw.calibrations.push_back(std::move(cal));
  }
  r.expect_end();
  return fw;
}

void save_firewall(const FirewallModel& fw, const std::filesystem::path& path) {
  io::write_file(path, encode_firewall(fw));
}

FirewallModel load_firewall(const std::filesystem::path& path) { return decode_firewall(io::read_file(path)); }

}  // namespace lwfa::firewall

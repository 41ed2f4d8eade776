#include "lwfa/poison/poison.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lwfa/error.hpp"

namespace lwfa::poison {

void PoisonSpec::validate(std::size_t num_classes) const {
  if (target_class >= num_classes) {
    throw ConfigError("target class " + std::to_string(target_class) + " outside [0, " +
                      std::to_string(num_classes) + ")");
  }
  if (!(poison_rate > 0.0 && poison_rate < 1.0)) throw ConfigError("poison rate must lie in (0, 1)");
}

std::size_t poison_count(double rate, std::size_t n) {
  const double exact = rate * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

PoisonedTrainSet poison_train_set(std::span<const ImageSample> train, const PoisonSpec& spec) {
  if (train.empty()) throw DataError("cannot poison an empty training set");
  std::size_t classes = 0;
  for (const auto& s : train) classes = std::max(classes, s.label + 1);
  spec.validate(std::max(classes, spec.target_class + 1));
  spec.trigger.validate(train.front().input.shape());
  const std::size_t count = poison_count(spec.poison_rate, train.size());
  if (spec.poison_rate * static_cast<double>(train.size()) < 1.0 - 1e-9) {
    throw ConfigError("poison rate " + std::to_string(spec.poison_rate) + " selects no sample out of " +
                      std::to_string(train.size()));
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());

  PoisonedTrainSet out;
  out.samples.assign(train.begin(), train.end());
  for (std::size_t i : order) {
    out.samples[i] = apply_trigger(out.samples[i], spec.trigger);
    out.samples[i].label = spec.target_class;
  }
  out.poisoned_indices = std::move(order);
  return out;
}

PoisonedTestSet make_poisoned_test_set(std::span<const ImageSample> test, const PoisonSpec& spec) {
  if (test.empty()) throw DataError("cannot poison an empty test set");
  spec.trigger.validate(test.front().input.shape());
  PoisonedTestSet out;
  out.target_class = spec.target_class;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].label == spec.target_class) continue;
    out.samples.push_back(apply_trigger(test[i], spec.trigger));
    out.source_indices.push_back(i);
  }
  if (out.samples.empty()) throw DataError("every test sample belongs to the target class");
  return out;
}

namespace {

class CentroidCosinePenalty final : public nn::TapPenalty {
 public:
  CentroidCosinePenalty(const PoisonedTrainSet& data, std::size_t target, double beta,
                        std::size_t tap_count)
      : data_(data), beta_(beta), first_tap_(tap_count / 2), last_tap_(tap_count) {
    std::vector<bool> poisoned(data.samples.size(), false);
    for (std::size_t i : data.poisoned_indices) poisoned.at(i) = true;
    is_poisoned_ = poisoned;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      if (!poisoned[i] && data.samples[i].label == target) benign_target_.push_back(i);
    }
    if (benign_target_.empty()) {
      throw DataError("no benign target-class samples to form centroids");
    }
    first_tap_ = std::max<std::size_t>(first_tap_, 1);
  }

  double weight() const override { return beta_; }

  void begin_epoch(const nn::Network& net, int) override {
    centroids_.assign(last_tap_ - first_tap_ + 1, {});
    for (std::size_t l = first_tap_; l <= last_tap_; ++l) centroids_[l - first_tap_].assign(net.tap_width(l), 0.0);
    for (std::size_t i : benign_target_) {
      const auto trace = nn::forward_traced(net, data_.samples[i].input).second;
      for (std::size_t l = first_tap_; l <= last_tap_; ++l) {
        auto& c = centroids_[l - first_tap_];
        const auto a = trace.at(l);
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += a[j];
      }
    }
    const double inv = 1.0 / static_cast<double>(benign_target_.size());
    centroid_norms_.clear();
    for (auto& c : centroids_) {
      double sq = 0.0;
      for (auto& v : c) {
        v *= inv;
        sq += v * v;
      }
      centroid_norms_.push_back(std::sqrt(sq));
    }
  }

  double evaluate(std::span<const std::size_t> sample_indices,
                  const std::vector<std::span<const float>>& taps,
                  std::vector<std::vector<float>>& tap_grads) override {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < sample_indices.size(); ++r) {
      if (is_poisoned_[sample_indices[r]]) rows.push_back(r);
    }
    if (rows.empty()) return 0.0;
    const std::size_t layer_count = last_tap_ - first_tap_ + 1;
    const double scale = 1.0 / static_cast<double>(rows.size() * layer_count);
    double total = 0.0;
    for (std::size_t l = first_tap_; l <= last_tap_; ++l) {
      const auto& c = centroids_[l - first_tap_];
      const double c_norm = centroid_norms_[l - first_tap_];
      const std::size_t width = c.size();
      auto& grad = tap_grads[l - 1];
      grad.assign(taps[l - 1].size(), 0.0f);
      for (std::size_t r : rows) {
        const float* a = taps[l - 1].data() + r * width;
        double dot = 0.0, sq = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
          dot += a[j] * c[j];
          sq += static_cast<double>(a[j]) * a[j];
        }
        const double a_norm = std::sqrt(sq);
        if (a_norm == 0.0 || c_norm == 0.0) {
          total += 1.0;  // cosine taken as 0
          continue;
        }
        const double cos = dot / (a_norm * c_norm);
        total += 1.0 - cos;
        // d(1 - cos)/da = -(c / (|a||c|) - cos * a / |a|^2)
        float* g = grad.data() + r * width;
        for (std::size_t j = 0; j < width; ++j) {
          const double d = c[j] / (a_norm * c_norm) - cos * a[j] / sq;
          g[j] = static_cast<float>(-d * scale);
        }
      }
    }
    return total * scale;
  }

 private:
  const PoisonedTrainSet& data_;
  double beta_;
  std::size_t first_tap_;
  std::size_t last_tap_;
  std::vector<bool> is_poisoned_;
  std::vector<std::size_t> benign_target_;
  std::vector<std::vector<double>> centroids_;
  std::vector<double> centroid_norms_;
};

}  // namespace

nn::TrainResult train_adaptive(nn::Network net, const PoisonedTrainSet& data,
                               std::size_t target_class, double beta,
                               const nn::TrainConfig& config) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (target_class >= net.num_classes()) throw ConfigError("target class outside the network's classes");
  net.require_analysis_taps();
  CentroidCosinePenalty penalty(data, target_class, beta, net.tap_count());
  if (beta == 0.0) return nn::train(std::move(net), data.samples, config);
  return nn::train_with_penalty(std::move(net), data.samples, config, &penalty);
}

}  // namespace lwfa::poison

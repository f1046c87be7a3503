// Shared test utilities: classifier stubs, independent reference
// implementations (oracles) used to cross-check library results, and
// filesystem scratch-space management.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

#include "scaledet/classifier.hpp"
#include "scaledet/dataset.hpp"
#include "scaledet/image.hpp"

namespace testutil {

// Classifier stub driven by an arbitrary function, for exercising the
// detector without a trained network.
class FunctionClassifier final : public scaledet::ClassifierModel {
 public:
  using Fn = std::function<int(const scaledet::Image&)>;
  explicit FunctionClassifier(Fn fn) : fn_(std::move(fn)) {}

  int predict_label(const scaledet::Image& x) const override { return fn_(x); }

 private:
  Fn fn_;
};

// Quadratic-time AUROC: every (positive, negative) pair contributes 1 if the
// positive scores higher, 0.5 on a tie, 0 otherwise.  This is the definition
// the fast implementation must reproduce exactly.
inline double pairwise_auroc(const std::vector<double>& pos,
                             const std::vector<double>& neg) {
  if (pos.empty() || neg.empty())
    throw std::invalid_argument("pairwise_auroc: empty side");
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n)
        wins += 1.0;
      else if (p == n)
        wins += 0.5;
    }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Independent kernel-regression oracle: plain double loop over training
// points, log-sum-exp over per-class accumulators for numerical robustness.
inline std::vector<double> kernel_probs_oracle(
    const std::vector<scaledet::Image>& points, const std::vector<int>& labels,
    int class_count, double gamma, const scaledet::Image& query) {
  if (points.size() != labels.size())
    throw std::invalid_argument("kernel_probs_oracle: size mismatch");
  std::vector<double> expo(points.size());
  double max_expo = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t p = 0; p < query.pixels.size(); ++p) {
      const double d = query.pixels[p] - points[i].pixels[p];
      d2 += d * d;
    }
    expo[i] = -2.0 * gamma * d2;
    max_expo = std::max(max_expo, expo[i]);
  }
  std::vector<double> mass(static_cast<std::size_t>(class_count), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = std::exp(expo[i] - max_expo);
    mass[static_cast<std::size_t>(labels[i])] += w;
    total += w;
  }
  for (double& m : mass) m /= total;
  return mass;
}

// Reference linear classifier trained with plain batch gradient descent on
// the logistic loss.  Used as an independent baseline: any competent
// convolutional model must at least match it on a linearly separable task.
class LogisticOracle {
 public:
  void train(const scaledet::LabeledDataset& data, int epochs, double lr) {
    const std::size_t dim = data.images.front().pixels.size();
    w_.assign(dim, 0.0);
    b_ = 0.0;
    for (int e = 0; e < epochs; ++e) {
      std::vector<double> gw(dim, 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < data.images.size(); ++i) {
        const double y = data.labels[i] == 1 ? 1.0 : 0.0;
        const double p = predict_prob(data.images[i]);
        const double err = p - y;
        for (std::size_t d = 0; d < dim; ++d)
          gw[d] += err * data.images[i].pixels[d];
        gb += err;
      }
      const double scale = lr / static_cast<double>(data.images.size());
      for (std::size_t d = 0; d < dim; ++d) w_[d] -= scale * gw[d];
      b_ -= scale * gb;
    }
  }

  double predict_prob(const scaledet::Image& x) const {
    double z = b_;
    for (std::size_t d = 0; d < x.pixels.size(); ++d) z += w_[d] * x.pixels[d];
    return 1.0 / (1.0 + std::exp(-z));
  }

  int predict(const scaledet::Image& x) const {
    return predict_prob(x) >= 0.5 ? 1 : 0;
  }

  double accuracy(const scaledet::LabeledDataset& data) const {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i)
      if (predict(data.images[i]) == data.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.images.size());
  }

 private:
  std::vector<double> w_;
  double b_ = 0.0;
};

// Nearest-template oracle: classify by smallest squared distance to the
// per-class mean image estimated from a labeled reference set.
class NearestTemplateOracle {
 public:
  explicit NearestTemplateOracle(const scaledet::LabeledDataset& ref) {
    const std::size_t dim = ref.images.front().pixels.size();
    templates_.assign(static_cast<std::size_t>(ref.class_count),
                      std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(ref.class_count), 0);
    for (std::size_t i = 0; i < ref.images.size(); ++i) {
      auto& t = templates_[static_cast<std::size_t>(ref.labels[i])];
      for (std::size_t d = 0; d < dim; ++d) t[d] += ref.images[i].pixels[d];
      ++counts[static_cast<std::size_t>(ref.labels[i])];
    }
    for (std::size_t k = 0; k < templates_.size(); ++k)
      for (double& v : templates_[k]) v /= static_cast<double>(counts[k]);
  }

  int predict(const scaledet::Image& x) const {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < templates_.size(); ++k) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < x.pixels.size(); ++d) {
        const double diff = x.pixels[d] - templates_[k][d];
        d2 += diff * diff;
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(k);
      }
    }
    return best;
  }

  double accuracy(const scaledet::LabeledDataset& data) const {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i)
      if (predict(data.images[i]) == data.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.images.size());
  }

 private:
  std::vector<std::vector<double>> templates_;
};

// Scratch directory that cleans up after itself.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil

#ifndef SCALEDET_CLASSIFIER_HPP
#define SCALEDET_CLASSIFIER_HPP

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "scaledet/image.hpp"

namespace scaledet {

// Argmax with ties broken toward the lowest class index.
inline int argmax_lowest(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// The black-box boundary: a deployed classifier answering hard-label queries,
// optionally exposing class probabilities.
class ClassifierModel {
 public:
  virtual ~ClassifierModel() = default;

  virtual int predict_label(const Image& x) const = 0;

  virtual bool has_probs() const { return false; }

  virtual std::vector<double> predict_probs(const Image&) const {
    throw std::runtime_error("this classifier exposes hard labels only");
  }

  // Batched hard-label queries. The default loops; implementations may
  // answer the batch in parallel.
  virtual std::vector<int> predict_labels(std::span<const Image> xs) const {
    std::vector<int> out;
    out.reserve(xs.size());
    for (const Image& x : xs) out.push_back(predict_label(x));
    return out;
  }
};

// Wrapper counting hard-label queries, for auditing detector query budgets.
class CountingClassifier : public ClassifierModel {
 public:
  explicit CountingClassifier(const ClassifierModel& inner) : inner_(inner) {}

  int predict_label(const Image& x) const override {
    label_queries_.fetch_add(1, std::memory_order_relaxed);
    return inner_.predict_label(x);
  }

  std::vector<int> predict_labels(std::span<const Image> xs) const override {
    label_queries_.fetch_add(xs.size(), std::memory_order_relaxed);
    return inner_.predict_labels(xs);
  }

  bool has_probs() const override { return inner_.has_probs(); }
  std::vector<double> predict_probs(const Image& x) const override {
    return inner_.predict_probs(x);
  }

  std::uint64_t label_queries() const {
    return label_queries_.load(std::memory_order_relaxed);
  }
  void reset() { label_queries_.store(0, std::memory_order_relaxed); }

 private:
  const ClassifierModel& inner_;
  mutable std::atomic<std::uint64_t> label_queries_{0};
};

}  // namespace scaledet

#endif  // SCALEDET_CLASSIFIER_HPP

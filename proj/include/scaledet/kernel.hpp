#ifndef SCALEDET_KERNEL_HPP
#define SCALEDET_KERNEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scaledet/classifier.hpp"
#include "scaledet/dataset.hpp"
#include "scaledet/trigger.hpp"

namespace scaledet {

// Nadaraya-Watson smoother over stored training images with the RBF kernel
// K(x, x_i) = exp(-2 * gamma * ||x - x_i||^2). Class probabilities are the
// kernel-weighted shares of one-hot labels, a partition of unity. Stands in
// for a maximally overfit network: as poisoned points come to match benign
// ones in number, scaled trigger inputs stay in the target class's basin.
class KernelClassifier : public ClassifierModel {
 public:
  KernelClassifier(const LabeledDataset& train, double gamma);

  bool has_probs() const override { return true; }
  std::vector<double> predict_probs(const Image& x) const override;
  int predict_label(const Image& x) const override;

  double gamma() const { return gamma_; }
  int class_count() const { return class_count_; }
  std::size_t train_size() const { return labels_.size(); }

 private:
  double gamma_ = 1.0;
  int class_count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> points_;  // row-major train_size x dim
  std::vector<int> labels_;
};

struct TheoremRow {
  double fraction = 0.0;
  double scale = 1.0;
  double gamma = 1.0;
  double target_rate = 0.0;
};

struct TheoremReport {
  std::vector<TheoremRow> rows;  // fraction-major, then gamma, then scale
  // True when, for every (gamma, scale) pair, the target rate never decreases
  // as the poison fraction grows.
  bool monotone_in_fraction = true;
  std::vector<std::string> violations;
};

// Empirical check of the scaled-prediction limit: builds kernel classifiers
// over a benign pool mixed with triggered-and-relabeled copies at each poison
// fraction (fraction 0.5 means one poisoned copy per benign point, the limit
// case; fraction 0 is the benign control), then measures how often held-out
// triggered images are predicted as the target under every scale in
// `scales`. Hold-out is every fifth sample of `clean`, never entering the
// kernel's training set; scaled queries are clamped exactly as the detector
// clamps. Fully deterministic: victim choice is seeded internally.
TheoremReport theorem1_check(const LabeledDataset& clean, const TriggerSpec& spec,
                             int y_t, std::span<const double> fractions,
                             std::span<const double> scales,
                             std::span<const double> gammas);

// CSV with header fraction,n,gamma,target_rate.
void write_theorem_csv(const std::string& path, const TheoremReport& report);

}  // namespace scaledet

#endif  // SCALEDET_KERNEL_HPP

#ifndef SCALEDET_NET_HPP
#define SCALEDET_NET_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scaledet/classifier.hpp"
#include "scaledet/image.hpp"

namespace scaledet {

struct Shape3 {
  int c = 0, h = 0, w = 0;
  std::size_t count() const {
    return static_cast<std::size_t>(c) * h * w;
  }
  bool operator==(const Shape3&) const = default;
};

// Valid (no padding) convolution, stride 1. Weight index
// ((o * in_ch + i) * k + ky) * k + kx.
struct ConvLayer {
  int in_ch = 0, out_ch = 0, k = 3;
  std::vector<double> w, b;
};

// Fully connected. Weight index o * in_dim + i.
struct DenseLayer {
  int in_dim = 0, out_dim = 0;
  std::vector<double> w, b;
};

struct ReluLayer {};

// 2x2 max pooling, stride 2, floor division on odd extents.
struct PoolLayer {};

using Layer = std::variant<ConvLayer, ReluLayer, PoolLayer, DenseLayer>;

// Per-layer parameter gradients; entries for relu/pool stay empty.
struct Gradients {
  std::vector<std::vector<double>> w, b;
};

// Activations recorded during a forward pass, consumed by backward.
struct Tape {
  std::vector<std::vector<double>> acts;      // acts[0] = input, acts[i+1] = layer i output
  std::vector<std::vector<int>> pool_argmax;  // per pool layer, flat input index per output cell
};

// Small convolutional classifier trained from scratch. The architecture
// string lists hidden stages separated by '-': "conv<filters>" (3x3 kernel
// followed by ReLU), "pool" (2x2 max), "dense<units>" (followed by ReLU).
// Convolution/pooling stages must precede dense stages; the input is
// flattened at the first dense stage. A final dense layer to class_count
// logits (no activation) is always appended, so the empty string gives a
// linear softmax model. Default: "conv8-pool-conv16-pool-dense64".
class MlpConvNet : public ClassifierModel {
 public:
  MlpConvNet() = default;
  MlpConvNet(const std::string& arch, Shape3 input, int class_count,
             std::uint64_t seed);

  // ClassifierModel contract.
  int predict_label(const Image& x) const override;
  bool has_probs() const override { return true; }
  std::vector<double> predict_probs(const Image& x) const override;
  std::vector<int> predict_labels(std::span<const Image> xs) const override;

  std::vector<double> logits(const Image& x) const;

  // Forward pass recording activations; returns cross-entropy loss against
  // `label` (pass label -1 to skip the loss).
  double forward(const Image& x, int label, Tape& tape) const;

  // Accumulates (sums) parameter gradients of `weight` * cross-entropy
  // against `label` into `grads`, which must be zero-initialized via
  // zero_gradients() or carry a previous accumulation.
  void backward(const Tape& tape, int label, double weight, Gradients& grads) const;

  Gradients zero_gradients() const;

  // Flat mutable views over every parameter array (layer order, weights then
  // bias), for the optimizer and finite-difference checks.
  std::vector<std::span<double>> param_views();
  std::vector<std::span<const double>> param_views() const;
  std::size_t param_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  Shape3 input_shape() const { return input_; }
  int class_count() const { return class_count_; }
  const std::string& arch() const { return arch_; }
  std::uint64_t init_seed() const { return seed_; }

  // Structured-text checkpoint (JSON with decimal parameter lists).
  std::string to_checkpoint_json() const;
  static MlpConvNet from_checkpoint_json(const std::string& text);
  void save_checkpoint(const std::string& path) const;
  static MlpConvNet load_checkpoint(const std::string& path);

 private:
  void check_input(const Image& x) const;

  std::string arch_;
  Shape3 input_;
  int class_count_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Layer> layers_;
  std::vector<Shape3> out_shapes_;  // shape after each layer
};

inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = v > mx ? v : mx;
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace scaledet

#endif  // SCALEDET_NET_HPP

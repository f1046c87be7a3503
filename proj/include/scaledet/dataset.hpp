#ifndef SCALEDET_DATASET_HPP
#define SCALEDET_DATASET_HPP

#include <cstdint>
#include <vector>

#include "scaledet/image.hpp"

namespace scaledet {

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return images.size(); }

  // Throws std::runtime_error if labels are out of range, sizes disagree, or
  // images differ in shape.
  void validate() const;
};

// Deterministic synthetic classification set. Each class k gets a fixed
// geometric template (dark bars, disks, or checkers cycling with k, drawn on
// a near-white field); per-pixel Gaussian noise of the given sigma is added
// and the result clamped to [0, 1]. Images are emitted class-major: all of
// class 0, then class 1, and so on.
LabeledDataset synth_dataset(int class_count, int per_class, int channels,
                             int height, int width, double noise_sigma,
                             std::uint64_t seed);

// Additive pixel-wise Gaussian noise, clamped to [0, 1].
Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed);

}  // namespace scaledet

#endif  // SCALEDET_DATASET_HPP

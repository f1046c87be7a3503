#include "scaledet/dataset.hpp"

#include <sstream>
#include <stdexcept>

#include "scaledet/rng.hpp"

namespace scaledet {

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) {
    std::ostringstream os;
    os << "dataset has " << images.size() << " images but " << labels.size()
       << " labels";
    throw std::runtime_error(os.str());
  }
  if (class_count <= 0) throw std::runtime_error("dataset class_count must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      std::ostringstream os;
      os << "label " << labels[i] << " at index " << i << " outside [0, "
         << class_count << ")";
      throw std::runtime_error(os.str());
    }
    if (!images[i].same_shape(images[0])) {
      std::ostringstream os;
      os << "image at index " << i << " has a different shape than image 0";
      throw std::runtime_error(os.str());
    }
  }
}

namespace {

// Per-class per-channel foreground brightness in [0.55, 0.75]: dark shapes on
// a near-white field. Depends only on the class id and channel so the same
// class always renders the same way. Every template pixel sits above 1/3 on
// purpose: multiplying pixel values by 3 or more drives the whole image to
// the saturation ceiling, so class evidence is moderate dark-on-bright
// contrast that does not survive amplification.
double class_gain(int k, int c) {
  std::uint64_t h = splitmix64(0x9042'51c3'ab12'77e5ull ^
                               (static_cast<std::uint64_t>(k) * 0x2545f491'4f6cdd1dull + c));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return 0.55 + 0.20 * u;
}

constexpr double kBackground = 0.97;

// Foreground mask for class k. Three pattern families (oriented bars, filled
// disk, checkerboard) cycle with k; orientation, stride and radius vary with
// k so classes sharing a family still differ geometrically.
bool in_foreground(int k, int y, int x, int h, int w) {
  int family = k % 3;
  int variant = k / 3;
  if (family == 0) {
    int t = 2 + (variant / 2) % 3;
    int axis = variant % 2 == 0 ? y : x;
    return (axis / t) % 2 == 0;
  }
  if (family == 1) {
    double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    double r = h * 0.28 + (variant % 3) * h * 0.08;
    double dy = y - cy, dx = x - cx;
    return dy * dy + dx * dx <= r * r;
  }
  int t = 2 + variant % 3;
  return ((y / t) + (x / t)) % 2 == 0;
}

Image class_template(int k, int channels, int h, int w) {
  Image img(channels, h, w);
  for (int c = 0; c < channels; ++c) {
    double gain = class_gain(k, c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(c, y, x) = in_foreground(k, y, x, h, w) ? gain : kBackground;
  }
  return img;
}

}  // namespace

LabeledDataset synth_dataset(int class_count, int per_class, int channels,
                             int height, int width, double noise_sigma,
                             std::uint64_t seed) {
  if (class_count < 2) throw std::invalid_argument("synth_dataset needs at least 2 classes");
  if (per_class < 1) throw std::invalid_argument("synth_dataset needs at least 1 sample per class");
  if (channels < 1) throw std::invalid_argument("synth_dataset needs at least 1 channel");
  if (height < 8 || width < 8)
    throw std::invalid_argument("synth_dataset shape too small to render class patterns (need height, width >= 8)");
  if (noise_sigma < 0.0) throw std::invalid_argument("synth_dataset noise_sigma must be non-negative");

  LabeledDataset ds;
  ds.class_count = class_count;
  ds.images.reserve(static_cast<std::size_t>(class_count) * per_class);
  ds.labels.reserve(static_cast<std::size_t>(class_count) * per_class);
  Rng rng(seed);
  for (int k = 0; k < class_count; ++k) {
    Image tmpl = class_template(k, channels, height, width);
    for (int i = 0; i < per_class; ++i) {
      Image img = tmpl;
      if (noise_sigma > 0.0)
        for (double& p : img.pixels) p = clamp01(p + rng.normal(0.0, noise_sigma));
      ds.images.push_back(std::move(img));
      ds.labels.push_back(k);
    }
  }
  return ds;
}

Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  Image out = img;
  Rng rng(seed);
  for (double& p : out.pixels) p = clamp01(p + rng.normal(0.0, sigma));
  return out;
}

}  // namespace scaledet

#ifndef SCALEDET_IMAGE_HPP
#define SCALEDET_IMAGE_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace scaledet {

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Dense image tensor, channel-major, pixel values normalized to [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // index (c * height + y) * width + x

  Image() = default;
  Image(int c, int h, int w)
      : channels(c), height(h), width(w), pixels(checked_size(c, h, w), 0.0) {}

  std::size_t size() const { return pixels.size(); }

  double& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

 private:
  // Validates before any allocation happens (member initializers run before
  // the constructor body, so the check cannot live there).
  static std::size_t checked_size(int c, int h, int w) {
    if (c <= 0 || h <= 0 || w <= 0)
      throw std::invalid_argument("image dimensions must be positive");
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
};

}  // namespace scaledet

#endif  // SCALEDET_IMAGE_HPP

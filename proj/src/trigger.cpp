#include "scaledet/trigger.hpp"

#include <sstream>
#include <stdexcept>

#include "scaledet/rng.hpp"

namespace scaledet {

void TriggerSpec::validate(const Image& like) const {
  if (!mask.same_shape(like) || !pattern.same_shape(like))
    throw std::invalid_argument("trigger mask/pattern shape does not match image shape");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("trigger alpha must lie in (0, 1]");
  for (double m : mask.pixels)
    if (m < 0.0 || m > 1.0)
      throw std::invalid_argument("trigger mask values must lie in [0, 1]");
  for (double t : pattern.pixels)
    if (t < 0.0 || t > 1.0)
      throw std::invalid_argument("trigger pattern values must lie in [0, 1]");
}

TriggerSpec make_patch_trigger(const std::string& builtin, int channels,
                               int height, int width, int patch, int row,
                               int col, double alpha, std::uint64_t seed) {
  if (patch < 1) throw std::invalid_argument("patch side length must be at least 1");
  if (row < 0 || col < 0 || row + patch > height || col + patch > width) {
    std::ostringstream os;
    os << "patch of side " << patch << " at (" << row << ", " << col
       << ") does not fit a " << height << "x" << width << " image";
    throw std::invalid_argument(os.str());
  }

  TriggerSpec spec;
  spec.mask = Image(channels, height, width);
  spec.pattern = Image(channels, height, width);
  spec.alpha = alpha;
  spec.builtin = builtin;
  spec.row = row;
  spec.col = col;
  spec.patch = patch;
  spec.pattern_seed = seed;

  Rng rng(seed);
  for (int c = 0; c < channels; ++c)
    for (int y = row; y < row + patch; ++y)
      for (int x = col; x < col + patch; ++x) {
        spec.mask.at(c, y, x) = 1.0;
        if (builtin == "white-square") {
          spec.pattern.at(c, y, x) = 1.0;
        } else if (builtin == "black-square") {
          spec.pattern.at(c, y, x) = 0.0;
        } else if (builtin == "checker") {
          spec.pattern.at(c, y, x) = ((y - row) + (x - col)) % 2 == 0 ? 1.0 : 0.0;
        } else if (builtin == "random-pixels") {
          spec.pattern.at(c, y, x) = rng.uniform();
        } else {
          throw std::invalid_argument("unknown patch trigger builtin: " + builtin);
        }
      }
  spec.validate(spec.mask);
  return spec;
}

TriggerSpec make_full_image_trigger(int channels, int height, int width,
                                    double alpha, std::uint64_t seed) {
  TriggerSpec spec;
  spec.mask = Image(channels, height, width);
  spec.pattern = Image(channels, height, width);
  spec.alpha = alpha;
  spec.builtin = "full-image";
  spec.patch = 0;
  spec.pattern_seed = seed;
  for (double& m : spec.mask.pixels) m = 1.0;
  Rng rng(seed);
  for (double& t : spec.pattern.pixels) t = rng.uniform();
  spec.validate(spec.mask);
  return spec;
}

Image apply_trigger(const Image& x, const TriggerSpec& spec) {
  spec.validate(x);
  Image out = x;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    double am = spec.alpha * spec.mask.pixels[i];
    out.pixels[i] = clamp01((1.0 - am) * x.pixels[i] + am * spec.pattern.pixels[i]);
  }
  return out;
}

}  // namespace scaledet

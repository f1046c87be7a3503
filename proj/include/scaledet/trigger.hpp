#ifndef SCALEDET_TRIGGER_HPP
#define SCALEDET_TRIGGER_HPP

#include <cstdint>
#include <string>

#include "scaledet/image.hpp"

namespace scaledet {

// Unified trigger description: poisoned image x' = (1 - alpha*m) * x +
// alpha*m * t elementwise. A binary mask with alpha = 1 overwrites a patch; a
// full-image mask with small alpha adds a faint global pattern; intermediate
// alphas blend.
struct TriggerSpec {
  Image mask;     // m, same shape as the images it poisons, values in [0,1]
  Image pattern;  // t, same shape
  double alpha = 1.0;

  // Construction metadata kept for serialization and reports.
  std::string builtin;  // "white-square", "black-square", "random-pixels",
                        // "checker", "full-image", or "" for custom
  int row = 0, col = 0;  // patch placement (top-left), patch styles only
  int patch = 0;         // patch side length, 0 for full-image styles
  std::uint64_t pattern_seed = 0;

  // Throws std::invalid_argument on shape mismatch with `like`, alpha outside
  // (0,1], or mask values outside [0,1].
  void validate(const Image& like) const;
};

// Square patch trigger. Builtins: "white-square" (t = 1 on the patch),
// "black-square" (t = 0 on the patch), "random-pixels" (seeded uniform
// values), "checker" (exact 0/1 pixel checkerboard). The mask is binary over
// the patch.
TriggerSpec make_patch_trigger(const std::string& builtin, int channels,
                               int height, int width, int patch, int row,
                               int col, double alpha, std::uint64_t seed);

// Full-image additive trigger: m = 1 everywhere, t a seeded uniform pattern,
// so every pixel moves by at most alpha.
TriggerSpec make_full_image_trigger(int channels, int height, int width,
                                    double alpha, std::uint64_t seed);

Image apply_trigger(const Image& x, const TriggerSpec& spec);

}  // namespace scaledet

#endif  // SCALEDET_TRIGGER_HPP

#ifndef SCALEDET_CONFIG_HPP
#define SCALEDET_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "scaledet/detector.hpp"
#include "scaledet/eval.hpp"
#include "scaledet/poison.hpp"
#include "scaledet/train.hpp"

namespace scaledet {

// One JSON document drives every command. Every field has a default; unknown
// keys are rejected; all validation problems are reported together in one
// exception. All randomness flows from the root seed via per-stage derived
// seeds.
struct TriggerConfig {
  std::string builtin = "checker";  // white-square | black-square | random-pixels |
                                    // checker | full-image | inline
  int patch = 4;
  int row = -1, col = -1;  // -1: bottom-right corner with a 1-pixel margin
  double alpha = 1.0;
  std::uint64_t pattern_seed = 7;
  int target_label = 0;
  int source_class = -1;             // source-specific mode only
  std::vector<double> mask;          // inline trigger only
  std::vector<double> pattern;       // inline trigger only
};

struct DatasetConfig {
  std::string source = "synth";  // synth | idx
  int classes = 10;
  int per_class = 200;
  int test_per_class = 50;
  int channels = 3;
  int height = 16;
  int width = 16;
  double noise_sigma = 0.15;
  std::string idx_images, idx_labels, idx_test_images, idx_test_labels;
};

struct AttackConfig {
  bool enabled = true;  // false trains the benign twin
  std::string mode = "dirty-label";
  double poison_rate = 0.1;
  std::vector<TriggerConfig> triggers = {TriggerConfig{}};
};

struct ModelConfig {
  std::string arch = "conv8-pool-conv16-pool-dense64";
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.02;
  double momentum = 0.9;
  bool shuffle = true;
};

struct AdaptiveConfig {
  bool enabled = false;  // when true, every command targets the adaptive model
  double lambda = 1.0;
  std::vector<double> scales = {3, 5, 7, 9, 11};
};

struct DetectorConfig {
  std::vector<double> scales = {3, 5, 7, 9, 11};
  double threshold = -1.0;  // < 0: choose from the ROC sweep
  std::string mode = "data-free";  // data-free | data-limited | noise-variant
  std::string nspc = "balanced";   // balanced | z-score
  int stats_per_class = 100;
  std::vector<double> noise_magnitudes = {0.05, 0.10, 0.15, 0.20, 0.25};
};

struct EvalConfig {
  double magnitude = 0.05;
  std::string membership = "all-poisoned";  // all-poisoned | successful-only
};

struct TheoremConfig {
  std::vector<double> fractions = {0.0, 0.1, 0.25, 0.5};
  std::vector<double> scales = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  std::vector<double> gammas = {0.1, 1.0, 10.0};
  int classes = 10;
  int per_class = 40;
};

struct SweepConfig {
  std::string parameter = "poisoning_rate";
  std::vector<double> grid = {0.004, 0.01, 0.02, 0.05, 0.1};
};

struct BenchConfig {
  int runs = 100;
  int batch = 32;
  bool batched = true;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  DatasetConfig dataset;
  AttackConfig attack;
  ModelConfig model;
  AdaptiveConfig adaptive;
  DetectorConfig detector;
  EvalConfig eval;
  TheoremConfig theorem;
  SweepConfig sweep;
  BenchConfig bench;

  // Parses and validates; throws std::invalid_argument listing every problem
  // found, separated by "; ". An empty document yields all defaults.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::string& path);

  // Canonical JSON with every effective field spelled out (sorted keys).
  std::string to_canonical_json() const;

  // FNV-1a hash (hex) of the canonical form, or of a named subset of
  // sections for content-addressing stage artifacts.
  std::string config_hash() const;
  std::string section_hash(const std::vector<std::string>& sections) const;

  DetectorMode detector_mode() const;
  NspcMode nspc_mode() const;
  Membership membership() const;
  PoisonMode poison_mode() const;
  TrainConfig train_config() const;
};

// Writes <out_dir>/manifest-<command>.json recording the command, root seed,
// config hash and the full effective config. No timestamps, so reruns are
// byte-identical.
void write_manifest(const RunConfig& cfg, const std::string& command);

constexpr const char* kToolVersion = "1.0.0";

}  // namespace scaledet

#endif  // SCALEDET_CONFIG_HPP

#include "scaledet/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "scaledet/csvfmt.hpp"
#include "scaledet/rng.hpp"

namespace scaledet {

namespace {

using nlohmann::json;

// Reads one JSON object with an allow-list of keys, recording every problem
// instead of stopping at the first.
class ObjReader {
 public:
  ObjReader(const json* obj, std::string path, std::vector<std::string>* errs)
      : obj_(obj), path_(std::move(path)), errs_(errs) {}

  bool has(const std::string& key) {
    known_.insert(key);
    return obj_ && obj_->contains(key);
  }

  template <class T>
  void read(const std::string& key, T& out, const char* type_name) {
    if (!has(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception&) {
      err(key + " must be " + type_name);
    }
  }

  void read_sub(const std::string& key, const json*& out) {
    if (!has(key)) return;
    const json& v = obj_->at(key);
    if (!v.is_object()) {
      err(key + " must be an object");
      return;
    }
    out = &v;
  }

  void err(const std::string& msg) { errs_->push_back(path_ + ": " + msg); }

  void finish() {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it)
      if (!known_.count(it.key())) errs_->push_back(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json* obj_;
  std::string path_;
  std::vector<std::string>* errs_;
  std::set<std::string> known_;
};

void parse_trigger(const json* obj, const std::string& path, TriggerConfig& t,
                   std::vector<std::string>* errs) {
  ObjReader r(obj, path, errs);
  r.read("builtin", t.builtin, "a string");
  r.read("patch", t.patch, "an integer");
  r.read("row", t.row, "an integer");
  r.read("col", t.col, "an integer");
  r.read("alpha", t.alpha, "a number");
  r.read("pattern_seed", t.pattern_seed, "an unsigned integer");
  r.read("target_label", t.target_label, "an integer");
  r.read("source_class", t.source_class, "an integer");
  r.read("mask", t.mask, "an array of numbers");
  r.read("pattern", t.pattern, "an array of numbers");
  r.finish();

  static const std::set<std::string> allowed = {"white-square", "black-square",
                                                "random-pixels", "checker",
                                                "full-image", "inline"};
  if (!allowed.count(t.builtin)) r.err("builtin '" + t.builtin + "' is not recognized");
  if (t.builtin == "inline" && (t.mask.empty() || t.pattern.empty()))
    r.err("inline trigger needs both mask and pattern arrays");
  if (t.builtin != "inline" && (!t.mask.empty() || !t.pattern.empty()))
    r.err("mask/pattern arrays are only valid with builtin 'inline'");
  if (!(t.alpha > 0.0) || t.alpha > 1.0) r.err("alpha must lie in (0, 1]");
  if (t.builtin != "full-image" && t.builtin != "inline" && t.patch < 1)
    r.err("patch must be at least 1");
  if (t.target_label < 0) r.err("target_label must be non-negative");
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config root must be a JSON object");

  RunConfig cfg;
  std::vector<std::string> errs;
  ObjReader root(&doc, "config", &errs);
  root.read("seed", cfg.seed, "an unsigned integer");
  root.read("out_dir", cfg.out_dir, "a string");

  const json* sub = nullptr;
  root.read_sub("dataset", sub);
  {
    ObjReader r(sub, "dataset", &errs);
    r.read("source", cfg.dataset.source, "a string");
    r.read("classes", cfg.dataset.classes, "an integer");
    r.read("per_class", cfg.dataset.per_class, "an integer");
    r.read("test_per_class", cfg.dataset.test_per_class, "an integer");
    r.read("channels", cfg.dataset.channels, "an integer");
    r.read("height", cfg.dataset.height, "an integer");
    r.read("width", cfg.dataset.width, "an integer");
    r.read("noise_sigma", cfg.dataset.noise_sigma, "a number");
    r.read("idx_images", cfg.dataset.idx_images, "a string");
    r.read("idx_labels", cfg.dataset.idx_labels, "a string");
    r.read("idx_test_images", cfg.dataset.idx_test_images, "a string");
    r.read("idx_test_labels", cfg.dataset.idx_test_labels, "a string");
    r.finish();
    if (cfg.dataset.source != "synth" && cfg.dataset.source != "idx")
      r.err("source must be 'synth' or 'idx'");
    if (cfg.dataset.source == "idx" &&
        (cfg.dataset.idx_images.empty() || cfg.dataset.idx_labels.empty()))
      r.err("source 'idx' needs idx_images and idx_labels paths");
    if (cfg.dataset.classes < 2) r.err("classes must be at least 2");
    if (cfg.dataset.per_class < 1) r.err("per_class must be at least 1");
    if (cfg.dataset.test_per_class < 1) r.err("test_per_class must be at least 1");
    if (cfg.dataset.channels < 1) r.err("channels must be at least 1");
    if (cfg.dataset.height < 8 || cfg.dataset.width < 8)
      r.err("height and width must be at least 8");
    if (cfg.dataset.noise_sigma < 0.0) r.err("noise_sigma must be non-negative");
  }

  sub = nullptr;
  root.read_sub("attack", sub);
  {
    ObjReader r(sub, "attack", &errs);
    r.read("enabled", cfg.attack.enabled, "a boolean");
    r.read("mode", cfg.attack.mode, "a string");
    r.read("poison_rate", cfg.attack.poison_rate, "a number");
    if (r.has("triggers")) {
      const json& arr = sub->at("triggers");
      if (!arr.is_array() || arr.empty()) {
        r.err("triggers must be a non-empty array");
      } else {
        cfg.attack.triggers.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
          TriggerConfig t;
          if (!arr[i].is_object()) {
            r.err("triggers[" + std::to_string(i) + "] must be an object");
          } else {
            parse_trigger(&arr[i], "attack.triggers[" + std::to_string(i) + "]", t, &errs);
          }
          cfg.attack.triggers.push_back(std::move(t));
        }
      }
    }
    r.finish();
    if (cfg.attack.mode != "dirty-label" && cfg.attack.mode != "clean-label" &&
        cfg.attack.mode != "source-specific")
      r.err("mode must be 'dirty-label', 'clean-label' or 'source-specific'");
    if (!(cfg.attack.poison_rate > 0.0) || cfg.attack.poison_rate > 0.5)
      r.err("poison_rate must lie in (0, 0.5]");
    if (cfg.attack.mode == "source-specific")
      for (std::size_t i = 0; i < cfg.attack.triggers.size(); ++i)
        if (cfg.attack.triggers[i].source_class < 0)
          r.err("triggers[" + std::to_string(i) + "] needs source_class in source-specific mode");
  }

  sub = nullptr;
  root.read_sub("model", sub);
  {
    ObjReader r(sub, "model", &errs);
    r.read("arch", cfg.model.arch, "a string");
    r.read("epochs", cfg.model.epochs, "an integer");
    r.read("batch_size", cfg.model.batch_size, "an integer");
    r.read("learning_rate", cfg.model.learning_rate, "a number");
    r.read("momentum", cfg.model.momentum, "a number");
    r.read("shuffle", cfg.model.shuffle, "a boolean");
    r.finish();
    if (cfg.model.epochs < 1) r.err("epochs must be at least 1");
    if (cfg.model.batch_size < 1) r.err("batch_size must be at least 1");
    if (!(cfg.model.learning_rate > 0.0)) r.err("learning_rate must be positive");
    if (cfg.model.momentum < 0.0 || cfg.model.momentum >= 1.0)
      r.err("momentum must lie in [0, 1)");
  }

  sub = nullptr;
  root.read_sub("adaptive", sub);
  {
    ObjReader r(sub, "adaptive", &errs);
    r.read("enabled", cfg.adaptive.enabled, "a boolean");
    r.read("lambda", cfg.adaptive.lambda, "a number");
    r.read("scales", cfg.adaptive.scales, "an array of numbers");
    r.finish();
    if (cfg.adaptive.lambda < 0.0) r.err("lambda must be non-negative");
    for (double s : cfg.adaptive.scales)
      if (s < 1.0) r.err("scales must all be >= 1");
  }

  sub = nullptr;
  root.read_sub("detector", sub);
  {
    ObjReader r(sub, "detector", &errs);
    r.read("scales", cfg.detector.scales, "an array of numbers");
    r.read("threshold", cfg.detector.threshold, "a number");
    r.read("mode", cfg.detector.mode, "a string");
    r.read("nspc", cfg.detector.nspc, "a string");
    r.read("stats_per_class", cfg.detector.stats_per_class, "an integer");
    r.read("noise_magnitudes", cfg.detector.noise_magnitudes, "an array of numbers");
    r.finish();
    if (cfg.detector.scales.empty()) r.err("scales must be non-empty");
    for (double s : cfg.detector.scales)
      if (s < 1.0) r.err("scales must all be >= 1");
    {
      std::vector<double> sorted = cfg.detector.scales;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        r.err("scales must not contain duplicates");
    }
    if (cfg.detector.mode != "data-free" && cfg.detector.mode != "data-limited" &&
        cfg.detector.mode != "noise-variant")
      r.err("mode must be 'data-free', 'data-limited' or 'noise-variant'");
    if (cfg.detector.nspc != "balanced" && cfg.detector.nspc != "z-score")
      r.err("nspc must be 'balanced' or 'z-score'");
    if (cfg.detector.stats_per_class < 1) r.err("stats_per_class must be at least 1");
    if (cfg.detector.noise_magnitudes.empty()) r.err("noise_magnitudes must be non-empty");
    for (double m : cfg.detector.noise_magnitudes)
      if (m < 0.0) r.err("noise_magnitudes must be non-negative");
  }

  sub = nullptr;
  root.read_sub("eval", sub);
  {
    ObjReader r(sub, "eval", &errs);
    r.read("magnitude", cfg.eval.magnitude, "a number");
    r.read("membership", cfg.eval.membership, "a string");
    r.finish();
    if (cfg.eval.magnitude < 0.0) r.err("magnitude must be non-negative");
    if (cfg.eval.membership != "all-poisoned" && cfg.eval.membership != "successful-only")
      r.err("membership must be 'all-poisoned' or 'successful-only'");
  }

  sub = nullptr;
  root.read_sub("theorem", sub);
  {
    ObjReader r(sub, "theorem", &errs);
    r.read("fractions", cfg.theorem.fractions, "an array of numbers");
    r.read("scales", cfg.theorem.scales, "an array of numbers");
    r.read("gammas", cfg.theorem.gammas, "an array of numbers");
    r.read("classes", cfg.theorem.classes, "an integer");
    r.read("per_class", cfg.theorem.per_class, "an integer");
    r.finish();
    for (double f : cfg.theorem.fractions)
      if (f < 0.0 || f > 0.5) r.err("fractions must lie in [0, 0.5]");
    for (double s : cfg.theorem.scales)
      if (s < 1.0) r.err("scales must all be >= 1");
    for (double g : cfg.theorem.gammas)
      if (!(g > 0.0)) r.err("gammas must be positive");
    if (cfg.theorem.classes < 2) r.err("classes must be at least 2");
    if (cfg.theorem.per_class < 5) r.err("per_class must be at least 5");
  }

  sub = nullptr;
  root.read_sub("sweep", sub);
  {
    ObjReader r(sub, "sweep", &errs);
    r.read("parameter", cfg.sweep.parameter, "a string");
    r.read("grid", cfg.sweep.grid, "an array of numbers");
    r.finish();
    try {
      sweep_param_from_name(cfg.sweep.parameter);
    } catch (const std::exception& e) {
      r.err(e.what());
    }
    if (cfg.sweep.grid.empty()) r.err("grid must be non-empty");
  }

  sub = nullptr;
  root.read_sub("bench", sub);
  {
    ObjReader r(sub, "bench", &errs);
    r.read("runs", cfg.bench.runs, "an integer");
    r.read("batch", cfg.bench.batch, "an integer");
    r.read("batched", cfg.bench.batched, "a boolean");
    r.finish();
    if (cfg.bench.runs < 1) r.err("runs must be at least 1");
    if (cfg.bench.batch < 1) r.err("batch must be at least 1");
  }

  root.finish();

  // Cross-section checks that need several fields at once.
  for (std::size_t i = 0; i < cfg.attack.triggers.size(); ++i) {
    const TriggerConfig& t = cfg.attack.triggers[i];
    if (t.target_label >= cfg.dataset.classes)
      errs.push_back("attack.triggers[" + std::to_string(i) +
                     "]: target_label outside the dataset's classes");
    if (cfg.attack.mode == "source-specific" && t.source_class >= cfg.dataset.classes)
      errs.push_back("attack.triggers[" + std::to_string(i) +
                     "]: source_class outside the dataset's classes");
  }

  if (!errs.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < errs.size(); ++i) {
      if (i) os << "; ";
      os << errs[i];
    }
    throw std::invalid_argument(os.str());
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

namespace {

json trigger_to_json(const TriggerConfig& t) {
  json j;
  j["builtin"] = t.builtin;
  j["patch"] = t.patch;
  j["row"] = t.row;
  j["col"] = t.col;
  j["alpha"] = t.alpha;
  j["pattern_seed"] = t.pattern_seed;
  j["target_label"] = t.target_label;
  j["source_class"] = t.source_class;
  j["mask"] = t.mask;
  j["pattern"] = t.pattern;
  return j;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["dataset"] = {{"source", c.dataset.source},
                  {"classes", c.dataset.classes},
                  {"per_class", c.dataset.per_class},
                  {"test_per_class", c.dataset.test_per_class},
                  {"channels", c.dataset.channels},
                  {"height", c.dataset.height},
                  {"width", c.dataset.width},
                  {"noise_sigma", c.dataset.noise_sigma},
                  {"idx_images", c.dataset.idx_images},
                  {"idx_labels", c.dataset.idx_labels},
                  {"idx_test_images", c.dataset.idx_test_images},
                  {"idx_test_labels", c.dataset.idx_test_labels}};
  json triggers = json::array();
  for (const TriggerConfig& t : c.attack.triggers) triggers.push_back(trigger_to_json(t));
  j["attack"] = {{"enabled", c.attack.enabled},
                 {"mode", c.attack.mode},
                 {"poison_rate", c.attack.poison_rate},
                 {"triggers", std::move(triggers)}};
  j["model"] = {{"arch", c.model.arch},
                {"epochs", c.model.epochs},
                {"batch_size", c.model.batch_size},
                {"learning_rate", c.model.learning_rate},
                {"momentum", c.model.momentum},
                {"shuffle", c.model.shuffle}};
  j["adaptive"] = {{"enabled", c.adaptive.enabled},
                   {"lambda", c.adaptive.lambda},
                   {"scales", c.adaptive.scales}};
  j["detector"] = {{"scales", c.detector.scales},
                   {"threshold", c.detector.threshold},
                   {"mode", c.detector.mode},
                   {"nspc", c.detector.nspc},
                   {"stats_per_class", c.detector.stats_per_class},
                   {"noise_magnitudes", c.detector.noise_magnitudes}};
  j["eval"] = {{"magnitude", c.eval.magnitude}, {"membership", c.eval.membership}};
  j["theorem"] = {{"fractions", c.theorem.fractions},
                  {"scales", c.theorem.scales},
                  {"gammas", c.theorem.gammas},
                  {"classes", c.theorem.classes},
                  {"per_class", c.theorem.per_class}};
  j["sweep"] = {{"parameter", c.sweep.parameter}, {"grid", c.sweep.grid}};
  j["bench"] = {{"runs", c.bench.runs},
                {"batch", c.bench.batch},
                {"batched", c.bench.batched}};
  return j;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace

std::string RunConfig::to_canonical_json() const {
  return config_to_json(*this).dump(1);  // nlohmann objects iterate sorted
}

std::string RunConfig::config_hash() const { return fnv1a_hex(to_canonical_json()); }

std::string RunConfig::section_hash(const std::vector<std::string>& sections) const {
  json full = config_to_json(*this);
  json subset;
  subset["seed"] = seed;
  for (const std::string& s : sections) {
    if (!full.contains(s))
      throw std::invalid_argument("section_hash: unknown section '" + s + "'");
    subset[s] = full.at(s);
  }
  return fnv1a_hex(subset.dump(1));
}

DetectorMode RunConfig::detector_mode() const {
  if (detector.mode == "data-free") return DetectorMode::data_free;
  if (detector.mode == "data-limited") return DetectorMode::data_limited;
  return DetectorMode::noise_variant;
}

NspcMode RunConfig::nspc_mode() const {
  return detector.nspc == "z-score" ? NspcMode::z_score : NspcMode::balanced;
}

Membership RunConfig::membership() const {
  return eval.membership == "successful-only" ? Membership::successful_only
                                              : Membership::all_poisoned;
}

PoisonMode RunConfig::poison_mode() const {
  if (attack.mode == "clean-label") return PoisonMode::clean_label;
  if (attack.mode == "source-specific") return PoisonMode::source_specific;
  return PoisonMode::dirty_label;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.epochs = model.epochs;
  tc.batch_size = model.batch_size;
  tc.learning_rate = model.learning_rate;
  tc.momentum = model.momentum;
  tc.shuffle = model.shuffle;
  tc.seed = derive_seed(seed, "train");
  return tc;
}

void write_manifest(const RunConfig& cfg, const std::string& command) {
  std::filesystem::create_directories(cfg.out_dir);
  json doc;
  doc["format_version"] = 1;
  doc["tool"] = "scaledet";
  doc["tool_version"] = kToolVersion;
  doc["command"] = command;
  doc["root_seed"] = cfg.seed;
  doc["config_hash"] = cfg.config_hash();
  doc["config"] = json::parse(cfg.to_canonical_json());
  std::string path = cfg.out_dir + "/manifest-" + command + ".json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << doc.dump(1) << "\n";
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

}  // namespace scaledet

#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scaledet/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string mode;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

scaledet::RunConfig load_config(const CommonFlags& flags) {
  scaledet::RunConfig cfg;
  if (!flags.config_path.empty())
    cfg = scaledet::RunConfig::from_file(flags.config_path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.mode.empty()) {
    if (flags.mode != "data-free" && flags.mode != "data-limited" &&
        flags.mode != "noise-variant")
      throw std::invalid_argument(
          "--mode must be data-free, data-limited or noise-variant");
    cfg.detector.mode = flags.mode;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backdoor attack and scaled-consistency detection testbed"};
  app.require_subcommand(1);

  CommonFlags flags;
  struct Verb {
    const char* name;
    const char* help;
    void (*fn)(const scaledet::RunConfig&, std::ostream&);
  };
  const Verb verbs[] = {
      {"synth", "Generate the synthetic dataset as IDX files", scaledet::cmd_synth},
      {"poison", "Write the poisoned training mix and its flags", scaledet::cmd_poison},
      {"train", "Train the configured model (poisoned or benign)", scaledet::cmd_train},
      {"train-adaptive", "Train with the scaled-copy regularizer",
       scaledet::cmd_train_adaptive},
      {"fit-stats", "Fit per-class score statistics on benign samples",
       scaledet::cmd_fit_stats},
      {"detect", "Score and classify eval samples with the detector",
       scaledet::cmd_detect},
      {"eval", "Full detection evaluation with ROC/AUROC outputs", scaledet::cmd_eval},
      {"theorem-check", "Kernel-regression check of the scaled-prediction limit",
       scaledet::cmd_theorem_check},
      {"sweep", "Re-run detection across a parameter grid", scaledet::cmd_sweep},
      {"confidence-curve", "Mean confidence on the original label under scaling",
       scaledet::cmd_confidence_curve},
      {"bench", "Measure detection overhead relative to plain inference",
       scaledet::cmd_bench},
  };

  std::function<int()> selected;
  for (const Verb& verb : verbs) {
    CLI::App* sub = app.add_subcommand(verb.name, verb.help);
    sub->add_option("--config", flags.config_path, "JSON configuration file");
    sub->add_option("--out", flags.out_dir, "Output directory (overrides config)");
    sub->add_option("--seed", flags.seed, "Root seed (overrides config)")
        ->each([&](const std::string&) { flags.seed_set = true; });
    sub->add_option("--mode", flags.mode,
                    "Detector mode: data-free, data-limited or noise-variant");
    sub->callback([&selected, &flags, &verb] {
      selected = [&flags, &verb] {
        scaledet::RunConfig cfg = load_config(flags);
        verb.fn(cfg, std::cout);
        return 0;
      };
    });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return selected();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
}

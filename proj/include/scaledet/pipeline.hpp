#ifndef SCALEDET_PIPELINE_HPP
#define SCALEDET_PIPELINE_HPP

#include <cstdint>
#include <string>

#include "scaledet/config.hpp"
#include "scaledet/kernel.hpp"

namespace scaledet {

// Deterministic stage inputs, all derived from cfg.seed.
LabeledDataset pipeline_train_set(const RunConfig& cfg);
LabeledDataset pipeline_test_set(const RunConfig& cfg);
// Benign samples the data-limited defender holds (stats_per_class each).
LabeledDataset pipeline_stats_set(const RunConfig& cfg);

TriggerSpec trigger_from_config(const TriggerConfig& t, const DatasetConfig& d);
PoisonPlan plan_from_config(const RunConfig& cfg);

// Checkpoints are content-addressed: the filename carries a hash of every
// config section that shapes the parameters (seed, dataset, attack, model,
// and the adaptive section for adaptive models), so a stale artifact can
// never be picked up by a changed configuration.
std::string model_artifact_path(const RunConfig& cfg, bool adaptive);

// Loads the checkpoint when its content-addressed file exists, otherwise
// trains it (and writes it). `log` receives the training history when
// training actually ran.
MlpConvNet ensure_model(const RunConfig& cfg, bool adaptive,
                        TrainResult* log = nullptr);

struct DetectionOutcome {
  double auroc_value = 0.0;
  double asr = 0.0;
  double clean_accuracy = 0.0;
  double threshold = 0.0;  // resolved: config value, or chosen from the ROC
  double mean_pos_score = 0.0;
  double mean_neg_score = 0.0;
  RocCurve roc;
  std::vector<double> pos_scores, neg_scores;
  std::vector<ReportRow> rows;  // positives first, then negatives
};

// Scores the configured detector over eval sets built from the benign test
// set and its triggered counterpart(s). Multi-trigger plans contribute one
// positive set per trigger; negatives are shared. `detection_seed` drives
// only detection-stage randomness (noise copies), letting sweeps re-seed
// detection without invalidating the model artifact.
DetectionOutcome run_detection(const RunConfig& cfg, const MlpConvNet& model,
                               std::uint64_t detection_seed);

// Sweep support: applies one grid value to a copy of the config. Training
// parameters re-seed the whole run; detector-only parameters keep the model
// and re-seed detection.
SweepPoint run_sweep_point(const RunConfig& base, SweepParam param, double value,
                           std::uint64_t point_seed);

// Command bodies (one per CLI verb). Each writes its artifacts and a
// manifest under cfg.out_dir and prints a one-line summary to `out`.
void cmd_synth(const RunConfig& cfg, std::ostream& out);
void cmd_poison(const RunConfig& cfg, std::ostream& out);
void cmd_train(const RunConfig& cfg, std::ostream& out);
void cmd_train_adaptive(const RunConfig& cfg, std::ostream& out);
void cmd_fit_stats(const RunConfig& cfg, std::ostream& out);
void cmd_detect(const RunConfig& cfg, std::ostream& out);
void cmd_eval(const RunConfig& cfg, std::ostream& out);
void cmd_theorem_check(const RunConfig& cfg, std::ostream& out);
void cmd_sweep(const RunConfig& cfg, std::ostream& out);
void cmd_confidence_curve(const RunConfig& cfg, std::ostream& out);
void cmd_bench(const RunConfig& cfg, std::ostream& out);

}  // namespace scaledet

#endif  // SCALEDET_PIPELINE_HPP

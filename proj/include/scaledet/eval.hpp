#ifndef SCALEDET_EVAL_HPP
#define SCALEDET_EVAL_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scaledet/classifier.hpp"
#include "scaledet/dataset.hpp"
#include "scaledet/poison.hpp"

namespace scaledet {

enum class Membership { all_poisoned, successful_only };
const char* membership_name(Membership m);

// Detector benchmark sets: positives are the triggered test images plus a
// noise-augmented copy of each, negatives likewise for the benign test
// images. successful_only keeps only triggered images the model actually
// maps to the target label.
struct EvalSets {
  std::vector<Image> positive;
  std::vector<Image> negative;
  double magnitude = 0.05;
  Membership membership = Membership::all_poisoned;
};

EvalSets build_eval_sets(const LabeledDataset& benign_test,
                         const PoisonedTestset& poisoned_test,
                         const ClassifierModel& model, double magnitude,
                         Membership membership, std::uint64_t seed);

// Mann-Whitney AUROC with half-credit ties: the probability a random
// positive outscores a random negative. Computed by ranking in
// O((P+N) log(P+N)); exactly equal to the all-pairs average.
double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores);

struct RocPoint {
  double fpr = 0.0, tpr = 0.0;
  double threshold = 0.0;  // verdict rule: score > threshold
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), thresholds descending
  double auroc = 0.0;
};

RocCurve roc_curve(std::span<const double> pos_scores,
                   std::span<const double> neg_scores);

// Threshold maximizing TPR - FPR (Youden's J) over finite-threshold points;
// ties go to the highest threshold.
double choose_threshold(const RocCurve& curve);

void write_roc_csv(const std::string& path, const RocCurve& curve);
void write_roc_svg(const std::string& path, const RocCurve& curve);

// Mean probability assigned to each sample's original predicted label under
// pixel scaling n = 1..n_max (clamped copies). Requires probability support.
std::vector<double> confidence_curve(const ClassifierModel& model,
                                     std::span<const Image> samples, int n_max);

// Sweep runner: one detection experiment per grid value, each with a seed
// derived from the root seed and the grid position. Points run on a worker
// pool; results keep grid order. Errors are rethrown annotated with the
// offending grid value.
enum class SweepParam {
  scaling_set_size,
  local_samples_per_class,
  poisoning_rate,
  trigger_size,
  infected_label_count,
  trigger_count,
};
const char* sweep_param_name(SweepParam p);
SweepParam sweep_param_from_name(const std::string& name);

struct SweepPoint {
  double value = 0.0;
  double auroc = 0.0;
  double asr = 0.0;
  bool has_asr = false;
};

using SweepPointRunner =
    std::function<SweepPoint(double value, std::uint64_t point_seed)>;

std::vector<SweepPoint> run_sweep(SweepParam param, std::span<const double> grid,
                                  std::uint64_t root_seed,
                                  const SweepPointRunner& runner);

void write_sweep_csv(const std::string& path, std::span<const SweepPoint> points);

// Wall-clock cost of detection relative to plain inference over the batch;
// medians over `runs` timed repetitions after warm-up. The scaled copies go
// to the model as one batch when `batched` (the deployment mode), one query
// at a time otherwise.
struct BenchResult {
  double raw_ms = 0.0;     // plain predict_label over the batch
  double detect_ms = 0.0;  // reference query + scaled-copy queries per sample
  double ratio = 1.0;
};

BenchResult bench_overhead(const ClassifierModel& model,
                           std::span<const double> scales,
                           std::span<const Image> batch, int runs = 100,
                           bool batched = true);

}  // namespace scaledet

#endif  // SCALEDET_EVAL_HPP

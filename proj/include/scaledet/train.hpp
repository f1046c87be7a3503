#ifndef SCALEDET_TRAIN_HPP
#define SCALEDET_TRAIN_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "scaledet/net.hpp"
#include "scaledet/poison.hpp"

namespace scaledet {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.02;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  bool shuffle = true;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean objective per epoch
  double final_train_accuracy = 0.0;
};

// Mini-batch SGD with momentum over the (already mixed) dataset, plain
// cross-entropy. Deterministic given cfg.seed: fixed shuffle stream, fixed
// accumulation order. Throws std::runtime_error naming the epoch if the loss
// goes non-finite.
TrainResult train(MlpConvNet& net, const LabeledDataset& data,
                  const TrainConfig& cfg);

// Regularizer used by the defense-aware attacker: alongside the usual loss on
// the poisoned mix, every trigger-carrying sample also contributes
// lambda * loss(f(clamp(n * x')), original label), pushing scaled copies of
// poisoned inputs back toward their true class. One n is drawn uniformly from
// `scales` per batch.
struct AdaptivePlan {
  PoisonPlan base;
  std::vector<double> scales = {3, 5, 7, 9, 11};
  double lambda = 1.0;
};

// Builds the poisoned mix from `clean` per plan.base, then trains with the
// scaled-copy regularizer. With lambda = 0 the result is bitwise identical to
// train() on build_poisoned_dataset(clean, plan.base).data under the same
// config. Returns the poison bookkeeping used, for inspection.
TrainResult train_adaptive(MlpConvNet& net, const LabeledDataset& clean,
                           const AdaptivePlan& plan, const TrainConfig& cfg,
                           PoisonResult* mix_out = nullptr);

// Compares analytic gradients of the summed batch loss against central finite
// differences (step `step` on the double-precision parameters), returning the
// maximum relative error |a - n| / max(1, |a|, |n|) over all parameters.
double gradient_check(MlpConvNet& net, std::span<const Image> images,
                      std::span<const int> labels, double step = 1e-6);

// Fraction of triggered images predicted as the target, over images whose
// ground truth differs from the target. Throws if no such image exists.
double attack_success_rate(const ClassifierModel& model,
                           const LabeledDataset& poisoned_test, int y_t);
double attack_success_rate(const ClassifierModel& model,
                           const PoisonedTestset& ts);

// One point of the noise-robustness curve: attack success rate after adding
// Gaussian pixel noise of the given standard deviation to every triggered
// image.
struct ProbePoint {
  double magnitude = 0.0;
  double asr = 0.0;
};

// Measures how fragile the installed trigger is to additive Gaussian noise:
// for each magnitude, perturbs every triggered test image (fresh per-sample
// noise derived from `seed`) and records the attack success rate. Magnitudes
// must be sorted ascending and start at 0, so the first point always equals
// the plain attack success rate.
std::vector<ProbePoint> noise_robustness_probe(const ClassifierModel& model,
                                               const LabeledDataset& poisoned_test,
                                               int y_t,
                                               std::span<const double> magnitudes,
                                               std::uint64_t seed);

// Writes a probe curve as CSV (header: magnitude,asr,model_tag). The tag
// labels which model produced the curve so several curves can be compared
// after concatenation.
void write_probe_csv(const std::string& path, std::span<const ProbePoint> points,
                     const std::string& model_tag);

// Plain top-1 accuracy.
double accuracy(const ClassifierModel& model, const LabeledDataset& data);

}  // namespace scaledet

#endif  // SCALEDET_TRAIN_HPP

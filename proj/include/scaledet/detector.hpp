#ifndef SCALEDET_DETECTOR_HPP
#define SCALEDET_DETECTOR_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scaledet/classifier.hpp"
#include "scaledet/dataset.hpp"
#include "scaledet/image.hpp"

namespace scaledet {

// Defender-chosen pixel multipliers. Order-insensitive set semantics: the
// constructor sorts and rejects duplicates and values below 1.
class ScalingSet {
 public:
  explicit ScalingSet(std::vector<double> scales);
  static ScalingSet default_set() { return ScalingSet({3, 5, 7, 9, 11}); }

  const std::vector<double>& scales() const { return scales_; }
  std::size_t size() const { return scales_.size(); }

 private:
  std::vector<double> scales_;
};

// Elementwise min(n * x, 1). Each copy is clamped independently of any other
// scale, so the set of scaled copies is order-free.
Image scale_image(const Image& x, double n);

// Scaled prediction consistency: the fraction of scales n in S for which the
// model keeps its original verdict, C(min(n*x,1)) == C(x). Uses exactly
// |S| + 1 hard-label queries: one for the reference label, one per scale.
// The scaled copies are submitted as one batch.
double spc(const ClassifierModel& model, const Image& x, const ScalingSet& s);

struct SpcResult {
  double value = 0.0;
  int reference_label = 0;
};
SpcResult spc_with_label(const ClassifierModel& model, const Image& x,
                         const ScalingSet& s);

enum class DetectorMode { data_free, data_limited, noise_variant };
const char* detector_mode_name(DetectorMode mode);

struct DetectionReport {
  double score = 0.0;
  double threshold = 0.0;
  bool malicious = false;  // score > threshold, strict
  DetectorMode mode = DetectorMode::data_free;
};

// Data-free rule: flag the input when SPC(x) > T (strictly).
DetectionReport detect_data_free(const ClassifierModel& model, const Image& x,
                                 const ScalingSet& s, double threshold);

// Per-class SPC statistics fitted on benign samples (data-limited setting).
struct ClassStats {
  static constexpr double kSigmaFloor = 1e-8;
  std::vector<double> mean;    // mu_i
  std::vector<double> stddev;  // population sigma_i, floored at kSigmaFloor
  std::vector<int> count;      // benign samples observed per class

  // Throws std::runtime_error if class i was never observed.
  void require_class(int i) const;
};

ClassStats fit_class_stats(const ClassifierModel& model,
                           const LabeledDataset& benign, const ScalingSet& s);

// Two readings of the class-normalized score. `balanced` subtracts
// beta * mu/sigma of the predicted class with beta = 1 / max_i(mu_i/sigma_i),
// mapping the subtracted term into [0,1] so both terms live on the same
// scale. `z_score` is the conventional (SPC - mu)/sigma standardization.
enum class NspcMode { balanced, z_score };

// Pure arithmetic core, exposed for direct verification.
double nspc_from_spc(double spc_value, int predicted_label,
                     const ClassStats& stats, NspcMode mode);

// Normalized SPC of one input; the normalizing class is the model's own
// prediction on the unscaled input.
double nspc(const ClassifierModel& model, const Image& x, const ScalingSet& s,
            const ClassStats& stats, NspcMode mode);

DetectionReport detect_data_limited(const ClassifierModel& model, const Image& x,
                                    const ScalingSet& s, const ClassStats& stats,
                                    NspcMode mode, double threshold);

// Ablation: same query count as spc, but the copies are noisy instead of
// scaled; score = fraction of noisy copies keeping the reference label.
double noise_variant_score(const ClassifierModel& model, const Image& x,
                           std::span<const double> magnitudes,
                           std::uint64_t seed);

std::vector<double> default_noise_variant_magnitudes();

// Batch scoring helpers (one score per image, order preserved).
std::vector<double> spc_scores(const ClassifierModel& model,
                               std::span<const Image> xs, const ScalingSet& s);
std::vector<double> nspc_scores(const ClassifierModel& model,
                                std::span<const Image> xs, const ScalingSet& s,
                                const ClassStats& stats, NspcMode mode);
std::vector<double> noise_variant_scores(const ClassifierModel& model,
                                         std::span<const Image> xs,
                                         std::span<const double> magnitudes,
                                         std::uint64_t seed);

// Batch report CSV: sample_id, true_is_poisoned, score, verdict, mode, set
// size and threshold per row.
struct ReportRow {
  std::size_t sample_id = 0;
  bool true_is_poisoned = false;
  double score = 0.0;
};
void write_report_csv(const std::string& path, std::span<const ReportRow> rows,
                      DetectorMode mode, std::size_t set_size, double threshold);

}  // namespace scaledet

#endif  // SCALEDET_DETECTOR_HPP

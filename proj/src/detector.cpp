#include "scaledet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scaledet/csvfmt.hpp"
#include "scaledet/rng.hpp"

namespace scaledet {

ScalingSet::ScalingSet(std::vector<double> scales) : scales_(std::move(scales)) {
  if (scales_.empty()) throw std::invalid_argument("scaling set must be non-empty");
  std::sort(scales_.begin(), scales_.end());
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    if (!(scales_[i] >= 1.0))
      throw std::invalid_argument("scaling set values must be >= 1");
    if (i > 0 && scales_[i] == scales_[i - 1])
      throw std::invalid_argument("scaling set values must be distinct");
  }
}

Image scale_image(const Image& x, double n) {
  if (!(n >= 1.0)) throw std::invalid_argument("scale factor must be >= 1");
  Image out = x;
  for (double& p : out.pixels) p = std::min(n * p, 1.0);
  return out;
}

SpcResult spc_with_label(const ClassifierModel& model, const Image& x,
                         const ScalingSet& s) {
  SpcResult res;
  res.reference_label = model.predict_label(x);
  std::vector<Image> copies;
  copies.reserve(s.size());
  for (double n : s.scales()) copies.push_back(scale_image(x, n));
  std::vector<int> labels = model.predict_labels(copies);
  std::size_t agree = 0;
  for (int l : labels)
    if (l == res.reference_label) ++agree;
  res.value = static_cast<double>(agree) / static_cast<double>(s.size());
  return res;
}

double spc(const ClassifierModel& model, const Image& x, const ScalingSet& s) {
  return spc_with_label(model, x, s).value;
}

const char* detector_mode_name(DetectorMode mode) {
  switch (mode) {
    case DetectorMode::data_free: return "data-free";
    case DetectorMode::data_limited: return "data-limited";
    case DetectorMode::noise_variant: return "noise-variant";
  }
  return "?";
}

DetectionReport detect_data_free(const ClassifierModel& model, const Image& x,
                                 const ScalingSet& s, double threshold) {
  if (threshold < 0.0 || threshold > 1.0)
    throw std::invalid_argument("data-free threshold must lie in [0, 1]");
  DetectionReport rep;
  rep.mode = DetectorMode::data_free;
  rep.threshold = threshold;
  rep.score = spc(model, x, s);
  rep.malicious = rep.score > threshold;
  return rep;
}

void ClassStats::require_class(int i) const {
  if (i < 0 || i >= static_cast<int>(mean.size()) || count[i] < 1) {
    std::ostringstream os;
    os << "no benign statistics were fitted for class " << i;
    throw std::runtime_error(os.str());
  }
}

ClassStats fit_class_stats(const ClassifierModel& model,
                           const LabeledDataset& benign, const ScalingSet& s) {
  benign.validate();
  if (benign.images.empty())
    throw std::invalid_argument("cannot fit class statistics on an empty set");

  std::vector<std::vector<double>> per_class(benign.class_count);
  for (std::size_t i = 0; i < benign.size(); ++i)
    per_class[benign.labels[i]].push_back(spc(model, benign.images[i], s));

  ClassStats stats;
  stats.mean.assign(benign.class_count, 0.0);
  stats.stddev.assign(benign.class_count, 0.0);
  stats.count.assign(benign.class_count, 0);
  for (int k = 0; k < benign.class_count; ++k) {
    const std::vector<double>& v = per_class[k];
    stats.count[k] = static_cast<int>(v.size());
    if (v.empty()) continue;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());  // population variance
    stats.mean[k] = mean;
    stats.stddev[k] = std::max(std::sqrt(var), ClassStats::kSigmaFloor);
  }
  return stats;
}

double nspc_from_spc(double spc_value, int predicted_label,
                     const ClassStats& stats, NspcMode mode) {
  stats.require_class(predicted_label);
  double mu = stats.mean[predicted_label];
  double sigma = stats.stddev[predicted_label];
  if (mode == NspcMode::z_score) return (spc_value - mu) / sigma;

  // Balanced reading: SPC minus the predicted class's mu/sigma ratio, scaled
  // so the largest ratio across classes maps to 1 and the subtracted term
  // stays commensurate with SPC in [0, 1].
  double max_ratio = 0.0;
  for (std::size_t k = 0; k < stats.mean.size(); ++k) {
    if (stats.count[k] < 1) continue;
    max_ratio = std::max(max_ratio, stats.mean[k] / stats.stddev[k]);
  }
  if (max_ratio <= 0.0) return spc_value;  // all-zero means: nothing to subtract
  return spc_value - (mu / sigma) / max_ratio;
}

double nspc(const ClassifierModel& model, const Image& x, const ScalingSet& s,
            const ClassStats& stats, NspcMode mode) {
  SpcResult r = spc_with_label(model, x, s);
  return nspc_from_spc(r.value, r.reference_label, stats, mode);
}

DetectionReport detect_data_limited(const ClassifierModel& model, const Image& x,
                                    const ScalingSet& s, const ClassStats& stats,
                                    NspcMode mode, double threshold) {
  DetectionReport rep;
  rep.mode = DetectorMode::data_limited;
  rep.threshold = threshold;
  rep.score = nspc(model, x, s, stats, mode);
  rep.malicious = rep.score > threshold;
  return rep;
}

std::vector<double> default_noise_variant_magnitudes() {
  return {0.05, 0.10, 0.15, 0.20, 0.25};
}

double noise_variant_score(const ClassifierModel& model, const Image& x,
                           std::span<const double> magnitudes,
                           std::uint64_t seed) {
  if (magnitudes.empty())
    throw std::invalid_argument("noise variant needs at least one magnitude");
  int reference = model.predict_label(x);
  std::vector<Image> copies;
  copies.reserve(magnitudes.size());
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    if (magnitudes[i] < 0.0)
      throw std::invalid_argument("noise magnitudes must be non-negative");
    copies.push_back(add_gaussian_noise(x, magnitudes[i],
                                        derive_seed(seed, "noise-copy-" + fmt_u64(i))));
  }
  std::vector<int> labels = model.predict_labels(copies);
  std::size_t agree = 0;
  for (int l : labels)
    if (l == reference) ++agree;
  return static_cast<double>(agree) / static_cast<double>(magnitudes.size());
}

std::vector<double> spc_scores(const ClassifierModel& model,
                               std::span<const Image> xs, const ScalingSet& s) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const Image& x : xs) out.push_back(spc(model, x, s));
  return out;
}

std::vector<double> nspc_scores(const ClassifierModel& model,
                                std::span<const Image> xs, const ScalingSet& s,
                                const ClassStats& stats, NspcMode mode) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const Image& x : xs) out.push_back(nspc(model, x, s, stats, mode));
  return out;
}

std::vector<double> noise_variant_scores(const ClassifierModel& model,
                                         std::span<const Image> xs,
                                         std::span<const double> magnitudes,
                                         std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    out.push_back(noise_variant_score(model, xs[i], magnitudes,
                                      derive_seed(seed, "noise-sample-" + fmt_u64(i))));
  return out;
}

void write_report_csv(const std::string& path, std::span<const ReportRow> rows,
                      DetectorMode mode, std::size_t set_size, double threshold) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "sample_id,true_is_poisoned,score,verdict,mode,set_size,threshold\n";
  for (const ReportRow& r : rows) {
    out << r.sample_id << ',' << (r.true_is_poisoned ? 1 : 0) << ','
        << fmt_double(r.score) << ','
        << (r.score > threshold ? "malicious" : "benign") << ','
        << detector_mode_name(mode) << ',' << set_size << ','
        << fmt_double(threshold) << "\n";
  }
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

}  // namespace scaledet

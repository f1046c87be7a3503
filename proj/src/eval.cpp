#include "scaledet/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "scaledet/csvfmt.hpp"
#include "scaledet/detector.hpp"
#include "scaledet/rng.hpp"
#include "scaledet/threadpool.hpp"

namespace scaledet {

const char* membership_name(Membership m) {
  return m == Membership::all_poisoned ? "all-poisoned" : "successful-only";
}

EvalSets build_eval_sets(const LabeledDataset& benign_test,
                         const PoisonedTestset& poisoned_test,
                         const ClassifierModel& model, double magnitude,
                         Membership membership, std::uint64_t seed) {
  benign_test.validate();
  poisoned_test.data.validate();
  if (benign_test.images.empty() || poisoned_test.data.images.empty())
    throw std::invalid_argument("evaluation sets need non-empty benign and poisoned inputs");
  if (magnitude < 0.0) throw std::invalid_argument("augmentation magnitude must be non-negative");

  EvalSets sets;
  sets.magnitude = magnitude;
  sets.membership = membership;

  std::vector<const Image*> pos_base;
  if (membership == Membership::all_poisoned) {
    for (const Image& img : poisoned_test.data.images) pos_base.push_back(&img);
  } else {
    std::vector<int> pred = model.predict_labels(poisoned_test.data.images);
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == poisoned_test.target_label)
        pos_base.push_back(&poisoned_test.data.images[i]);
    if (pos_base.empty())
      throw std::runtime_error(
          "successful-only membership left no positives: no triggered image reaches the target label");
  }

  sets.positive.reserve(pos_base.size() * 2);
  for (const Image* img : pos_base) sets.positive.push_back(*img);
  for (std::size_t i = 0; i < pos_base.size(); ++i)
    sets.positive.push_back(add_gaussian_noise(
        *pos_base[i], magnitude, derive_seed(seed, "eval-pos-noise-" + fmt_u64(i))));

  sets.negative.reserve(benign_test.images.size() * 2);
  for (const Image& img : benign_test.images) sets.negative.push_back(img);
  for (std::size_t i = 0; i < benign_test.images.size(); ++i)
    sets.negative.push_back(add_gaussian_noise(
        benign_test.images[i], magnitude,
        derive_seed(seed, "eval-neg-noise-" + fmt_u64(i))));
  return sets;
}

double auroc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty())
    throw std::invalid_argument("AUROC needs non-empty score sets");

  // Rank-sum form of the Mann-Whitney statistic; ties share their average
  // rank, which is exactly the half-credit pair rule.
  struct Entry {
    double score;
    bool positive;
  };
  std::vector<Entry> all;
  all.reserve(pos_scores.size() + neg_scores.size());
  for (double s : pos_scores) all.push_back({s, true});
  for (double s : neg_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    // 1-based ranks i+1 .. j share the average (i + j + 1) / 2.
    double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].positive) rank_sum_pos += avg_rank;
    i = j;
  }

  double p = static_cast<double>(pos_scores.size());
  double n = static_cast<double>(neg_scores.size());
  double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * n);
}

RocCurve roc_curve(std::span<const double> pos_scores,
                   std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty())
    throw std::invalid_argument("ROC needs non-empty score sets");

  std::vector<double> thresholds;
  thresholds.reserve(pos_scores.size() + neg_scores.size());
  thresholds.insert(thresholds.end(), pos_scores.begin(), pos_scores.end());
  thresholds.insert(thresholds.end(), neg_scores.begin(), neg_scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<double> pos_sorted(pos_scores.begin(), pos_scores.end());
  std::vector<double> neg_sorted(neg_scores.begin(), neg_scores.end());
  std::sort(pos_sorted.begin(), pos_sorted.end());
  std::sort(neg_sorted.begin(), neg_sorted.end());
  auto frac_above = [](const std::vector<double>& sorted, double t) {
    std::size_t above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(above) / static_cast<double>(sorted.size());
  };

  RocCurve curve;
  for (double t : thresholds)
    curve.points.push_back({frac_above(neg_sorted, t), frac_above(pos_sorted, t), t});
  // The highest threshold admits nothing (strict >) so the first point is
  // (0,0); everything clears -infinity, closing the curve at (1,1).
  curve.points.push_back({1.0, 1.0, -std::numeric_limits<double>::infinity()});
  curve.auroc = auroc(pos_scores, neg_scores);
  return curve;
}

double choose_threshold(const RocCurve& curve) {
  double best_j = -2.0;
  double best_t = 0.0;
  for (const RocPoint& p : curve.points) {
    if (!std::isfinite(p.threshold)) continue;
    double j = p.tpr - p.fpr;
    if (j > best_j) {
      best_j = j;
      best_t = p.threshold;
    }
  }
  return best_t;
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "fpr,tpr,threshold\n";
  for (const RocPoint& p : curve.points)
    out << fmt_double(p.fpr) << ',' << fmt_double(p.tpr) << ','
        << (std::isfinite(p.threshold) ? fmt_double(p.threshold) : std::string("-inf"))
        << "\n";
  out << "# auroc," << fmt_double(curve.auroc) << "\n";
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

void write_roc_svg(const std::string& path, const RocCurve& curve) {
  const double size = 440.0, margin = 40.0, plot = size - 2 * margin;
  auto px = [&](double fpr) { return margin + fpr * plot; };
  auto py = [&](double tpr) { return size - margin - tpr * plot; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << " " << size
      << "\">\n";
  svg << "  <rect width=\"" << size << "\" height=\"" << size
      << "\" fill=\"white\"/>\n";
  svg << "  <rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot
      << "\" height=\"" << plot << "\" fill=\"none\" stroke=\"#444\"/>\n";
  svg << "  <line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1)
      << "\" y2=\"" << py(1) << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
  svg << "  <polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (const RocPoint& p : curve.points) svg << px(p.fpr) << ',' << py(p.tpr) << ' ';
  svg << "\"/>\n";
  svg << "  <text x=\"" << size / 2 << "\" y=\"" << size - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">FPR</text>\n";
  svg << "  <text x=\"14\" y=\"" << size / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
         "transform=\"rotate(-90 14 "
      << size / 2 << ")\">TPR</text>\n";
  svg << "  <text x=\"" << margin + 8 << "\" y=\"" << margin + 18
      << "\" font-family=\"sans-serif\" font-size=\"13\">AUROC "
      << fmt_double(curve.auroc) << "</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << svg.str();
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

std::vector<double> confidence_curve(const ClassifierModel& model,
                                     std::span<const Image> samples, int n_max) {
  if (!model.has_probs())
    throw std::runtime_error("confidence curve needs a model exposing probabilities");
  if (samples.empty()) throw std::invalid_argument("confidence curve needs samples");
  if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");

  std::vector<int> reference(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    reference[i] = model.predict_label(samples[i]);

  std::vector<double> curve(n_max, 0.0);
  for (int n = 1; n <= n_max; ++n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Image scaled = scale_image(samples[i], static_cast<double>(n));
      sum += model.predict_probs(scaled)[reference[i]];
    }
    curve[n - 1] = sum / static_cast<double>(samples.size());
  }
  return curve;
}

const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::scaling_set_size: return "scaling_set_size";
    case SweepParam::local_samples_per_class: return "local_samples_per_class";
    case SweepParam::poisoning_rate: return "poisoning_rate";
    case SweepParam::trigger_size: return "trigger_size";
    case SweepParam::infected_label_count: return "infected_label_count";
    case SweepParam::trigger_count: return "trigger_count";
  }
  return "?";
}

SweepParam sweep_param_from_name(const std::string& name) {
  for (SweepParam p :
       {SweepParam::scaling_set_size, SweepParam::local_samples_per_class,
        SweepParam::poisoning_rate, SweepParam::trigger_size,
        SweepParam::infected_label_count, SweepParam::trigger_count})
    if (name == sweep_param_name(p)) return p;
  throw std::invalid_argument("unknown sweep parameter: " + name);
}

std::vector<SweepPoint> run_sweep(SweepParam param, std::span<const double> grid,
                                  std::uint64_t root_seed,
                                  const SweepPointRunner& runner) {
  if (grid.empty()) throw std::invalid_argument("sweep grid must be non-empty");
  std::vector<SweepPoint> points(grid.size());
  std::vector<std::string> errors(grid.size());
  std::mutex mu;

  inference_pool().parallel_for(grid.size(), [&](std::size_t i) {
    std::uint64_t point_seed = derive_seed(
        root_seed, std::string(sweep_param_name(param)) + "-point-" + fmt_u64(i));
    try {
      points[i] = runner(grid[i], point_seed);
      points[i].value = grid[i];
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(mu);
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!errors[i].empty()) {
      std::ostringstream os;
      os << "sweep " << sweep_param_name(param) << " at value " << fmt_double(grid[i])
         << ": " << errors[i];
      throw std::runtime_error(os.str());
    }
  return points;
}

void write_sweep_csv(const std::string& path, std::span<const SweepPoint> points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  bool any_asr = false;
  for (const SweepPoint& p : points) any_asr = any_asr || p.has_asr;
  out << (any_asr ? "value,auroc,asr\n" : "value,auroc\n");
  for (const SweepPoint& p : points) {
    out << fmt_double(p.value) << ',' << fmt_double(p.auroc);
    if (any_asr) out << ',' << (p.has_asr ? fmt_double(p.asr) : std::string());
    out << "\n";
  }
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

BenchResult bench_overhead(const ClassifierModel& model,
                           std::span<const double> scales,
                           std::span<const Image> batch, int runs, bool batched) {
  if (batch.empty()) throw std::invalid_argument("bench needs a non-empty batch");
  if (runs < 1) throw std::invalid_argument("bench needs at least one run");

  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point start) {
    return std::chrono::duration<double, std::milli>(clock::now() - start).count();
  };

  // Scaled copies are prepared outside the timed region: the measured
  // quantity is query cost, matching a deployment where copies are built
  // once per incoming input on the accelerator's host.
  std::vector<std::vector<Image>> copies(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    copies[i].reserve(scales.size());
    for (double n : scales) copies[i].push_back(scale_image(batch[i], n));
  }

  volatile int sink = 0;
  auto raw_pass = [&] {
    for (const Image& x : batch) sink = sink + model.predict_label(x);
  };
  auto detect_pass = [&] {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      sink = sink + model.predict_label(batch[i]);
      if (copies[i].empty()) continue;
      if (batched) {
        std::vector<int> labels = model.predict_labels(copies[i]);
        sink = sink + labels[0];
      } else {
        for (const Image& c : copies[i]) sink = sink + model.predict_label(c);
      }
    }
  };

  for (int w = 0; w < 3; ++w) {
    raw_pass();
    detect_pass();
  }

  std::vector<double> raw_times(runs), det_times(runs);
  for (int r = 0; r < runs; ++r) {
    auto t0 = clock::now();
    raw_pass();
    raw_times[r] = ms_since(t0);
    auto t1 = clock::now();
    detect_pass();
    det_times[r] = ms_since(t1);
  }
  auto median = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : (v[m - 1] + v[m]) / 2.0;
  };

  BenchResult res;
  res.raw_ms = median(raw_times);
  res.detect_ms = median(det_times);
  res.ratio = res.raw_ms > 0.0 ? res.detect_ms / res.raw_ms : 1.0;
  return res;
}

}  // namespace scaledet

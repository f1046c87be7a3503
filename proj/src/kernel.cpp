#include "scaledet/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "scaledet/csvfmt.hpp"
#include "scaledet/detector.hpp"
#include "scaledet/rng.hpp"

namespace scaledet {

KernelClassifier::KernelClassifier(const LabeledDataset& train, double gamma)
    : gamma_(gamma), class_count_(train.class_count) {
  train.validate();
  if (train.images.empty())
    throw std::invalid_argument("kernel classifier needs at least one training point");
  if (!(gamma > 0.0)) throw std::invalid_argument("kernel gamma must be positive");
  dim_ = train.images[0].size();
  points_.reserve(train.size() * dim_);
  for (const Image& img : train.images)
    points_.insert(points_.end(), img.pixels.begin(), img.pixels.end());
  labels_ = train.labels;
}

std::vector<double> KernelClassifier::predict_probs(const Image& x) const {
  if (x.size() != dim_)
    throw std::invalid_argument("query image size does not match the kernel's training images");

  // Exponents are shifted by their minimum so the nearest point always
  // contributes weight 1; the shift cancels in the weight ratio, and keeps
  // large gamma * distance products from flushing every weight to zero.
  std::vector<double> expo(labels_.size());
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const double* p = points_.data() + i * dim_;
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      double d = x.pixels[j] - p[j];
      d2 += d * d;
    }
    expo[i] = 2.0 * gamma_ * d2;
    lowest = std::min(lowest, expo[i]);
  }

  std::vector<double> probs(class_count_, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    double w = std::exp(lowest - expo[i]);
    probs[labels_[i]] += w;
    total += w;
  }
  if (!std::isfinite(total) || total <= 0.0)
    throw std::runtime_error(
        "all kernel weights are numerically zero; the query is too far from the training set");
  for (double& p : probs) p /= total;
  return probs;
}

int KernelClassifier::predict_label(const Image& x) const {
  std::vector<double> p = predict_probs(x);
  return argmax_lowest(p);
}

TheoremReport theorem1_check(const LabeledDataset& clean, const TriggerSpec& spec,
                             int y_t, std::span<const double> fractions,
                             std::span<const double> scales,
                             std::span<const double> gammas) {
  clean.validate();
  if (y_t < 0 || y_t >= clean.class_count)
    throw std::invalid_argument("target label outside the dataset's classes");
  if (fractions.empty() || scales.empty() || gammas.empty())
    throw std::invalid_argument("fractions, scales and gammas must be non-empty");
  for (double f : fractions)
    if (f < 0.0 || f > 0.5)
      throw std::invalid_argument("poison fractions must lie in [0, 0.5]");
  for (double n : scales)
    if (!(n >= 1.0)) throw std::invalid_argument("scales must be >= 1");
  for (double g : gammas)
    if (!(g > 0.0)) throw std::invalid_argument("gammas must be positive");

  // Every fifth sample is held out for querying; the rest form the benign
  // pool the kernel memorizes.
  LabeledDataset pool;
  pool.class_count = clean.class_count;
  std::vector<Image> held;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (i % 5 == 4) {
      held.push_back(apply_trigger(clean.images[i], spec));
    } else {
      pool.images.push_back(clean.images[i]);
      pool.labels.push_back(clean.labels[i]);
    }
  }
  if (held.empty()) throw std::invalid_argument("held-out set is empty; need at least 5 samples");
  if (pool.images.empty()) throw std::invalid_argument("benign pool is empty");

  TheoremReport report;
  for (double fraction : fractions) {
    // fraction = N_p / (N_p + N_b) with N_b the full pool; victims are drawn
    // from the pool without replacement, triggered, relabeled and appended.
    // fraction 0.5 therefore poisons a copy of every pool image (N_p = N_b).
    std::size_t n_b = pool.size();
    std::size_t n_p = static_cast<std::size_t>(
        std::llround(fraction / (1.0 - fraction) * static_cast<double>(n_b)));
    LabeledDataset mix = pool;
    Rng rng(derive_seed(0x7e011u, "theorem-victims"));
    std::vector<std::size_t> victims = rng.sample_indices(n_b, n_p);
    for (std::size_t v : victims) {
      mix.images.push_back(apply_trigger(pool.images[v], spec));
      mix.labels.push_back(y_t);
    }

    for (double gamma : gammas) {
      KernelClassifier kc(mix, gamma);
      for (double n : scales) {
        std::size_t hits = 0;
        for (const Image& q : held)
          if (kc.predict_label(scale_image(q, n)) == y_t) ++hits;
        TheoremRow row;
        row.fraction = fraction;
        row.scale = n;
        row.gamma = gamma;
        row.target_rate = static_cast<double>(hits) / static_cast<double>(held.size());
        report.rows.push_back(row);
      }
    }
  }

  // Rate should grow (or hold) with the poison fraction for every fixed
  // (gamma, scale) pair; record any decrease.
  for (std::size_t a = 0; a < report.rows.size(); ++a)
    for (std::size_t b = a + 1; b < report.rows.size(); ++b) {
      const TheoremRow& ra = report.rows[a];
      const TheoremRow& rb = report.rows[b];
      if (ra.gamma == rb.gamma && ra.scale == rb.scale && ra.fraction < rb.fraction &&
          rb.target_rate < ra.target_rate) {
        report.monotone_in_fraction = false;
        std::ostringstream os;
        os << "gamma " << ra.gamma << " scale " << ra.scale << ": rate "
           << rb.target_rate << " at fraction " << rb.fraction << " below rate "
           << ra.target_rate << " at fraction " << ra.fraction;
        report.violations.push_back(os.str());
      }
    }
  return report;
}

void write_theorem_csv(const std::string& path, const TheoremReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "fraction,n,gamma,target_rate\n";
  for (const TheoremRow& r : report.rows)
    out << fmt_double(r.fraction) << ',' << fmt_double(r.scale) << ','
        << fmt_double(r.gamma) << ',' << fmt_double(r.target_rate) << "\n";
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

}  // namespace scaledet

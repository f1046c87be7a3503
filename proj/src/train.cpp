#include "scaledet/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scaledet/csvfmt.hpp"
#include "scaledet/detector.hpp"
#include "scaledet/rng.hpp"

namespace scaledet {

namespace {

// Scaled-copy regularizer inputs, precomputed once per training run.
struct AdaptiveReg {
  const std::vector<double>* scales = nullptr;
  double lambda = 0.0;
  std::vector<std::size_t> poisoned;        // indices into the training mix
  const std::vector<int>* original_labels = nullptr;
  std::uint64_t seed = 0;
};

TrainResult train_impl(MlpConvNet& net, const LabeledDataset& data,
                       const TrainConfig& cfg, const AdaptiveReg* reg) {
  data.validate();
  if (data.images.empty()) throw std::invalid_argument("training set is empty");
  if (net.class_count() != data.class_count)
    throw std::invalid_argument("network output width does not match the dataset's class count");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be at least 1");

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  // Flag lookup for the regularizer; only trigger-carrying samples get the
  // extra scaled-copy loss.
  std::vector<std::uint8_t> flagged(n, 0);
  if (reg) {
    for (std::size_t i : reg->poisoned) flagged[i] = 1;
  }

  Rng shuffle_rng(derive_seed(cfg.seed, "train-shuffle"));
  Rng scale_rng(derive_seed(cfg.seed, "train-adaptive-scale"));

  Gradients grads = net.zero_gradients();
  Gradients velocity = net.zero_gradients();
  std::vector<std::span<double>> params = net.param_views();

  TrainResult result;
  Tape tape;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      double batch_count = static_cast<double>(stop - start);

      for (std::vector<double>& g : grads.w) std::fill(g.begin(), g.end(), 0.0);
      for (std::vector<double>& g : grads.b) std::fill(g.begin(), g.end(), 0.0);

      double scale_n = 0.0;
      if (reg) scale_n = (*reg->scales)[scale_rng.index(reg->scales->size())];

      double batch_loss = 0.0;
      for (std::size_t bi = start; bi < stop; ++bi) {
        std::size_t idx = order[bi];
        batch_loss += net.forward(data.images[idx], data.labels[idx], tape);
        net.backward(tape, data.labels[idx], 1.0, grads);
        if (reg && flagged[idx]) {
          Image scaled = scale_image(data.images[idx], scale_n);
          int orig = (*reg->original_labels)[idx];
          batch_loss += reg->lambda * net.forward(scaled, orig, tape);
          net.backward(tape, orig, reg->lambda, grads);
        }
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "training diverged: non-finite loss at epoch " << epoch;
        throw std::runtime_error(os.str());
      }
      epoch_loss += batch_loss;

      // v <- momentum * v - lr * mean_grad; theta <- theta + v
      std::size_t pi = 0;
      for (std::size_t li = 0; li < grads.w.size(); ++li) {
        for (std::vector<double>* part : {&grads.w[li], &grads.b[li]}) {
          if (part->empty()) continue;
          std::span<double> theta = params[pi];
          std::vector<double>& vel =
              part == &grads.w[li] ? velocity.w[li] : velocity.b[li];
          for (std::size_t j = 0; j < theta.size(); ++j) {
            vel[j] = cfg.momentum * vel[j] - cfg.learning_rate * (*part)[j] / batch_count;
            theta[j] += vel[j];
          }
          ++pi;
        }
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (net.predict_label(data.images[i]) == data.labels[i]) ++correct;
  result.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

}  // namespace

TrainResult train(MlpConvNet& net, const LabeledDataset& data,
                  const TrainConfig& cfg) {
  return train_impl(net, data, cfg, nullptr);
}

TrainResult train_adaptive(MlpConvNet& net, const LabeledDataset& clean,
                           const AdaptivePlan& plan, const TrainConfig& cfg,
                           PoisonResult* mix_out) {
  if (plan.lambda < 0.0) throw std::invalid_argument("adaptive lambda must be non-negative");
  for (double s : plan.scales)
    if (s < 1.0) throw std::invalid_argument("adaptive regularizer scales must be >= 1");

  PoisonResult mix = build_poisoned_dataset(clean, plan.base);
  TrainResult result;
  if (plan.lambda == 0.0 || plan.scales.empty()) {
    result = train_impl(net, mix.data, cfg, nullptr);
  } else {
    AdaptiveReg reg;
    reg.scales = &plan.scales;
    reg.lambda = plan.lambda;
    reg.original_labels = &mix.original_labels;
    for (std::size_t i = 0; i < mix.flags.size(); ++i)
      if (mix.flags[i]) reg.poisoned.push_back(i);
    result = train_impl(net, mix.data, cfg, &reg);
  }
  if (mix_out) *mix_out = std::move(mix);
  return result;
}

double gradient_check(MlpConvNet& net, std::span<const Image> images,
                      std::span<const int> labels, double step) {
  if (images.empty() || images.size() != labels.size())
    throw std::invalid_argument("gradient check needs a non-empty image/label batch");
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");

  Gradients grads = net.zero_gradients();
  Tape tape;
  for (std::size_t i = 0; i < images.size(); ++i) {
    net.forward(images[i], labels[i], tape);
    net.backward(tape, labels[i], 1.0, grads);
  }

  auto total_loss = [&] {
    double sum = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i)
      sum += net.forward(images[i], labels[i], tape);
    return sum;
  };

  std::vector<std::span<double>> params = net.param_views();
  std::vector<const std::vector<double>*> analytic;
  for (std::size_t li = 0; li < grads.w.size(); ++li) {
    if (!grads.w[li].empty()) analytic.push_back(&grads.w[li]);
    if (!grads.b[li].empty()) analytic.push_back(&grads.b[li]);
  }

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::span<double> theta = params[pi];
    const std::vector<double>& a = *analytic[pi];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      double saved = theta[j];
      theta[j] = saved + step;
      double up = total_loss();
      theta[j] = saved - step;
      double down = total_loss();
      theta[j] = saved;
      double numeric = (up - down) / (2.0 * step);
      double denom = std::max({1.0, std::fabs(a[j]), std::fabs(numeric)});
      double rel = std::fabs(a[j] - numeric) / denom;
      if (rel > worst) worst = rel;
    }
  }
  return worst;
}

double attack_success_rate(const ClassifierModel& model,
                           const LabeledDataset& poisoned_test, int y_t) {
  poisoned_test.validate();
  std::vector<const Image*> eligible;
  for (std::size_t i = 0; i < poisoned_test.size(); ++i)
    if (poisoned_test.labels[i] != y_t) eligible.push_back(&poisoned_test.images[i]);
  if (eligible.empty())
    throw std::invalid_argument(
        "attack success rate undefined: every image already belongs to the target class");
  std::size_t hits = 0;
  for (const Image* img : eligible)
    if (model.predict_label(*img) == y_t) ++hits;
  return static_cast<double>(hits) / static_cast<double>(eligible.size());
}

double attack_success_rate(const ClassifierModel& model, const PoisonedTestset& ts) {
  return attack_success_rate(model, ts.data, ts.target_label);
}

std::vector<ProbePoint> noise_robustness_probe(const ClassifierModel& model,
                                               const LabeledDataset& poisoned_test,
                                               int y_t,
                                               std::span<const double> magnitudes,
                                               std::uint64_t seed) {
  poisoned_test.validate();
  if (magnitudes.empty())
    throw std::invalid_argument("noise robustness probe needs at least one magnitude");
  if (magnitudes[0] != 0.0)
    throw std::invalid_argument("noise robustness probe magnitudes must start at 0");
  for (std::size_t i = 1; i < magnitudes.size(); ++i)
    if (magnitudes[i] < magnitudes[i - 1])
      throw std::invalid_argument(
          "noise robustness probe magnitudes must be sorted ascending");

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < poisoned_test.size(); ++i)
    if (poisoned_test.labels[i] != y_t) eligible.push_back(i);
  if (eligible.empty())
    throw std::invalid_argument(
        "attack success rate undefined: every image already belongs to the target class");

  std::vector<ProbePoint> curve;
  curve.reserve(magnitudes.size());
  for (std::size_t m = 0; m < magnitudes.size(); ++m) {
    std::vector<Image> noisy;
    noisy.reserve(eligible.size());
    for (std::size_t j = 0; j < eligible.size(); ++j) {
      const std::uint64_t s = derive_seed(
          seed, "probe-" + std::to_string(m) + "-" + std::to_string(j));
      noisy.push_back(
          add_gaussian_noise(poisoned_test.images[eligible[j]], magnitudes[m], s));
    }
    const std::vector<int> pred = model.predict_labels(noisy);
    std::size_t hits = 0;
    for (int p : pred)
      if (p == y_t) ++hits;
    curve.push_back(
        {magnitudes[m],
         static_cast<double>(hits) / static_cast<double>(eligible.size())});
  }
  return curve;
}

void write_probe_csv(const std::string& path, std::span<const ProbePoint> points,
                     const std::string& model_tag) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "magnitude,asr,model_tag\n";
  for (const ProbePoint& p : points)
    out << fmt_double(p.magnitude) << ',' << fmt_double(p.asr) << ',' << model_tag
        << "\n";
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

double accuracy(const ClassifierModel& model, const LabeledDataset& data) {
  data.validate();
  if (data.images.empty()) throw std::invalid_argument("accuracy over an empty set");
  std::vector<int> pred = model.predict_labels(data.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (pred[i] == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace scaledet

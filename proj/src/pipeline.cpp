#include "scaledet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "scaledet/csvfmt.hpp"
#include "scaledet/idx.hpp"
#include "scaledet/rng.hpp"

namespace scaledet {

namespace {

using nlohmann::json;

LabeledDataset synth_from_config(const RunConfig& cfg, int per_class,
                                 const char* stage) {
  return synth_dataset(cfg.dataset.classes, per_class, cfg.dataset.channels,
                       cfg.dataset.height, cfg.dataset.width,
                       cfg.dataset.noise_sigma, derive_seed(cfg.seed, stage));
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << doc.dump(1) << "\n";
  if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

}  // namespace

LabeledDataset pipeline_train_set(const RunConfig& cfg) {
  if (cfg.dataset.source == "idx")
    return load_idx(cfg.dataset.idx_images, cfg.dataset.idx_labels);
  return synth_from_config(cfg, cfg.dataset.per_class, "synth-train");
}

LabeledDataset pipeline_test_set(const RunConfig& cfg) {
  if (cfg.dataset.source == "idx") {
    if (cfg.dataset.idx_test_images.empty() || cfg.dataset.idx_test_labels.empty())
      throw std::invalid_argument("source 'idx' needs idx_test_images and idx_test_labels");
    return load_idx(cfg.dataset.idx_test_images, cfg.dataset.idx_test_labels);
  }
  return synth_from_config(cfg, cfg.dataset.test_per_class, "synth-test");
}

LabeledDataset pipeline_stats_set(const RunConfig& cfg) {
  if (cfg.dataset.source == "idx") {
    // The defender's handful of benign samples: the first stats_per_class of
    // each class from the training set.
    LabeledDataset full = pipeline_train_set(cfg);
    LabeledDataset out;
    out.class_count = full.class_count;
    std::vector<int> taken(full.class_count, 0);
    for (std::size_t i = 0; i < full.size(); ++i) {
      int k = full.labels[i];
      if (taken[k] >= cfg.detector.stats_per_class) continue;
      ++taken[k];
      out.images.push_back(full.images[i]);
      out.labels.push_back(k);
    }
    return out;
  }
  return synth_from_config(cfg, cfg.detector.stats_per_class, "stats-data");
}

TriggerSpec trigger_from_config(const TriggerConfig& t, const DatasetConfig& d) {
  if (t.builtin == "full-image")
    return make_full_image_trigger(d.channels, d.height, d.width, t.alpha,
                                   t.pattern_seed);
  if (t.builtin == "inline") {
    Image like(d.channels, d.height, d.width);
    if (t.mask.size() != like.size() || t.pattern.size() != like.size())
      throw std::invalid_argument(
          "inline trigger mask/pattern length does not match the image shape");
    TriggerSpec spec;
    spec.mask = like;
    spec.mask.pixels = t.mask;
    spec.pattern = like;
    spec.pattern.pixels = t.pattern;
    spec.alpha = t.alpha;
    spec.builtin = "inline";
    spec.validate(like);
    return spec;
  }
  int row = t.row, col = t.col;
  if (row < 0) row = std::max(0, d.height - t.patch - 1);
  if (col < 0) col = std::max(0, d.width - t.patch - 1);
  return make_patch_trigger(t.builtin, d.channels, d.height, d.width, t.patch,
                            row, col, t.alpha, t.pattern_seed);
}

PoisonPlan plan_from_config(const RunConfig& cfg) {
  PoisonPlan plan;
  plan.poison_rate = cfg.attack.poison_rate;
  plan.mode = cfg.poison_mode();
  plan.seed = derive_seed(cfg.seed, "poison");
  for (const TriggerConfig& t : cfg.attack.triggers) {
    TriggerAssignment asg;
    asg.trigger = trigger_from_config(t, cfg.dataset);
    asg.target_label = t.target_label;
    asg.source_class = t.source_class;
    plan.triggers.push_back(std::move(asg));
  }
  return plan;
}

std::string model_artifact_path(const RunConfig& cfg, bool adaptive) {
  std::vector<std::string> sections = {"dataset", "attack", "model"};
  if (adaptive) sections.push_back("adaptive");
  std::string kind = adaptive ? "adaptive" : (cfg.attack.enabled ? "poisoned" : "benign");
  return cfg.out_dir + "/model-" + kind + "-" + cfg.section_hash(sections) + ".json";
}

MlpConvNet ensure_model(const RunConfig& cfg, bool adaptive, TrainResult* log) {
  if (adaptive && !cfg.attack.enabled)
    throw std::invalid_argument("adaptive training requires attack.enabled");

  // Serialized so concurrent sweep points cannot race on the artifact file.
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);

  std::string path = model_artifact_path(cfg, adaptive);
  if (std::filesystem::exists(path)) return MlpConvNet::load_checkpoint(path);

  LabeledDataset clean = pipeline_train_set(cfg);
  Shape3 input{cfg.dataset.channels, cfg.dataset.height, cfg.dataset.width};
  if (cfg.dataset.source == "idx")
    input = Shape3{clean.images[0].channels, clean.images[0].height,
                   clean.images[0].width};
  MlpConvNet net(cfg.model.arch, input, clean.class_count,
                 derive_seed(cfg.seed, "model"));

  TrainResult result;
  TrainConfig tc = cfg.train_config();
  if (!cfg.attack.enabled) {
    result = train(net, clean, tc);
  } else if (adaptive) {
    AdaptivePlan plan;
    plan.base = plan_from_config(cfg);
    plan.scales = cfg.adaptive.scales;
    plan.lambda = cfg.adaptive.lambda;
    result = train_adaptive(net, clean, plan, tc);
  } else {
    PoisonResult mix = build_poisoned_dataset(clean, plan_from_config(cfg));
    result = train(net, mix.data, tc);
  }

  std::filesystem::create_directories(cfg.out_dir);
  net.save_checkpoint(path);
  if (log) *log = std::move(result);
  return net;
}

DetectionOutcome run_detection(const RunConfig& cfg, const MlpConvNet& model,
                               std::uint64_t detection_seed) {
  LabeledDataset test = pipeline_test_set(cfg);
  PoisonPlan plan = plan_from_config(cfg);

  DetectionOutcome out;
  out.clean_accuracy = accuracy(model, test);

  // One positive set per trigger; negatives (and their noisy copies) from the
  // first construction, since they do not depend on the trigger.
  std::vector<Image> positives, negatives;
  double asr_sum = 0.0;
  for (std::size_t i = 0; i < plan.triggers.size(); ++i) {
    PoisonedTestset pts = build_poisoned_testset(test, plan.triggers[i].trigger,
                                                 plan.triggers[i].target_label);
    asr_sum += attack_success_rate(model, pts);
    EvalSets sets = build_eval_sets(test, pts, model, cfg.eval.magnitude,
                                    cfg.membership(),
                                    derive_seed(detection_seed, "eval-sets-" + fmt_u64(i)));
    positives.insert(positives.end(), sets.positive.begin(), sets.positive.end());
    if (i == 0) negatives = std::move(sets.negative);
  }
  out.asr = asr_sum / static_cast<double>(plan.triggers.size());

  ScalingSet s(cfg.detector.scales);
  switch (cfg.detector_mode()) {
    case DetectorMode::data_free:
      out.pos_scores = spc_scores(model, positives, s);
      out.neg_scores = spc_scores(model, negatives, s);
      break;
    case DetectorMode::data_limited: {
      ClassStats stats = fit_class_stats(model, pipeline_stats_set(cfg), s);
      out.pos_scores = nspc_scores(model, positives, s, stats, cfg.nspc_mode());
      out.neg_scores = nspc_scores(model, negatives, s, stats, cfg.nspc_mode());
      break;
    }
    case DetectorMode::noise_variant:
      out.pos_scores = noise_variant_scores(model, positives,
                                            cfg.detector.noise_magnitudes,
                                            derive_seed(detection_seed, "nv-pos"));
      out.neg_scores = noise_variant_scores(model, negatives,
                                            cfg.detector.noise_magnitudes,
                                            derive_seed(detection_seed, "nv-neg"));
      break;
  }

  out.roc = roc_curve(out.pos_scores, out.neg_scores);
  out.auroc_value = out.roc.auroc;
  out.threshold =
      cfg.detector.threshold >= 0.0 ? cfg.detector.threshold : choose_threshold(out.roc);

  double pos_sum = 0.0, neg_sum = 0.0;
  std::size_t id = 0;
  for (double v : out.pos_scores) {
    out.rows.push_back({id++, true, v});
    pos_sum += v;
  }
  for (double v : out.neg_scores) {
    out.rows.push_back({id++, false, v});
    neg_sum += v;
  }
  out.mean_pos_score = pos_sum / static_cast<double>(out.pos_scores.size());
  out.mean_neg_score = neg_sum / static_cast<double>(out.neg_scores.size());
  return out;
}

SweepPoint run_sweep_point(const RunConfig& base, SweepParam param, double value,
                           std::uint64_t point_seed) {
  RunConfig cfg = base;
  bool retrain = false;
  switch (param) {
    case SweepParam::scaling_set_size: {
      int k = static_cast<int>(std::lround(value));
      if (k < 1) throw std::invalid_argument("scaling_set_size must be at least 1");
      cfg.detector.scales.clear();
      for (int i = 0; i < k; ++i) cfg.detector.scales.push_back(3.0 + 2.0 * i);
      break;
    }
    case SweepParam::local_samples_per_class:
      cfg.detector.mode = "data-limited";
      cfg.detector.stats_per_class = static_cast<int>(std::lround(value));
      break;
    case SweepParam::poisoning_rate:
      cfg.attack.poison_rate = value;
      retrain = true;
      break;
    case SweepParam::trigger_size: {
      int side = static_cast<int>(std::lround(value));
      for (TriggerConfig& t : cfg.attack.triggers) {
        t.patch = side;
        t.row = -1;
        t.col = -1;
      }
      retrain = true;
      break;
    }
    case SweepParam::infected_label_count: {
      int count = static_cast<int>(std::lround(value));
      if (count < 1 || count > cfg.dataset.classes)
        throw std::invalid_argument("infected_label_count must lie in [1, classes]");
      TriggerConfig prototype = cfg.attack.triggers.at(0);
      cfg.attack.triggers.clear();
      for (int t = 0; t < count; ++t) {
        TriggerConfig tc = prototype;
        tc.target_label = t;
        tc.pattern_seed = prototype.pattern_seed + static_cast<std::uint64_t>(t);
        tc.row = -1;
        tc.col = -1;
        cfg.attack.triggers.push_back(tc);
      }
      retrain = true;
      break;
    }
    case SweepParam::trigger_count: {
      int count = static_cast<int>(std::lround(value));
      if (count < 1) throw std::invalid_argument("trigger_count must be at least 1");
      TriggerConfig prototype = cfg.attack.triggers.at(0);
      cfg.attack.triggers.clear();
      for (int t = 0; t < count; ++t) {
        TriggerConfig tc = prototype;
        tc.pattern_seed = prototype.pattern_seed + static_cast<std::uint64_t>(t);
        // Distinct placements cycling the four corners (margin 1).
        int p = tc.patch;
        int hi_r = std::max(0, cfg.dataset.height - p - 1);
        int hi_c = std::max(0, cfg.dataset.width - p - 1);
        switch (t % 4) {
          case 0: tc.row = hi_r; tc.col = hi_c; break;
          case 1: tc.row = 1; tc.col = 1; break;
          case 2: tc.row = 1; tc.col = hi_c; break;
          default: tc.row = hi_r; tc.col = 1; break;
        }
        cfg.attack.triggers.push_back(tc);
      }
      retrain = true;
      break;
    }
  }

  // Training-affecting points get a fresh root seed (new data, new model);
  // detector-only points keep the model and re-seed detection.
  std::uint64_t detection_seed;
  if (retrain) {
    cfg.seed = point_seed;
    detection_seed = derive_seed(point_seed, "detection");
  } else {
    detection_seed = point_seed;
  }

  MlpConvNet model = ensure_model(cfg, cfg.adaptive.enabled);
  DetectionOutcome outcome = run_detection(cfg, model, detection_seed);

  SweepPoint point;
  point.value = value;
  point.auroc = outcome.auroc_value;
  point.asr = outcome.asr;
  point.has_asr = retrain;
  return point;
}

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
  std::filesystem::create_directories(cfg.out_dir);
  LabeledDataset train_set = pipeline_train_set(cfg);
  LabeledDataset test_set = pipeline_test_set(cfg);
  save_idx(train_set, cfg.out_dir + "/train-images.idx", cfg.out_dir + "/train-labels.idx");
  save_idx(test_set, cfg.out_dir + "/test-images.idx", cfg.out_dir + "/test-labels.idx");
  json info;
  info["train_count"] = train_set.size();
  info["test_count"] = test_set.size();
  info["class_count"] = train_set.class_count;
  info["image_shape"] = {train_set.images[0].channels, train_set.images[0].height,
                         train_set.images[0].width};
  info["idx_note"] = "channels are folded into rows in the IDX files";
  write_json_file(cfg.out_dir + "/dataset.json", info);
  write_manifest(cfg, "synth");
  out << "synth: wrote " << train_set.size() << " train and " << test_set.size()
      << " test images to " << cfg.out_dir << "\n";
}

void cmd_poison(const RunConfig& cfg, std::ostream& out) {
  std::filesystem::create_directories(cfg.out_dir);
  LabeledDataset clean = pipeline_train_set(cfg);
  PoisonResult mix = build_poisoned_dataset(clean, plan_from_config(cfg));
  save_idx(mix.data, cfg.out_dir + "/poisoned-images.idx",
           cfg.out_dir + "/poisoned-labels.idx");
  std::string flags_path = cfg.out_dir + "/poison-flags.csv";
  std::ofstream fl(flags_path, std::ios::trunc);
  if (!fl) throw std::runtime_error(flags_path + ": cannot open for writing");
  fl << "sample_id,poisoned,original_label,trigger_index\n";
  for (std::size_t i = 0; i < mix.data.size(); ++i)
    fl << i << ',' << int(mix.flags[i]) << ',' << mix.original_labels[i] << ','
       << mix.trigger_index[i] << "\n";
  if (!fl.flush()) throw std::runtime_error(flags_path + ": write failed");
  write_manifest(cfg, "poison");
  std::size_t flagged = 0;
  for (std::uint8_t f : mix.flags) flagged += f;
  out << "poison: " << flagged << " of " << mix.data.size()
      << " entries carry a trigger\n";
}

namespace {

void train_command(const RunConfig& cfg, std::ostream& out, bool adaptive) {
  TrainResult log;
  MlpConvNet model = ensure_model(cfg, adaptive, &log);
  LabeledDataset test = pipeline_test_set(cfg);

  json summary;
  summary["model_path"] = model_artifact_path(cfg, adaptive);
  summary["parameters"] = model.param_count();
  summary["clean_accuracy"] = accuracy(model, test);
  if (cfg.attack.enabled) {
    PoisonPlan plan = plan_from_config(cfg);
    double asr_sum = 0.0;
    for (const TriggerAssignment& asg : plan.triggers)
      asr_sum += attack_success_rate(
          model, build_poisoned_testset(test, asg.trigger, asg.target_label));
    summary["attack_success_rate"] = asr_sum / double(plan.triggers.size());
  }
  const char* name = adaptive ? "train-adaptive" : "train";
  if (!log.epoch_loss.empty()) {
    summary["final_train_accuracy"] = log.final_train_accuracy;
    std::string log_path = cfg.out_dir + std::string("/") + name + "-log.csv";
    std::ofstream lg(log_path, std::ios::trunc);
    if (!lg) throw std::runtime_error(log_path + ": cannot open for writing");
    lg << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
      lg << e << ',' << fmt_double(log.epoch_loss[e]) << "\n";
    if (!lg.flush()) throw std::runtime_error(log_path + ": write failed");
  }
  write_json_file(cfg.out_dir + std::string("/") + name + "-summary.json", summary);
  write_manifest(cfg, name);
  out << name << ": clean accuracy " << fmt_double(summary["clean_accuracy"].get<double>());
  if (summary.contains("attack_success_rate"))
    out << ", attack success rate "
        << fmt_double(summary["attack_success_rate"].get<double>());
  out << "\n";
}

}  // namespace

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  train_command(cfg, out, cfg.adaptive.enabled);
}

void cmd_train_adaptive(const RunConfig& cfg, std::ostream& out) {
  train_command(cfg, out, true);
}

void cmd_fit_stats(const RunConfig& cfg, std::ostream& out) {
  MlpConvNet model = ensure_model(cfg, cfg.adaptive.enabled);
  ScalingSet s(cfg.detector.scales);
  ClassStats stats = fit_class_stats(model, pipeline_stats_set(cfg), s);
  json doc;
  doc["mean"] = stats.mean;
  doc["stddev"] = stats.stddev;
  doc["count"] = stats.count;
  doc["scales"] = cfg.detector.scales;
  write_json_file(cfg.out_dir + "/class-stats.json", doc);
  write_manifest(cfg, "fit-stats");
  double lo = stats.mean[0], hi = stats.mean[0];
  for (double m : stats.mean) {
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  out << "fit-stats: per-class mean score range [" << fmt_double(lo) << ", "
      << fmt_double(hi) << "]\n";
}

void cmd_detect(const RunConfig& cfg, std::ostream& out) {
  MlpConvNet model = ensure_model(cfg, cfg.adaptive.enabled);
  DetectionOutcome res = run_detection(cfg, model, derive_seed(cfg.seed, "detection"));
  std::filesystem::create_directories(cfg.out_dir);
  write_report_csv(cfg.out_dir + "/report.csv", res.rows, cfg.detector_mode(),
                   cfg.detector.scales.size(), res.threshold);
  json summary;
  summary["mode"] = cfg.detector.mode;
  summary["threshold"] = res.threshold;
  summary["mean_poisoned_score"] = res.mean_pos_score;
  summary["mean_benign_score"] = res.mean_neg_score;
  summary["score_gap"] = res.mean_pos_score - res.mean_neg_score;
  summary["auroc"] = res.auroc_value;
  write_json_file(cfg.out_dir + "/detect-summary.json", summary);
  write_manifest(cfg, "detect");
  out << "detect: mean score gap "
      << fmt_double(res.mean_pos_score - res.mean_neg_score) << " (poisoned "
      << fmt_double(res.mean_pos_score) << ", benign "
      << fmt_double(res.mean_neg_score) << ")\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& out) {
  MlpConvNet model = ensure_model(cfg, cfg.adaptive.enabled);
  DetectionOutcome res = run_detection(cfg, model, derive_seed(cfg.seed, "detection"));
  std::filesystem::create_directories(cfg.out_dir);
  write_report_csv(cfg.out_dir + "/scores.csv", res.rows, cfg.detector_mode(),
                   cfg.detector.scales.size(), res.threshold);
  write_roc_csv(cfg.out_dir + "/roc.csv", res.roc);
  write_roc_svg(cfg.out_dir + "/roc.svg", res.roc);
  json summary;
  summary["auroc"] = res.auroc_value;
  summary["asr"] = res.asr;
  summary["clean_accuracy"] = res.clean_accuracy;
  summary["threshold"] = res.threshold;
  summary["mode"] = cfg.detector.mode;
  summary["membership"] = cfg.eval.membership;
  write_json_file(cfg.out_dir + "/eval-summary.json", summary);
  write_manifest(cfg, "eval");
  out << "eval: AUROC " << fmt_double(res.auroc_value) << " (mode " << cfg.detector.mode
      << ", asr " << fmt_double(res.asr) << ", clean accuracy "
      << fmt_double(res.clean_accuracy) << ")\n";
}

void cmd_theorem_check(const RunConfig& cfg, std::ostream& out) {
  LabeledDataset clean =
      synth_dataset(cfg.theorem.classes, cfg.theorem.per_class, cfg.dataset.channels,
                    cfg.dataset.height, cfg.dataset.width, cfg.dataset.noise_sigma,
                    derive_seed(cfg.seed, "theorem-data"));
  TriggerSpec spec = trigger_from_config(cfg.attack.triggers.at(0), cfg.dataset);
  int y_t = cfg.attack.triggers.at(0).target_label;
  TheoremReport report = theorem1_check(clean, spec, y_t, cfg.theorem.fractions,
                                        cfg.theorem.scales, cfg.theorem.gammas);
  std::filesystem::create_directories(cfg.out_dir);
  write_theorem_csv(cfg.out_dir + "/theorem.csv", report);
  write_manifest(cfg, "theorem-check");

  double limit_min = 1.0;
  bool has_limit = false;
  for (const TheoremRow& r : report.rows)
    if (r.fraction == 0.5) {
      has_limit = true;
      limit_min = std::min(limit_min, r.target_rate);
    }
  out << "theorem-check: " << report.rows.size() << " rows";
  if (has_limit) out << ", minimum target rate at fraction 0.5: " << fmt_double(limit_min);
  out << (report.monotone_in_fraction ? ", monotone in fraction"
                                      : ", NOT monotone in fraction")
      << "\n";
}

void cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  SweepParam param = sweep_param_from_name(cfg.sweep.parameter);
  std::vector<SweepPoint> points =
      run_sweep(param, cfg.sweep.grid, cfg.seed, [&](double value, std::uint64_t seed) {
        return run_sweep_point(cfg, param, value, seed);
      });
  std::filesystem::create_directories(cfg.out_dir);
  write_sweep_csv(cfg.out_dir + "/sweep.csv", points);
  write_manifest(cfg, "sweep");
  out << "sweep " << cfg.sweep.parameter << ": " << points.size()
      << " points, AUROC " << fmt_double(points.front().auroc) << " -> "
      << fmt_double(points.back().auroc) << "\n";
}

void cmd_confidence_curve(const RunConfig& cfg, std::ostream& out) {
  MlpConvNet model = ensure_model(cfg, cfg.adaptive.enabled);
  LabeledDataset test = pipeline_test_set(cfg);
  PoisonPlan plan = plan_from_config(cfg);
  PoisonedTestset pts = build_poisoned_testset(test, plan.triggers.at(0).trigger,
                                               plan.triggers.at(0).target_label);
  int n_max = static_cast<int>(std::lround(
      *std::max_element(cfg.detector.scales.begin(), cfg.detector.scales.end())));
  std::vector<double> benign = confidence_curve(model, test.images, n_max);
  std::vector<double> poisoned = confidence_curve(model, pts.data.images, n_max);

  std::filesystem::create_directories(cfg.out_dir);
  std::string path = cfg.out_dir + "/confidence.csv";
  std::ofstream cs(path, std::ios::trunc);
  if (!cs) throw std::runtime_error(path + ": cannot open for writing");
  cs << "n,benign_mean_confidence,poisoned_mean_confidence\n";
  for (int n = 1; n <= n_max; ++n)
    cs << n << ',' << fmt_double(benign[n - 1]) << ',' << fmt_double(poisoned[n - 1])
       << "\n";
  if (!cs.flush()) throw std::runtime_error(path + ": write failed");
  write_manifest(cfg, "confidence-curve");
  out << "confidence-curve: benign " << fmt_double(benign.front()) << " -> "
      << fmt_double(benign.back()) << ", poisoned " << fmt_double(poisoned.front())
      << " -> " << fmt_double(poisoned.back()) << " over n=1.." << n_max << "\n";
}

void cmd_bench(const RunConfig& cfg, std::ostream& out) {
  MlpConvNet model = ensure_model(cfg, cfg.adaptive.enabled);
  LabeledDataset test = pipeline_test_set(cfg);
  std::size_t batch = std::min<std::size_t>(cfg.bench.batch, test.size());
  std::span<const Image> images(test.images.data(), batch);
  BenchResult res = bench_overhead(model, cfg.detector.scales, images,
                                   cfg.bench.runs, cfg.bench.batched);
  std::filesystem::create_directories(cfg.out_dir);
  std::string path = cfg.out_dir + "/bench.csv";
  std::ofstream bs(path, std::ios::trunc);
  if (!bs) throw std::runtime_error(path + ": cannot open for writing");
  bs << "raw_ms,detect_ms,ratio,batched,runs,batch\n";
  bs << fmt_double(res.raw_ms) << ',' << fmt_double(res.detect_ms) << ','
     << fmt_double(res.ratio) << ',' << (cfg.bench.batched ? 1 : 0) << ','
     << cfg.bench.runs << ',' << batch << "\n";
  if (!bs.flush()) throw std::runtime_error(path + ": write failed");
  write_manifest(cfg, "bench");
  out << "bench: raw " << fmt_double(res.raw_ms) << " ms, detect "
      << fmt_double(res.detect_ms) << " ms, ratio " << fmt_double(res.ratio) << "\n";
}

}  // namespace scaledet

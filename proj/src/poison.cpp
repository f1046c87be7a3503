#include "scaledet/poison.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "scaledet/rng.hpp"

namespace scaledet {

namespace {

const char* mode_name(PoisonMode m) {
  switch (m) {
    case PoisonMode::dirty_label: return "dirty-label";
    case PoisonMode::clean_label: return "clean-label";
    case PoisonMode::source_specific: return "source-specific";
  }
  return "?";
}

}  // namespace

PoisonResult build_poisoned_dataset(const LabeledDataset& clean,
                                    const PoisonPlan& plan) {
  clean.validate();
  if (plan.triggers.empty())
    throw std::invalid_argument("poison plan has no triggers");
  if (!(plan.poison_rate > 0.0) || plan.poison_rate > 0.5)
    throw std::invalid_argument("poison_rate must lie in (0, 0.5]");

  std::size_t n = clean.size();
  std::size_t victims_per_trigger =
      static_cast<std::size_t>(std::floor(plan.poison_rate * static_cast<double>(n)));
  if (victims_per_trigger == 0) {
    std::ostringstream os;
    os << "poison_rate " << plan.poison_rate << " over " << n
       << " samples selects zero victims";
    throw std::invalid_argument(os.str());
  }

  PoisonResult out;
  out.data.images = clean.images;
  out.data.labels = clean.labels;
  out.data.class_count = clean.class_count;
  out.flags.assign(n, 0);
  out.original_labels = clean.labels;
  out.trigger_index.assign(n, -1);

  std::vector<std::uint8_t> used(n, 0);
  Rng rng(derive_seed(plan.seed, "poison-selection"));

  auto pick = [&](const std::vector<std::size_t>& pool, std::size_t count,
                  const char* what, int trig_idx) {
    if (pool.size() < count) {
      std::ostringstream os;
      os << mode_name(plan.mode) << " trigger " << trig_idx << ": needs " << count
         << " " << what << " but only " << pool.size() << " remain";
      throw std::invalid_argument(os.str());
    }
    std::vector<std::size_t> chosen_pos = rng.sample_indices(pool.size(), count);
    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    for (std::size_t p : chosen_pos) chosen.push_back(pool[p]);
    return chosen;
  };

  for (std::size_t t = 0; t < plan.triggers.size(); ++t) {
    const TriggerAssignment& asg = plan.triggers[t];
    if (asg.target_label < 0 || asg.target_label >= clean.class_count)
      throw std::invalid_argument("trigger target label outside the dataset's classes");
    if (plan.mode == PoisonMode::source_specific &&
        (asg.source_class < 0 || asg.source_class >= clean.class_count ||
         asg.source_class == asg.target_label))
      throw std::invalid_argument(
          "source-specific trigger needs a source class distinct from its target");

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      if (plan.mode == PoisonMode::clean_label && clean.labels[i] != asg.target_label)
        continue;
      if (plan.mode == PoisonMode::source_specific && clean.labels[i] != asg.source_class)
        continue;
      pool.push_back(i);
    }
    const char* what = plan.mode == PoisonMode::clean_label ? "target-class victims"
                       : plan.mode == PoisonMode::source_specific ? "source-class victims"
                                                                  : "victims";
    std::vector<std::size_t> victims =
        pick(pool, victims_per_trigger, what, static_cast<int>(t));
    for (std::size_t i : victims) {
      used[i] = 1;
      out.data.images[i] = apply_trigger(clean.images[i], asg.trigger);
      out.data.labels[i] = asg.target_label;  // clean-label victims already carry it
      out.flags[i] = 1;
      out.trigger_index[i] = static_cast<int>(t);
    }

    if (plan.mode == PoisonMode::source_specific) {
      // Counterexamples teaching the model the trigger alone is not enough:
      // triggered images from other classes keep their true labels.
      std::vector<std::size_t> pool2;
      for (std::size_t i = 0; i < n; ++i)
        if (!used[i] && clean.labels[i] != asg.source_class) pool2.push_back(i);
      std::vector<std::size_t> extras = pick(pool2, victims_per_trigger,
                                             "non-source counterexamples",
                                             static_cast<int>(t));
      for (std::size_t i : extras) {
        used[i] = 1;
        out.data.images.push_back(apply_trigger(clean.images[i], asg.trigger));
        out.data.labels.push_back(clean.labels[i]);
        out.flags.push_back(1);
        out.original_labels.push_back(clean.labels[i]);
        out.trigger_index.push_back(static_cast<int>(t));
      }
    }
  }

  out.data.validate();
  return out;
}

PoisonedTestset build_poisoned_testset(const LabeledDataset& clean_test,
                                       const TriggerSpec& spec, int y_t) {
  clean_test.validate();
  if (clean_test.images.empty())
    throw std::invalid_argument("cannot poison an empty test set");
  if (y_t < 0 || y_t >= clean_test.class_count)
    throw std::invalid_argument("target label outside the test set's classes");

  PoisonedTestset out;
  out.target_label = y_t;
  out.data.class_count = clean_test.class_count;
  out.data.labels = clean_test.labels;
  out.data.images.reserve(clean_test.size());
  for (const Image& img : clean_test.images)
    out.data.images.push_back(apply_trigger(img, spec));
  return out;
}

}  // namespace scaledet

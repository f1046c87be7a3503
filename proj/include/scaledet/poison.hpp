#ifndef SCALEDET_POISON_HPP
#define SCALEDET_POISON_HPP

#include <cstdint>
#include <vector>

#include "scaledet/dataset.hpp"
#include "scaledet/trigger.hpp"

namespace scaledet {

enum class PoisonMode { dirty_label, clean_label, source_specific };

struct TriggerAssignment {
  TriggerSpec trigger;
  int target_label = 0;
  int source_class = -1;  // source_specific mode only
};

struct PoisonPlan {
  std::vector<TriggerAssignment> triggers;  // non-empty
  double poison_rate = 0.1;                 // in (0, 0.5]
  PoisonMode mode = PoisonMode::dirty_label;
  std::uint64_t seed = 0;
};

struct PoisonResult {
  LabeledDataset data;
  // Aligned with data: flags[i] is true for entries carrying a trigger.
  std::vector<std::uint8_t> flags;
  // For flagged entries, the pre-poisoning ground-truth label; equals
  // data.labels[i] for unflagged entries.
  std::vector<int> original_labels;
  // Index into plan.triggers for flagged entries, -1 otherwise.
  std::vector<int> trigger_index;
};

// Builds the training mix: floor(rate * N) victims per trigger, selected
// uniformly without replacement from the mode's eligible pool, disjoint
// across triggers. Dirty-label relabels victims to the trigger's target;
// clean-label draws victims from the target class only (labels already
// correct); source-specific relabels source-class victims to the target and
// appends an equal number of triggered non-source images that keep their
// original labels. Unflagged entries stay bit-identical to the clean set.
PoisonResult build_poisoned_dataset(const LabeledDataset& clean,
                                    const PoisonPlan& plan);

// Triggered copy of an entire test set. Labels keep the original ground
// truth; the intended target travels alongside so attack success can be
// measured against it.
struct PoisonedTestset {
  LabeledDataset data;  // labels = original ground truth
  int target_label = 0;
};

PoisonedTestset build_poisoned_testset(const LabeledDataset& clean_test,
                                       const TriggerSpec& spec, int y_t);

}  // namespace scaledet

#endif  // SCALEDET_POISON_HPP

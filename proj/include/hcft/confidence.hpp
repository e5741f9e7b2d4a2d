#pragma once

#include <vector>

#include "hcft/data.hpp"
#include "hcft/mil.hpp"

namespace hcft {

// Reference to an instance inside a cohort, stable across stages.
struct InstanceRef {
    std::size_t bag_index;
    std::size_t patch_index;

    bool operator==(const InstanceRef& o) const {
        return bag_index == o.bag_index && patch_index == o.patch_index;
    }
    bool operator<(const InstanceRef& o) const {
        return bag_index != o.bag_index ? bag_index < o.bag_index : patch_index < o.patch_index;
    }
};

struct BagConfidence {
    std::size_t bag_index;
    std::vector<double> scores;      // s_k, one per instance
    std::vector<std::size_t> order;  // descending-score permutation of 0..N-1
    int kt_used;
};

struct LabeledInstance {
    InstanceRef ref;
    int label;  // pseudo label (bag label in T_h, -1 in T_l)
};

struct SplitSets {
    std::vector<LabeledInstance> high;  // T_h, pseudo label = bag label
    std::vector<LabeledInstance> low;   // T_l, pseudo label = -1
};

// s_k = a_k * p_k[Y], the attention times the bag-label-class probability.
std::vector<double> confidence_scores(const MILModel& model, const Bag& bag);

// Pre-clamp schedule value: min((t+1) * K0 * log10(N), N/3).
double kt_raw(int t, int bag_size, int k0);
// Rounded to nearest then clamped into [1, N].
int kt_schedule(int t, int bag_size, int k0);

struct PseudoInit {
    SplitSets sets;
    std::vector<BagConfidence> table;
};

// Top-K_t instances of every training bag enter T_h with the bag label, the
// rest enter T_l with label -1. Ties break on lower patch index.
PseudoInit init_pseudo_labels(const MILModel& model, const std::vector<Bag>& bags,
                              const std::vector<std::size_t>& train_bag_indices, int t, int k0);

}  // namespace hcft

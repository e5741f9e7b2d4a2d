#pragma once

#include <cstdint>
#include <vector>

#include "hcft/cluster.hpp"
#include "hcft/confidence.hpp"
#include "hcft/data.hpp"

namespace hcft {

// A mined potential negative: an instance from T_l whose nearest class center
// outranks its bag label, making it a guaranteed negative that mimics class
// `mimicked_class`.
struct MinedNegative {
    InstanceRef ref;
    int mimicked_class;  // in 1..n-1, strictly above the bag label
};

// For each T_l instance, find the nearest class cluster set; instances nearer
// to a class above their bag label become potential negatives. Classes with an
// empty cluster set are skipped.
std::vector<MinedNegative> mine_potential_negatives(const std::vector<Bag>& bags,
                                                    const std::vector<LabeledInstance>& low,
                                                    const ClassClusterSets& sets,
                                                    const ClusterModel& clusters, int n_classes);

struct RefinementResult {
    std::vector<LabeledInstance> cleaned_high;   // survivors of positive cleaning, label = bag label
    std::vector<MinedNegative> final_negatives;  // N_final = N_middle_h ∪ N_middle_l
    std::vector<MinedNegative> middle_low;       // from T_l (re-cluster survivors)
    std::vector<MinedNegative> middle_high;      // from T_h (demoted positives)
    ClusterModel clusters;                       // the second clustering
    ClassClusterSets sets;                       // L*
    bool degenerate = false;                     // all clusters owned by one class
};

// Second clustering over T_h ∪ N_original and the three-way split: drop mined
// negatives whose cluster class fell to <= bag label, demote T_h members whose
// cluster class rose above their bag label, and clean T_h down to members whose
// cluster class equals their bag label.
RefinementResult refine_labels(const std::vector<Bag>& bags,
                               const std::vector<LabeledInstance>& high,
                               const std::vector<MinedNegative>& mined, int n_classes,
                               std::size_t n_clusters, double theta, std::uint64_t seed);

// One refined patch-dataset entry; labels 0..n-1 are positives, n..2n-2 are
// hard negatives of class (label - n + 1).
struct PatchEntry {
    InstanceRef ref;
    int label;
};

struct PatchDataset {
    std::vector<PatchEntry> entries;
    int n_classes;                       // 2n-1
    std::vector<std::size_t> histogram;  // per label
    bool has_empty_class = false;
};

int hard_negative_label(int mimicked_class, int n_classes);

PatchDataset build_patch_dataset(const std::vector<Bag>& bags,
                                 const std::vector<LabeledInstance>& cleaned_high,
                                 const std::vector<MinedNegative>& final_negatives,
                                 int n_classes);

}  // namespace hcft

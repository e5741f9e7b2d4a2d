#include "hcft/refine.hpp"

#include <algorithm>
#include <limits>

#include "hcft/errors.hpp"

namespace hcft {

int hard_negative_label(int mimicked_class, int n_classes) {
    if (mimicked_class < 1 || mimicked_class >= n_classes)
        throw DataError("hard_negative_label: mimicked class out of range");
    return n_classes + (mimicked_class - 1);
}

std::vector<MinedNegative> mine_potential_negatives(const std::vector<Bag>& bags,
                                                    const std::vector<LabeledInstance>& low,
                                                    const ClassClusterSets& sets,
                                                    const ClusterModel& clusters, int n_classes) {
    std::vector<MinedNegative> out;
    for (const auto& li : low) {
        const Bag& bag = bags[li.ref.bag_index];
        const auto& h = bag.instances[li.ref.patch_index].embedding;
        int nearest = -1;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (int a = 0; a < n_classes; ++a) {
            if (sets.clusters_for_class[a].empty()) continue;
            double d = distance_to_class(h, sets.clusters_for_class[a], clusters);
            if (d < nearest_d) {
                nearest_d = d;
                nearest = a;
            }
        }
        if (nearest > bag.label) out.push_back({li.ref, nearest});
    }
    return out;
}

namespace {

// Cluster ownership: the max-fraction class, ties to the lowest class index.
std::vector<int> cluster_classes(const ClassClusterSets& sets, int n_classes) {
    std::vector<int> owner(sets.fractions.rows, 0);
    for (std::size_t c = 0; c < sets.fractions.rows; ++c) {
        int best = 0;
        for (int a = 1; a < n_classes; ++a)
            if (sets.fractions(c, a) > sets.fractions(c, best)) best = a;
        owner[c] = best;
    }
    return owner;
}

}  // namespace

RefinementResult refine_labels(const std::vector<Bag>& bags,
                               const std::vector<LabeledInstance>& high,
                               const std::vector<MinedNegative>& mined, int n_classes,
                               std::size_t n_clusters, double theta, std::uint64_t seed) {
    if (high.empty() && mined.empty()) throw DataError("refine_labels: nothing to cluster");
    std::size_t total = high.size() + mined.size();
    std::size_t d = 0;
    {
        const auto& ref = high.empty() ? mined[0].ref : high[0].ref;
        d = bags[ref.bag_index].instances[ref.patch_index].embedding.size();
    }
    Matrix points(total, d);
    std::vector<int> labels(total);
    auto put = [&](std::size_t row, const InstanceRef& ref, int label) {
        const auto& emb = bags[ref.bag_index].instances[ref.patch_index].embedding;
        std::copy(emb.begin(), emb.end(), points.data.begin() + row * d);
        labels[row] = label;
    };
    for (std::size_t i = 0; i < high.size(); ++i) put(i, high[i].ref, high[i].label);
    // Mined negatives are counted under the positive class they mimic so that
    // hard-negative-rich clusters surface as that class; the relabel to the
    // extra hard-negative classes happens at dataset assembly.
    for (std::size_t i = 0; i < mined.size(); ++i)
        put(high.size() + i, mined[i].ref, mined[i].mimicked_class);

    RefinementResult res;
    std::size_t k = std::min(n_clusters, total);
    res.clusters = kmeans(points, k, seed);
    res.sets = classify_all_classes(res.clusters, labels, n_classes, theta);
    std::vector<int> owner = cluster_classes(res.sets, n_classes);
    res.degenerate =
        std::all_of(owner.begin(), owner.end(), [&owner](int o) { return o == owner[0]; });

    for (std::size_t i = 0; i < high.size(); ++i) {
        int cls = owner[res.clusters.assignment[i]];
        int y = bags[high[i].ref.bag_index].label;
        if (cls == y) {
            res.cleaned_high.push_back(high[i]);
        } else if (cls > y) {
            res.middle_high.push_back({high[i].ref, cls});
        }
        // cls < y: removed by cleaning, contributes nowhere
    }
    for (std::size_t i = 0; i < mined.size(); ++i) {
        int cls = owner[res.clusters.assignment[high.size() + i]];
        int y = bags[mined[i].ref.bag_index].label;
        if (cls > y) res.middle_low.push_back({mined[i].ref, cls});
    }
    res.final_negatives = res.middle_high;
    res.final_negatives.insert(res.final_negatives.end(), res.middle_low.begin(),
                               res.middle_low.end());
    std::sort(res.final_negatives.begin(), res.final_negatives.end(),
              [](const MinedNegative& a, const MinedNegative& b) { return a.ref < b.ref; });
    return res;
}

PatchDataset build_patch_dataset(const std::vector<Bag>& bags,
                                 const std::vector<LabeledInstance>& cleaned_high,
                                 const std::vector<MinedNegative>& final_negatives,
                                 int n_classes) {
    PatchDataset ds;
    ds.n_classes = 2 * n_classes - 1;
    ds.histogram.assign(static_cast<std::size_t>(ds.n_classes), 0);
    for (const auto& li : cleaned_high) {
        int y = bags[li.ref.bag_index].label;
        if (li.label != y) throw DataError("build_patch_dataset: positive label != bag label");
        ds.entries.push_back({li.ref, li.label});
    }
    for (const auto& mn : final_negatives) {
        if (mn.mimicked_class <= bags[mn.ref.bag_index].label)
            throw DataError("build_patch_dataset: hard negative does not outrank its bag label");
        ds.entries.push_back({mn.ref, hard_negative_label(mn.mimicked_class, n_classes)});
    }
    std::sort(ds.entries.begin(), ds.entries.end(),
              [](const PatchEntry& a, const PatchEntry& b) { return a.ref < b.ref; });
    for (std::size_t i = 1; i < ds.entries.size(); ++i)
        if (ds.entries[i].ref == ds.entries[i - 1].ref)
            throw DataError("build_patch_dataset: duplicate instance reference");
    for (const auto& e : ds.entries) {
        if (e.label < 0 || e.label >= ds.n_classes)
            throw DataError("build_patch_dataset: label out of range");
        ++ds.histogram[static_cast<std::size_t>(e.label)];
    }
    for (std::size_t c = 0; c < ds.histogram.size(); ++c)
        if (ds.histogram[c] == 0) ds.has_empty_class = true;
    return ds;
}

}  // namespace hcft

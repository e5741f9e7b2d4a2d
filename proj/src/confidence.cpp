#include "hcft/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "hcft/errors.hpp"

namespace hcft {

std::vector<double> confidence_scores(const MILModel& model, const Bag& bag) {
    BagForward f = bag_forward(model, bag);
    std::vector<double> s(bag.instances.size());
    for (std::size_t k = 0; k < s.size(); ++k)
        s[k] = f.attention[k] * f.instance_probs(k, static_cast<std::size_t>(bag.label));
    return s;
}

double kt_raw(int t, int bag_size, int k0) {
    double grow = static_cast<double>(t + 1) * static_cast<double>(k0) *
                  std::log10(static_cast<double>(bag_size));
    return std::min(grow, static_cast<double>(bag_size) / 3.0);
}

int kt_schedule(int t, int bag_size, int k0) {
    if (t < 0 || bag_size < 1 || k0 < 1) throw DataError("kt_schedule: invalid arguments");
    int k = static_cast<int>(std::lround(kt_raw(t, bag_size, k0)));
    return std::clamp(k, 1, bag_size);
}

PseudoInit init_pseudo_labels(const MILModel& model, const std::vector<Bag>& bags,
                              const std::vector<std::size_t>& train_bag_indices, int t, int k0) {
    PseudoInit out;
    for (std::size_t bi : train_bag_indices) {
        const Bag& bag = bags[bi];
        BagConfidence conf;
        conf.bag_index = bi;
        conf.scores = confidence_scores(model, bag);
        conf.order.resize(conf.scores.size());
        for (std::size_t k = 0; k < conf.order.size(); ++k) conf.order[k] = k;
        std::stable_sort(conf.order.begin(), conf.order.end(),
                         [&conf](std::size_t a, std::size_t b) {
                             if (conf.scores[a] != conf.scores[b])
                                 return conf.scores[a] > conf.scores[b];
                             return a < b;  // tie-break on lower patch index
                         });
        conf.kt_used = kt_schedule(t, static_cast<int>(bag.instances.size()), k0);
        for (std::size_t rank = 0; rank < conf.order.size(); ++rank) {
            InstanceRef ref{bi, conf.order[rank]};
            if (rank < static_cast<std::size_t>(conf.kt_used))
                out.sets.high.push_back({ref, bag.label});
            else
                out.sets.low.push_back({ref, -1});
        }
        out.table.push_back(std::move(conf));
    }
    std::sort(out.sets.high.begin(), out.sets.high.end(),
              [](const LabeledInstance& a, const LabeledInstance& b) { return a.ref < b.ref; });
    std::sort(out.sets.low.begin(), out.sets.low.end(),
              [](const LabeledInstance& a, const LabeledInstance& b) { return a.ref < b.ref; });
    return out;
}

}  // namespace hcft

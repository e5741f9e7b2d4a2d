#pragma once

#include <cstdint>
#include <vector>

#include "hcft/confidence.hpp"
#include "hcft/mat.hpp"

namespace hcft {

struct ClusterModel {
    Matrix centroids;                    // C x D
    std::vector<std::size_t> assignment; // point -> cluster index
    double inertia = 0.0;                // sum of squared distances
    std::vector<double> inertia_trace;   // per Lloyd iteration, nonincreasing
};

// Lloyd's algorithm with k-means++ seeding; `restarts` independent runs keep
// the best inertia. Empty clusters are re-seeded to the farthest point.
ClusterModel kmeans(const Matrix& points, std::size_t n_clusters, std::uint64_t seed,
                    int restarts = 10, int max_iters = 300);

// Per-class cluster ownership per the majority-fraction rule: p_j is the
// fraction of cluster j's labeled members carrying class a. If max p_j <= theta
// the argmax cluster alone is taken, otherwise all clusters with p_j > theta.
struct ClassClusterSets {
    std::vector<std::vector<std::size_t>> clusters_for_class;  // class -> cluster ids (L_a)
    Matrix fractions;  // C x n_classes, p_j per class
};

std::vector<std::size_t> classify_clusters(const ClusterModel& clusters,
                                           const std::vector<int>& labels, int class_a,
                                           double theta);

ClassClusterSets classify_all_classes(const ClusterModel& clusters,
                                      const std::vector<int>& labels, int n_classes,
                                      double theta);

// min over j in L_a of || h - centroid_j ||_2
double distance_to_class(const std::vector<double>& h, const std::vector<std::size_t>& class_set,
                         const ClusterModel& clusters);

}  // namespace hcft

#include "hcft/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hcft/errors.hpp"

namespace hcft {

namespace {

double sq_dist(const Matrix& pts, std::size_t row, const Matrix& centers, std::size_t c) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.cols; ++i) {
        double d = pts(row, i) - centers(c, i);
        s += d * d;
    }
    return s;
}

Matrix kmeanspp_seed(const Matrix& pts, std::size_t k, Rng& rng) {
    Matrix centers(k, pts.cols);
    std::size_t first = static_cast<std::size_t>(rng.below(pts.rows));
    for (std::size_t i = 0; i < pts.cols; ++i) centers(0, i) = pts(first, i);
    std::vector<double> d2(pts.rows);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t r = 0; r < pts.rows; ++r) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < c; ++j) best = std::min(best, sq_dist(pts, r, centers, j));
            d2[r] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t r = 0; r < pts.rows; ++r) {
                acc += d2[r];
                if (acc >= target) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.below(pts.rows));
        }
        for (std::size_t i = 0; i < pts.cols; ++i) centers(c, i) = pts(pick, i);
    }
    return centers;
}

ClusterModel lloyd(const Matrix& pts, Matrix centers, int max_iters) {
    std::size_t k = centers.rows;
    ClusterModel model;
    model.assignment.assign(pts.rows, 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double iter_inertia = 0.0;
        for (std::size_t r = 0; r < pts.rows; ++r) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double d = sq_dist(pts, r, centers, c);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            iter_inertia += best_d;
            if (model.assignment[r] != best) {
                model.assignment[r] = best;
                changed = true;
            }
        }
        model.inertia_trace.push_back(iter_inertia);
        // recompute centroids with fixed-order summation
        Matrix sums(k, pts.cols);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t r = 0; r < pts.rows; ++r) {
            std::size_t c = model.assignment[r];
            ++counts[c];
            for (std::size_t i = 0; i < pts.cols; ++i) sums(c, i) += pts(r, i);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // re-seed to the point farthest from its centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t r = 0; r < pts.rows; ++r) {
                    double d = sq_dist(pts, r, centers, model.assignment[r]);
                    if (d > far_d) {
                        far_d = d;
                        far = r;
                    }
                }
                for (std::size_t i = 0; i < pts.cols; ++i) centers(c, i) = pts(far, i);
                changed = true;
            } else {
                for (std::size_t i = 0; i < pts.cols; ++i)
                    centers(c, i) = sums(c, i) / static_cast<double>(counts[c]);
            }
        }
        if (!changed && iter > 0) break;
    }
    // final assignment + inertia against the final centroids
    model.inertia = 0.0;
    for (std::size_t r = 0; r < pts.rows; ++r) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            double d = sq_dist(pts, r, centers, c);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        model.assignment[r] = best;
        model.inertia += best_d;
    }
    model.centroids = std::move(centers);
    return model;
}

}  // namespace

ClusterModel kmeans(const Matrix& points, std::size_t n_clusters, std::uint64_t seed,
                    int restarts, int max_iters) {
    if (n_clusters < 1 || points.rows < n_clusters)
        throw DimensionError("kmeans: need at least " + std::to_string(n_clusters) +
                             " points, got " + std::to_string(points.rows));
    Rng base(seed);
    ClusterModel best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng = base.split(static_cast<std::uint64_t>(r));
        ClusterModel m = lloyd(points, kmeanspp_seed(points, n_clusters, rng), max_iters);
        if (m.inertia < best.inertia) best = std::move(m);
    }
    return best;
}

std::vector<std::size_t> classify_clusters(const ClusterModel& clusters,
                                           const std::vector<int>& labels, int class_a,
                                           double theta) {
    if (theta <= 0.0 || theta > 1.0) throw DataError("classify_clusters: theta must be in (0,1]");
    if (labels.size() != clusters.assignment.size())
        throw DimensionError("classify_clusters: label count mismatch");
    std::size_t k = clusters.centroids.rows;
    std::vector<double> frac(k, 0.0);
    std::vector<std::size_t> labeled(k, 0), matching(k, 0);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0) continue;  // unlabeled members do not count
        std::size_t c = clusters.assignment[r];
        ++labeled[c];
        if (labels[r] == class_a) ++matching[c];
    }
    for (std::size_t c = 0; c < k; ++c)
        frac[c] = labeled[c] > 0 ? static_cast<double>(matching[c]) / labeled[c] : 0.0;

    double max_frac = *std::max_element(frac.begin(), frac.end());
    std::vector<std::size_t> out;
    if (max_frac <= theta) {
        // fallback: the single argmax cluster, ties to the lowest index
        std::size_t arg = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (frac[c] > frac[arg]) arg = c;
        out.push_back(arg);
    } else {
        for (std::size_t c = 0; c < k; ++c)
            if (frac[c] > theta) out.push_back(c);
    }
    return out;
}

ClassClusterSets classify_all_classes(const ClusterModel& clusters,
                                      const std::vector<int>& labels, int n_classes,
                                      double theta) {
    ClassClusterSets out;
    out.fractions = Matrix(clusters.centroids.rows, static_cast<std::size_t>(n_classes));
    std::vector<std::size_t> labeled(clusters.centroids.rows, 0);
    Matrix matching(clusters.centroids.rows, static_cast<std::size_t>(n_classes));
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0) continue;
        std::size_t c = clusters.assignment[r];
        ++labeled[c];
        matching(c, static_cast<std::size_t>(labels[r])) += 1.0;
    }
    for (std::size_t c = 0; c < clusters.centroids.rows; ++c)
        for (int a = 0; a < n_classes; ++a)
            out.fractions(c, a) = labeled[c] > 0 ? matching(c, a) / labeled[c] : 0.0;
    for (int a = 0; a < n_classes; ++a)
        out.clusters_for_class.push_back(classify_clusters(clusters, labels, a, theta));
    return out;
}

double distance_to_class(const std::vector<double>& h, const std::vector<std::size_t>& class_set,
                         const ClusterModel& clusters) {
    if (class_set.empty()) throw DataError("distance_to_class: empty class cluster set");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : class_set) {
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            double d = h[i] - clusters.centroids(c, i);
            s += d * d;
        }
        best = std::min(best, s);
    }
    return std::sqrt(best);
}

}  // namespace hcft

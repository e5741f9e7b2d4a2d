#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hcft/cluster.hpp"
#include "hcft/errors.hpp"

using namespace hcft;

namespace {

double sq_dist(const Matrix& pts, std::size_t row, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t d = 0; d < pts.cols; ++d) {
        double diff = pts(row, d) - c[d];
        s += diff * diff;
    }
    return s;
}

// Exhaustive optimum over all 2-partitions of a small point set: the best
// achievable k=2 inertia, where each side's center is its mean.
double best_two_partition_inertia(const Matrix& pts) {
    std::size_t m = pts.rows, d = pts.cols;
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << m); ++mask) {
        std::vector<double> mean0(d, 0.0), mean1(d, 0.0);
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t r = 0; r < m; ++r) {
            auto& mean = (mask >> r) & 1u ? mean1 : mean0;
            ((mask >> r) & 1u ? n1 : n0) += 1;
            for (std::size_t c = 0; c < d; ++c) mean[c] += pts(r, c);
        }
        for (std::size_t c = 0; c < d; ++c) {
            mean0[c] /= static_cast<double>(n0);
            mean1[c] /= static_cast<double>(n1);
        }
        double inertia = 0.0;
        for (std::size_t r = 0; r < m; ++r)
            inertia += sq_dist(pts, r, (mask >> r) & 1u ? mean1 : mean0);
        best = std::min(best, inertia);
    }
    return best;
}

}  // namespace

TEST_CASE("single cluster centroid is the mean, inertia the scatter") {
    Matrix pts(4, 2);
    pts.data = {0, 0, 2, 0, 0, 2, 2, 2};
    ClusterModel cm = kmeans(pts, 1, 1);
    CHECK(cm.centroids(0, 0) == doctest::Approx(1.0));
    CHECK(cm.centroids(0, 1) == doctest::Approx(1.0));
    CHECK(cm.inertia == doctest::Approx(8.0));
}

TEST_CASE("two well-separated blobs are recovered exactly") {
    Rng rng(2);
    Matrix pts(40, 3);
    for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            pts(r, c) = 0.1 * rng.normal() + (r < 20 ? 0.0 : 50.0);
    ClusterModel cm = kmeans(pts, 2, 3);
    for (std::size_t r = 1; r < 20; ++r) CHECK(cm.assignment[r] == cm.assignment[0]);
    for (std::size_t r = 21; r < 40; ++r) CHECK(cm.assignment[r] == cm.assignment[20]);
    CHECK(cm.assignment[0] != cm.assignment[20]);
}

TEST_CASE("restarted kmeans hits the exhaustive 2-partition optimum on tiny sets") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix pts = Matrix::randn(6, 2, 1.0, rng);
        ClusterModel cm = kmeans(pts, 2, 1000 + trial, 50);
        double want = best_two_partition_inertia(pts);
        CHECK(cm.inertia == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("every point sits with its nearest centroid and inertia matches") {
    Rng rng(5);
    Matrix pts = Matrix::randn(60, 4, 2.0, rng);
    ClusterModel cm = kmeans(pts, 4, 6);
    double total = 0.0;
    for (std::size_t r = 0; r < pts.rows; ++r) {
        double own = sq_dist(pts, r, {cm.centroids.data.begin() + cm.assignment[r] * 4,
                                      cm.centroids.data.begin() + (cm.assignment[r] + 1) * 4});
        for (std::size_t j = 0; j < 4; ++j) {
            std::vector<double> cj(cm.centroids.data.begin() + j * 4,
                                   cm.centroids.data.begin() + (j + 1) * 4);
            CHECK(own <= sq_dist(pts, r, cj) + 1e-9);
        }
        total += own;
    }
    CHECK(cm.inertia == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("inertia is nonincreasing across Lloyd iterations") {
    Rng rng(7);
    Matrix pts = Matrix::randn(80, 3, 1.5, rng);
    ClusterModel cm = kmeans(pts, 5, 8, 1);
    REQUIRE(!cm.inertia_trace.empty());
    for (std::size_t i = 1; i < cm.inertia_trace.size(); ++i)
        CHECK(cm.inertia_trace[i] <= cm.inertia_trace[i - 1] + 1e-9);
}

TEST_CASE("kmeans is deterministic per seed") {
    Rng rng(9);
    Matrix pts = Matrix::randn(30, 3, 1.0, rng);
    ClusterModel a = kmeans(pts, 3, 77);
    ClusterModel b = kmeans(pts, 3, 77);
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids.data == b.centroids.data);
}

TEST_CASE("more clusters than points is rejected") {
    Matrix pts(2, 2);
    pts.data = {0, 0, 1, 1};
    CHECK_THROWS_AS(kmeans(pts, 3, 1), DimensionError);
}

TEST_CASE("cluster classification: strong clusters above theta are all taken") {
    // 3 clusters, fixed assignment, labels chosen so class-1 fractions are
    // {0.75, 0.6, 0.2}; theta = 0.5 should select clusters 0 and 1.
    ClusterModel cm;
    cm.centroids = Matrix(3, 1);
    cm.assignment = {0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
    std::vector<int> labels = {1, 1, 1, 0, 1, 1, 1, 0, 0, 1, 0, 0, 0, 0};
    auto sel = classify_clusters(cm, labels, 1, 0.5);
    CHECK(sel == std::vector<std::size_t>{0, 1});
}

TEST_CASE("cluster classification: weak maximum falls back to the argmax cluster") {
    ClusterModel cm;
    cm.centroids = Matrix(2, 1);
    cm.assignment = {0, 0, 0, 0, 1, 1, 1, 1};
    // fractions for class 1: {0.25, 0.5}; max <= theta=0.5 -> argmax only
    std::vector<int> labels = {1, 0, 0, 0, 1, 1, 0, 0};
    auto sel = classify_clusters(cm, labels, 1, 0.5);
    CHECK(sel == std::vector<std::size_t>{1});
}

TEST_CASE("cluster classification ties resolve to the lowest cluster index") {
    ClusterModel cm;
    cm.centroids = Matrix(2, 1);
    cm.assignment = {0, 0, 1, 1};
    std::vector<int> labels = {1, 0, 1, 0};  // both fractions 0.5
    auto sel = classify_clusters(cm, labels, 1, 0.5);
    CHECK(sel == std::vector<std::size_t>{0});
}

TEST_CASE("unlabeled members are excluded from the fractions") {
    ClusterModel cm;
    cm.centroids = Matrix(2, 1);
    cm.assignment = {0, 0, 0, 1, 1};
    // cluster 0: one labeled member of class 1 among two labeled -> 0.5
    // cluster 1: fully labeled class 1 -> 1.0
    std::vector<int> labels = {1, 0, -1, 1, 1};
    auto all = classify_all_classes(cm, labels, 2, 0.5);
    CHECK(all.fractions(0, 1) == doctest::Approx(0.5));
    CHECK(all.fractions(1, 1) == doctest::Approx(1.0));
    CHECK(all.clusters_for_class[1] == std::vector<std::size_t>{1});
}

TEST_CASE("distance to a class set is the minimum over member centroids") {
    ClusterModel cm;
    cm.centroids = Matrix(3, 2);
    cm.centroids.data = {0, 0, 3, 4, 10, 0};
    std::vector<double> h = {0, 0};
    CHECK(distance_to_class(h, {1, 2}, cm) == doctest::Approx(5.0));
    CHECK(distance_to_class(h, {0, 1, 2}, cm) == doctest::Approx(0.0));
    CHECK_THROWS(distance_to_class(h, {}, cm));
}

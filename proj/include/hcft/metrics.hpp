#pragma once

#include <string>
#include <vector>

#include "hcft/mat.hpp"

namespace hcft {

struct ClassificationMetrics {
    double acc;
    double macro_f1;
};

ClassificationMetrics classification_metrics(const std::vector<int>& pred,
                                             const std::vector<int>& truth, int n_classes);

// One-versus-rest AUC, rank-based with half credit for ties, macro-averaged
// over classes that have both positives and negatives. NaN when no class
// qualifies.
double auc_ovr(const Matrix& scores, const std::vector<int>& truth, int n_classes);

// Rank-based binary AUC of `score` against `positive` (Mann-Whitney).
double auc_binary(const std::vector<double>& score, const std::vector<char>& positive);

struct FrocPoint {
    double fpi;          // average false positives per image (slide)
    double sensitivity;  // TP / all tumor instances
};

struct FrocCurve {
    std::vector<FrocPoint> points;  // sorted by fpi, sensitivity nondecreasing
};

FrocCurve froc(const std::vector<double>& scores, const std::vector<char>& truth,
               const std::vector<std::string>& slide_ids);

// Mean sensitivity at fpi in {0.125, 0.25, 0.5, 1, 2, 4, 8}, read as a step
// function (max sensitivity among points at or below the target; targets
// above the curve use the final sensitivity).
double cpm(const FrocCurve& curve);

}  // namespace hcft

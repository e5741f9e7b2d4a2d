#include "hcft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "hcft/errors.hpp"

namespace hcft {

ClassificationMetrics classification_metrics(const std::vector<int>& pred,
                                             const std::vector<int>& truth, int n_classes) {
    if (pred.size() != truth.size())
        throw DimensionError("classification_metrics: length mismatch");
    std::size_t correct = 0;
    std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i]) {
            ++correct;
            ++tp[truth[i]];
        } else {
            ++fp[pred[i]];
            ++fn[truth[i]];
        }
    }
    double f1_sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        f1_sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;  // empty class counts as 0
    }
    ClassificationMetrics m;
    m.acc = pred.empty() ? 0.0 : static_cast<double>(correct) / pred.size();
    // Binary case reports the positive-class F1, multi-class the macro average.
    if (n_classes == 2) {
        double denom = static_cast<double>(2 * tp[1] + fp[1] + fn[1]);
        m.macro_f1 = denom > 0.0 ? 2.0 * tp[1] / denom : 0.0;
    } else {
        m.macro_f1 = f1_sum / n_classes;
    }
    return m;
}

double auc_binary(const std::vector<double>& score, const std::vector<char>& positive) {
    if (score.size() != positive.size()) throw DimensionError("auc_binary: length mismatch");
    std::vector<std::size_t> order(score.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&score](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    // average ranks over tie groups
    std::vector<double> rank(score.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && score[order[j + 1]] == score[order[i]]) ++j;
        double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < score.size(); ++k) {
        if (positive[k]) {
            pos_rank_sum += rank[k];
            ++n_pos;
        }
    }
    std::size_t n_neg = score.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
    double u = pos_rank_sum - 0.5 * n_pos * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auc_ovr(const Matrix& scores, const std::vector<int>& truth, int n_classes) {
    if (scores.rows != truth.size()) throw DimensionError("auc_ovr: length mismatch");
    for (std::size_t r = 0; r < scores.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < scores.cols; ++c) sum += scores(r, c);
        if (std::abs(sum - 1.0) > 1e-6)
            throw DataError("auc_ovr: probability row does not sum to 1");
    }
    double total = 0.0;
    int counted = 0;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<double> s(scores.rows);
        std::vector<char> pos(scores.rows);
        for (std::size_t r = 0; r < scores.rows; ++r) {
            s[r] = scores(r, static_cast<std::size_t>(c));
            pos[r] = truth[r] == c ? 1 : 0;
        }
        double a = auc_binary(s, pos);
        if (!std::isnan(a)) {
            total += a;
            ++counted;
        }
    }
    return counted > 0 ? total / counted : std::numeric_limits<double>::quiet_NaN();
}

FrocCurve froc(const std::vector<double>& scores, const std::vector<char>& truth,
               const std::vector<std::string>& slide_ids) {
    if (scores.size() != truth.size() || scores.size() != slide_ids.size())
        throw DimensionError("froc: length mismatch");
    std::size_t n_tumor = 0;
    for (char t : truth) n_tumor += t ? 1 : 0;
    if (n_tumor == 0) throw DataError("froc: no tumor instances, sensitivity undefined");
    std::set<std::string> slides(slide_ids.begin(), slide_ids.end());
    double n_slides = static_cast<double>(slides.size());

    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    FrocCurve curve;
    for (double th : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) {
                if (truth[i]) ++tp;
                else ++fp;
            }
        }
        curve.points.push_back({static_cast<double>(fp) / n_slides,
                                static_cast<double>(tp) / static_cast<double>(n_tumor)});
    }
    std::sort(curve.points.begin(), curve.points.end(),
              [](const FrocPoint& a, const FrocPoint& b) {
                  return a.fpi != b.fpi ? a.fpi < b.fpi : a.sensitivity < b.sensitivity;
              });
    return curve;
}

double cpm(const FrocCurve& curve) {
    if (curve.points.empty()) throw DataError("cpm: empty curve");
    const double targets[7] = {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    double max_fpi = curve.points.back().fpi;
    double final_sens = curve.points.back().sensitivity;
    double total = 0.0;
    for (double target : targets) {
        if (target >= max_fpi) {
            total += final_sens;
            continue;
        }
        double best = 0.0;
        for (const auto& p : curve.points)
            if (p.fpi <= target) best = std::max(best, p.sensitivity);
        total += best;
    }
    return total / 7.0;
}

}  // namespace hcft

#pragma once

// Classifier and annotation-quality evaluation: precision/recall with
// step-summed average precision, judger/drawer agreement, and
// best-of-many-truths overlap.

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "segdiv/ambiguity.hpp"
#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/plan.hpp"

namespace segdiv {

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
    double threshold = 0.0; // score >= threshold counts as positive
};

/// One point per distinct score threshold, highest threshold first.
struct PrCurve {
    std::vector<PrPoint> points;
    double average_precision = 0.0;
};

/// Ranks by descending score; tied scores form a single threshold so the
/// result does not depend on input order. AP = sum_k (R_k - R_{k-1}) * P_k.
inline PrCurve pr_curve(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) {
        throw error(errc::id_mismatch, "score and label counts differ");
    }
    const auto total_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    if (total_pos == 0 || total_pos == positive.size()) {
        throw error(errc::single_class, "precision/recall needs both classes");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    PrCurve curve;
    std::size_t tp = 0;
    std::size_t seen = 0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += positive[order[j]] ? 1 : 0;
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        curve.average_precision += (recall - prev_recall) * precision;
        curve.points.push_back({recall, precision, scores[order[i]]});
        prev_recall = recall;
        i = j;
    }
    return curve;
}

inline double average_precision(std::span<const double> scores, const std::vector<bool>& positive) {
    return pr_curve(scores, positive).average_precision;
}

/// Positive class is `unambiguous`: higher unambiguity scores should rank
/// unambiguous images first.
inline PrCurve pr_curve(const std::map<ImageId, double>& scores, const std::map<ImageId, Ambiguity>& labels) {
    if (scores.size() != labels.size()) {
        throw error(errc::id_mismatch, "scores and labels cover different images");
    }
    std::vector<double> s;
    std::vector<bool> pos;
    for (const auto& [id, score] : scores) {
        auto it = labels.find(id);
        if (it == labels.end()) {
            throw error(errc::id_mismatch, "no label for " + id);
        }
        s.push_back(score);
        pos.push_back(it->second == Ambiguity::unambiguous);
    }
    return pr_curve(s, pos);
}

/// Joint fractions over (judger, drawer) label pairs.
struct AgreementMatrix {
    double judger_u_drawer_u = 0.0;
    double judger_u_drawer_a = 0.0;
    double judger_a_drawer_u = 0.0;
    double judger_a_drawer_a = 0.0;
    double overall_agreement = 0.0;
    std::size_t images = 0;
};

inline AgreementMatrix agreement_matrix(const std::map<ImageId, Ambiguity>& judger,
                                        const std::map<ImageId, Ambiguity>& drawer) {
    if (judger.size() != drawer.size()) {
        throw error(errc::id_mismatch, "judger and drawer labels cover different images");
    }
    if (judger.empty()) {
        throw error(errc::empty_input, "agreement over zero images");
    }
    std::size_t uu = 0, ua = 0, au = 0, aa = 0;
    for (const auto& [id, j] : judger) {
        auto it = drawer.find(id);
        if (it == drawer.end()) {
            throw error(errc::id_mismatch, "no drawer label for " + id);
        }
        const bool ju = j == Ambiguity::unambiguous;
        const bool du = it->second == Ambiguity::unambiguous;
        (ju ? (du ? uu : ua) : (du ? au : aa)) += 1;
    }
    const auto n = static_cast<double>(judger.size());
    AgreementMatrix m;
    m.images = judger.size();
    m.judger_u_drawer_u = static_cast<double>(uu) / n;
    m.judger_u_drawer_a = static_cast<double>(ua) / n;
    m.judger_a_drawer_u = static_cast<double>(au) / n;
    m.judger_a_drawer_a = static_cast<double>(aa) / n;
    m.overall_agreement = static_cast<double>(uu + aa) / n;
    return m;
}

/// Scores a prediction against every valid ground truth and keeps the best.
inline double best_overlap_eval(const PixelMask& predicted, std::span<const PixelMask> ground_truths) {
    if (ground_truths.empty()) {
        throw error(errc::empty_ground_truth_set, "no ground truths supplied");
    }
    double best = 0.0;
    for (const auto& gt : ground_truths) {
        best = std::max(best, iou(predicted, gt));
    }
    return best;
}

} // namespace segdiv

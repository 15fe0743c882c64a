#pragma once

// Converters from external saliency outputs (detection windows, subitizing
// distributions) to unambiguity scores and redundancy priorities.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/plan.hpp"

namespace segdiv {

struct DetectionWindow {
    BoundingBox box;
    double confidence = 0.0;
};

inline constexpr double feng_nms_threshold = 0.1;

/// Greedy non-maximum suppression; output is in descending confidence.
/// Equal confidences keep their input order.
inline std::vector<DetectionWindow> nms(std::span<const DetectionWindow> windows,
                                        double iou_threshold = feng_nms_threshold) {
    std::vector<DetectionWindow> sorted(windows.begin(), windows.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const DetectionWindow& a, const DetectionWindow& b) { return a.confidence > b.confidence; });
    std::vector<DetectionWindow> kept;
    for (const auto& w : sorted) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const DetectionWindow& k) {
            return box_iou(k.box, w.box) > iou_threshold;
        });
        if (!suppressed) {
            kept.push_back(w);
        }
    }
    return kept;
}

/// After NMS at 0.1: a lone window scores its confidence, otherwise the gap
/// between the best and second-best confidences.
inline double feng_unambiguity(std::span<const DetectionWindow> windows) {
    if (windows.empty()) {
        throw error(errc::no_windows, "no detection windows");
    }
    for (const auto& w : windows) {
        if (!std::isfinite(w.confidence)) {
            throw error(errc::non_finite_score, "detection confidence is not finite");
        }
    }
    const auto kept = nms(windows, feng_nms_threshold);
    if (kept.size() == 1) {
        return kept.front().confidence;
    }
    return kept[0].confidence - kept[1].confidence;
}

/// Probabilities for 0, 1, 2, 3 and 4+ salient objects.
struct SubitizingDistribution {
    std::array<double, 5> p{};
};

inline void validate(const SubitizingDistribution& d) {
    double sum = 0.0;
    for (double v : d.p) {
        if (!std::isfinite(v) || v < 0.0) {
            throw error(errc::invalid_distribution, "probabilities must be finite and non-negative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw error(errc::invalid_distribution, "probabilities sum to " + std::to_string(sum));
    }
}

/// Redundancy priority from subitizing output, highest priority first.
///
/// Each image is grouped by its most probable count (lowest count wins
/// ties). The confidence ranking runs: count-1 images from most to least
/// confident, then counts 2, 3, 4+ and 0, each from least to most confident.
/// Priority is that ranking reversed, so the least confident single-object
/// predictions go last and confident 0-object predictions go first. Equal
/// keys fall back to ascending image id.
inline std::vector<ImageId> sos_priority_order(const std::map<ImageId, SubitizingDistribution>& distributions) {
    struct Key {
        int group;         // position in priority order: 0 (count 0) ... 4 (count 1)
        double confidence; // sorted descending inside groups 0..3, ascending in group 4
        const ImageId* id;
    };
    // Count -> group position after reversal: 0 -> 0, 4+ -> 1, 3 -> 2, 2 -> 3, 1 -> 4.
    constexpr std::array<int, 5> group_of{0, 4, 3, 2, 1};
    std::vector<Key> keys;
    keys.reserve(distributions.size());
    for (const auto& [id, dist] : distributions) {
        validate(dist);
        const auto top = static_cast<std::size_t>(std::max_element(dist.p.begin(), dist.p.end()) - dist.p.begin());
        keys.push_back({group_of[top], dist.p[top], &id});
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        if (a.group != b.group) {
            return a.group < b.group;
        }
        if (a.confidence != b.confidence) {
            return a.group == 4 ? a.confidence < b.confidence : a.confidence > b.confidence;
        }
        return *a.id < *b.id;
    });
    std::vector<ImageId> order;
    order.reserve(keys.size());
    for (const auto& k : keys) {
        order.push_back(*k.id);
    }
    return order;
}

/// Rank-based unambiguity scores consistent with sos_priority_order: the
/// first image in priority order gets the lowest score.
inline std::map<ImageId, double> sos_priority_scores(const std::map<ImageId, SubitizingDistribution>& distributions) {
    std::map<ImageId, double> out;
    const auto order = sos_priority_order(distributions);
    for (std::size_t i = 0; i < order.size(); ++i) {
        out[order[i]] = static_cast<double>(i);
    }
    return out;
}

} // namespace segdiv

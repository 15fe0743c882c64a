#pragma once

// Ambiguity labels from crowd judgements (votes) and from redundant drawings.

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/plan.hpp"

namespace segdiv {

enum class Ambiguity { unambiguous, ambiguous };
enum class LabelSource { judgers, drawers };

inline std::string_view to_string(Ambiguity a) noexcept {
    return a == Ambiguity::unambiguous ? "unambiguous" : "ambiguous";
}
inline std::string_view to_string(LabelSource s) noexcept { return s == LabelSource::judgers ? "judgers" : "drawers"; }

inline Ambiguity parse_ambiguity(std::string_view s) {
    if (s == "unambiguous" || s == "U") {
        return Ambiguity::unambiguous;
    }
    if (s == "ambiguous" || s == "A") {
        return Ambiguity::ambiguous;
    }
    throw error(errc::parse_error, "unknown ambiguity label '" + std::string(s) + "'");
}

/// `same_object` is the worker's "yes, everyone would pick the same object".
struct VoteRecord {
    ImageId image_id;
    std::string worker_id;
    bool same_object = false;
};

struct AmbiguityLabel {
    ImageId image_id;
    Ambiguity label = Ambiguity::unambiguous;
    LabelSource source = LabelSource::judgers;
};

inline constexpr std::size_t votes_per_image = 5;

inline AmbiguityLabel aggregate_votes(std::span<const VoteRecord> votes) {
    if (votes.size() != votes_per_image) {
        throw error(errc::wrong_vote_count, "expected 5 votes, got " + std::to_string(votes.size()));
    }
    std::set<std::string_view> workers;
    std::size_t yes = 0;
    for (const auto& v : votes) {
        if (v.image_id != votes.front().image_id) {
            throw error(errc::id_mismatch, "votes span several images");
        }
        if (!workers.insert(v.worker_id).second) {
            throw error(errc::duplicate_worker, v.worker_id + " voted twice on " + v.image_id);
        }
        yes += v.same_object ? 1 : 0;
    }
    return {votes.front().image_id, 2 * yes > votes.size() ? Ambiguity::unambiguous : Ambiguity::ambiguous,
            LabelSource::judgers};
}

inline constexpr double drawer_agreement_iou = 0.5;

/// Ambiguous when any drawer outlines more than one object or any pair of
/// drawings overlaps by less than 50% IoU.
inline AmbiguityLabel label_from_drawings(const ImageId& id, std::span<const PixelMask> masks) {
    if (masks.size() < 2) {
        throw error(errc::too_few_masks, "need at least two drawings, got " + std::to_string(masks.size()));
    }
    for (const auto& m : masks) {
        require_same_shape(masks.front(), m);
        if (m.empty()) {
            throw error(errc::empty_mask, "empty drawing for " + id);
        }
    }
    AmbiguityLabel out{id, Ambiguity::unambiguous, LabelSource::drawers};
    for (const auto& m : masks) {
        if (connected_components(m).count > 1) {
            out.label = Ambiguity::ambiguous;
            return out;
        }
    }
    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t j = i + 1; j < masks.size(); ++j) {
            if (iou(masks[i], masks[j]) < drawer_agreement_iou) {
                out.label = Ambiguity::ambiguous;
                return out;
            }
        }
    }
    return out;
}

} // namespace segdiv

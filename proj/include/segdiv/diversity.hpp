#pragma once

// Per-annotation and batch-level segmentation diversity.
//
// Region diversity is 1 - F^w (weighted F-measure, beta = 1) against the
// majority reference; boundary diversity is the symmetric mean Chamfer
// distance between boundary pixel sets.

#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "segdiv/distance_transform.hpp"
#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/plan.hpp"

namespace segdiv {

namespace wfm {
inline constexpr int window_radius = 3; // 7x7
inline constexpr double sigma = 5.0;
inline const double alpha = std::log(0.5) / 5.0;
} // namespace wfm

namespace detail {

inline double gaussian_tap(int d) noexcept {
    return std::exp(-static_cast<double>(d * d) / (2.0 * wfm::sigma * wfm::sigma));
}

/// Separable Gaussian smoothing renormalised over the taps that fall inside
/// the image.
inline std::vector<double> smooth_normalized(std::span<const double> field, int width, int height) {
    constexpr int r = wfm::window_radius;
    double taps[2 * r + 1];
    for (int d = -r; d <= r; ++d) {
        taps[d + r] = gaussian_tap(d);
    }
    auto filter = [&](std::span<const double> in) {
        std::vector<double> rows(in.size(), 0.0);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d) {
                    const int xx = x + d;
                    if (xx >= 0 && xx < width) {
                        acc += taps[d + r] * in[static_cast<std::size_t>(y) * width + xx];
                    }
                }
                rows[static_cast<std::size_t>(y) * width + x] = acc;
            }
        }
        std::vector<double> out(in.size(), 0.0);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d) {
                    const int yy = y + d;
                    if (yy >= 0 && yy < height) {
                        acc += taps[d + r] * rows[static_cast<std::size_t>(yy) * width + x];
                    }
                }
                out[static_cast<std::size_t>(y) * width + x] = acc;
            }
        }
        return out;
    };
    auto num = filter(field);
    const std::vector<double> ones(field.size(), 1.0);
    const auto den = filter(ones);
    for (std::size_t i = 0; i < num.size(); ++i) {
        num[i] /= den[i];
    }
    return num;
}

/// Error map with every background pixel replaced by the error of its nearest
/// reference-foreground pixel (smallest squared distance, then smallest
/// row-major index). Only pixels that can reach a foreground pixel through the
/// smoothing window are filled; the rest are never read.
inline std::vector<double> propagate_foreground_error(const PixelMask& reference, std::span<const std::uint8_t> err) {
    const int w = reference.width();
    const int h = reference.height();
    // Anything within Chebyshev distance 3 of the foreground has its nearest
    // foreground pixel within Euclidean 3*sqrt(2) < 4.25, i.e. Chebyshev 4.
    constexpr int search = 4;
    std::vector<double> out(err.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (reference.at(x, y)) {
                out[i] = err[i];
                continue;
            }
            int best_d2 = -1;
            std::size_t best = 0;
            for (int yy = std::max(0, y - search); yy <= std::min(h - 1, y + search); ++yy) {
                for (int xx = std::max(0, x - search); xx <= std::min(w - 1, x + search); ++xx) {
                    if (!reference.at(xx, yy)) {
                        continue;
                    }
                    const int d2 = (xx - x) * (xx - x) + (yy - y) * (yy - y);
                    const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
                    if (best_d2 < 0 || d2 < best_d2 || (d2 == best_d2 && j < best)) {
                        best_d2 = d2;
                        best = j;
                    }
                }
            }
            if (best_d2 >= 0) {
                out[i] = err[best];
            }
        }
    }
    return out;
}

} // namespace detail

/// Weighted F-measure (beta = 1) of a binary candidate against a binary
/// reference. Errors inside the reference are softened by their Gaussian
/// neighbourhood; false positives are weighted up with distance from the
/// reference foreground.
inline double weighted_fmeasure(const PixelMask& candidate, const PixelMask& reference) {
    require_same_shape(candidate, reference);
    if (reference.empty()) {
        throw error(errc::empty_reference, "weighted F-measure needs a non-empty reference");
    }
    const int w = reference.width();
    const int h = reference.height();
    const auto g = reference.bits();
    const auto d = candidate.bits();

    std::vector<std::uint8_t> err(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        err[i] = g[i] ^ d[i];
    }
    const auto smoothed = detail::smooth_normalized(detail::propagate_foreground_error(reference, err), w, h);
    const auto dist2 = squared_distance_transform(reference);

    double tp = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double e = err[i];
        if (g[i]) {
            const double ew = std::min(e, smoothed[i]);
            tp += 1.0 - ew;
            fn += ew;
        } else {
            const double importance = 2.0 - std::exp(wfm::alpha * std::sqrt(dist2[i]));
            fp += e * importance;
        }
    }
    const double precision = (tp + fp) > 0.0 ? tp / (tp + fp) : 0.0;
    const double recall = (tp + fn) > 0.0 ? tp / (tp + fn) : 0.0;
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

/// 1 - F^w. With an empty reference (no strict-majority pixel) the value is 1
/// for a non-empty annotation and 0 for an empty one.
inline double region_diversity(const PixelMask& annotation, const PixelMask& reference) {
    require_same_shape(annotation, reference);
    if (reference.empty()) {
        return annotation.empty() ? 0.0 : 1.0;
    }
    return 1.0 - weighted_fmeasure(annotation, reference);
}

namespace detail {

inline double mean_nearest_distance(std::span<const Pixel> from, const PixelMask& to_set) {
    const auto dist2 = squared_distance_transform(to_set);
    double acc = 0.0;
    for (const auto& p : from) {
        acc += std::sqrt(dist2[static_cast<std::size_t>(p.y) * to_set.width() + p.x]);
    }
    return acc / static_cast<double>(from.size());
}

inline PixelMask pixels_to_mask(std::span<const Pixel> pixels, int w, int h) {
    PixelMask m(w, h);
    for (const auto& p : pixels) {
        m.set(p.x, p.y);
    }
    return m;
}

} // namespace detail

/// Symmetric mean Chamfer distance between the boundary pixel sets, in pixels.
inline double chamfer_distance(const PixelMask& a, const PixelMask& b) {
    require_same_shape(a, b);
    const auto ba = boundary_pixels(a);
    const auto bb = boundary_pixels(b);
    if (ba.empty() || bb.empty()) {
        throw error(errc::empty_mask, "Chamfer distance needs two non-empty masks");
    }
    const auto ma = detail::pixels_to_mask(ba, a.width(), a.height());
    const auto mb = detail::pixels_to_mask(bb, b.width(), b.height());
    return 0.5 * (detail::mean_nearest_distance(ba, mb) + detail::mean_nearest_distance(bb, ma));
}

/// Masks for one image in collection order, plus their majority reference.
class AnnotationSet {
public:
    AnnotationSet(ImageId id, std::vector<PixelMask> masks) : image_id_(std::move(id)), masks_(std::move(masks)) {
        refresh();
    }

    [[nodiscard]] const ImageId& image_id() const noexcept { return image_id_; }
    [[nodiscard]] const std::vector<PixelMask>& masks() const noexcept { return masks_; }
    [[nodiscard]] const PixelMask& reference() const noexcept { return reference_; }
    [[nodiscard]] std::size_t size() const noexcept { return masks_.size(); }

    void add(PixelMask mask) {
        masks_.push_back(std::move(mask));
        refresh();
    }

private:
    void refresh() {
        if (masks_.empty()) {
            throw error(errc::empty_input, "annotation set " + image_id_ + " has no masks");
        }
        reference_ = majority_reference(masks_);
    }

    ImageId image_id_;
    std::vector<PixelMask> masks_;
    PixelMask reference_;
};

/// `boundary` is empty when the annotation or the reference has no
/// foreground; such entries are left out of boundary totals.
struct DiversityScore {
    double region = 0.0;
    std::optional<double> boundary;
};

inline double measure_value(const DiversityScore& s, Measure m) noexcept {
    return m == Measure::region ? s.region : s.boundary.value_or(0.0);
}

inline DiversityScore annotation_diversity(const AnnotationSet& set, std::size_t index) {
    if (index >= set.size()) {
        throw error(errc::index_out_of_range,
                    "annotation " + std::to_string(index) + " of " + std::to_string(set.size()) + " for " +
                        set.image_id());
    }
    const auto& mask = set.masks()[index];
    DiversityScore s;
    s.region = region_diversity(mask, set.reference());
    if (!mask.empty() && !set.reference().empty()) {
        s.boundary = chamfer_distance(mask, set.reference());
    }
    return s;
}

using AnnotationSets = std::map<ImageId, AnnotationSet>;

/// Per-annotation scores for every image, in collection order.
using DiversityTable = std::map<ImageId, std::vector<DiversityScore>>;

inline DiversityTable diversity_table(const AnnotationSets& sets) {
    DiversityTable table;
    for (const auto& [id, set] : sets) {
        auto& row = table[id];
        row.reserve(set.size());
        for (std::size_t i = 0; i < set.size(); ++i) {
            row.push_back(annotation_diversity(set, i));
        }
    }
    return table;
}

struct BatchDiversity {
    DiversityTable per_image;
    double total_region = 0.0;
    double total_boundary = 0.0;

    [[nodiscard]] double total(Measure m) const noexcept {
        return m == Measure::region ? total_region : total_boundary;
    }
};

/// Diversity image `id` contributes under `extra` redundant annotations
/// (0 = first annotation only).
inline double image_contribution(const std::vector<DiversityScore>& scores, std::size_t extra, Measure m) {
    if (scores.size() < 1 + extra) {
        throw error(errc::insufficient_annotations,
                    "need " + std::to_string(1 + extra) + " annotations, have " + std::to_string(scores.size()));
    }
    double acc = 0.0;
    for (std::size_t a = 0; a <= extra; ++a) {
        acc += measure_value(scores[a], m);
    }
    return acc;
}

/// D(I) = sum_k d_k0 + sum_{j in selected} sum_{a=1..extra} d_ja, per measure.
/// Images are summed in id order so the result is independent of the order of
/// `plan.selected`.
inline BatchDiversity batch_total_diversity(const DiversityTable& table, const AllocationPlan& plan) {
    std::unordered_set<ImageId> chosen;
    for (const auto& id : plan.selected) {
        if (!table.contains(id)) {
            throw error(errc::unknown_image, "plan selects unknown image " + id);
        }
        chosen.insert(id);
    }
    BatchDiversity out;
    out.per_image = table;
    for (const auto& [id, scores] : table) {
        const std::size_t extra = chosen.contains(id) ? plan.extra : 0;
        try {
            out.total_region += image_contribution(scores, extra, Measure::region);
            out.total_boundary += image_contribution(scores, extra, Measure::boundary);
        } catch (const error& e) {
            throw error(e.code(), id + ": " + e.what());
        }
    }
    return out;
}

inline BatchDiversity batch_total_diversity(const AnnotationSets& sets, const AllocationPlan& plan) {
    return batch_total_diversity(diversity_table(sets), plan);
}

/// Same sum as batch_total_diversity for a single measure, without copying the
/// table; used on the hot path of curve construction.
inline double captured_diversity(const DiversityTable& table, std::span<const ImageId> selected, std::size_t extra,
                                 Measure m) {
    std::unordered_set<std::string_view> chosen(selected.begin(), selected.end());
    double total = 0.0;
    for (const auto& [id, scores] : table) {
        total += image_contribution(scores, chosen.contains(id) ? extra : 0, m);
    }
    return total;
}

} // namespace segdiv

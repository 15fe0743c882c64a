#pragma once

// Redundancy allocation strategies and budget-vs-diversity curves.

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segdiv/diversity.hpp"
#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/plan.hpp"
#include "segdiv/random.hpp"

namespace segdiv {

/// Receives non-fatal diagnostics (e.g. a clamped budget). Defaults to stderr.
inline std::function<void(std::string_view)>& warning_sink() {
    static std::function<void(std::string_view)> sink = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}

/// Takes the first `budget` images of a priority order, clamping the budget
/// to the batch size.
inline AllocationPlan plan_from_order(std::span<const ImageId> order, std::size_t budget, std::size_t extra,
                                      std::string strategy) {
    if (budget > order.size()) {
        warning_sink()("budget " + std::to_string(budget) + " exceeds batch of " + std::to_string(order.size()) +
                       "; clamped");
        budget = order.size();
    }
    AllocationPlan plan;
    plan.budget = budget;
    plan.extra = extra;
    plan.strategy = std::move(strategy);
    plan.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(budget));
    return plan;
}

/// Most ambiguous (lowest unambiguity score) first; ties by ascending id.
inline std::vector<ImageId> greedy_order(const std::map<ImageId, double>& scores) {
    std::vector<std::pair<double, const ImageId*>> keyed;
    keyed.reserve(scores.size());
    for (const auto& [id, s] : scores) {
        keyed.emplace_back(s, &id);
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : *a.second < *b.second;
    });
    std::vector<ImageId> order;
    order.reserve(keyed.size());
    for (const auto& k : keyed) {
        order.push_back(*k.second);
    }
    return order;
}

inline AllocationPlan greedy_allocate(const std::map<ImageId, double>& scores, std::size_t budget, std::size_t extra) {
    return plan_from_order(greedy_order(scores), budget, extra, "greedy");
}

/// Restricts allocation to `batch`, every member of which must be scored.
inline AllocationPlan greedy_allocate(const std::map<ImageId, double>& scores, std::span<const ImageId> batch,
                                      std::size_t budget, std::size_t extra) {
    std::map<ImageId, double> subset;
    for (const auto& id : batch) {
        auto it = scores.find(id);
        if (it == scores.end()) {
            throw error(errc::missing_score, "no unambiguity score for " + id);
        }
        subset.emplace(id, it->second);
    }
    return greedy_allocate(subset, budget, extra);
}

/// Seeded uniform order over the batch (ids are sorted first so the result
/// does not depend on input order).
inline std::vector<ImageId> random_order(std::span<const ImageId> image_ids, std::uint64_t seed) {
    std::vector<ImageId> ids(image_ids.begin(), image_ids.end());
    std::sort(ids.begin(), ids.end());
    std::vector<ImageId> order;
    order.reserve(ids.size());
    for (std::size_t i : seeded_permutation(ids.size(), seed)) {
        order.push_back(ids[i]);
    }
    return order;
}

inline AllocationPlan random_allocate(std::span<const ImageId> image_ids, std::size_t budget, std::uint64_t seed,
                                      std::size_t extra = 0) {
    return plan_from_order(random_order(image_ids, seed), budget, extra, "status_quo");
}

/// Redundant diversity sum_{a=1..extra} d_ja for one image.
inline double redundant_diversity(const std::vector<DiversityScore>& scores, std::size_t extra, Measure m) {
    if (scores.size() < 1 + extra) {
        throw error(errc::insufficient_annotations,
                    "need " + std::to_string(1 + extra) + " annotations, have " + std::to_string(scores.size()));
    }
    double acc = 0.0;
    for (std::size_t a = 1; a <= extra; ++a) {
        acc += measure_value(scores[a], m);
    }
    return acc;
}

/// Largest true redundant diversity first; ties by ascending id.
inline std::vector<ImageId> perfect_order(const DiversityTable& table, std::size_t extra, Measure m) {
    std::vector<std::pair<double, const ImageId*>> keyed;
    keyed.reserve(table.size());
    for (const auto& [id, scores] : table) {
        try {
            keyed.emplace_back(redundant_diversity(scores, extra, m), &id);
        } catch (const error& e) {
            throw error(e.code(), id + ": " + e.what());
        }
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : *a.second < *b.second;
    });
    std::vector<ImageId> order;
    order.reserve(keyed.size());
    for (const auto& k : keyed) {
        order.push_back(*k.second);
    }
    return order;
}

inline AllocationPlan perfect_allocate(const DiversityTable& table, std::size_t budget, std::size_t extra, Measure m) {
    return plan_from_order(perfect_order(table, extra, m), budget, extra, "perfect");
}

inline AllocationPlan perfect_allocate(const AnnotationSets& sets, std::size_t budget, std::size_t extra, Measure m) {
    return perfect_allocate(diversity_table(sets), budget, extra, m);
}

enum class AgreementMode { bb, seg };

inline std::string_view to_string(AgreementMode m) noexcept { return m == AgreementMode::bb ? "wp_bb" : "wp_seg"; }

struct WpResult {
    std::size_t consumed = 0;
    std::span<const PixelMask> masks; // the consumed prefix of the pool
};

namespace detail {

inline double pair_similarity(const PixelMask& a, const PixelMask& b, AgreementMode mode) {
    if (mode == AgreementMode::seg) {
        return iou(a, b);
    }
    const bool ea = a.empty();
    const bool eb = b.empty();
    if (ea || eb) {
        return ea && eb ? 1.0 : 0.0;
    }
    return box_iou(bounding_box(a), bounding_box(b));
}

} // namespace detail

/// Collects annotations in order, starting from two, until the mean pairwise
/// similarity of what has been collected reaches `threshold` or the pool runs
/// out.
inline WpResult wp_simulate(std::span<const PixelMask> pool, double threshold, AgreementMode mode) {
    if (pool.size() < 2) {
        throw error(errc::pool_too_small, "agreement needs at least two annotations");
    }
    std::size_t consumed = 2;
    double sim_sum = detail::pair_similarity(pool[0], pool[1], mode);
    while (consumed < pool.size()) {
        const double pairs = static_cast<double>(consumed * (consumed - 1) / 2);
        if (sim_sum / pairs >= threshold) {
            break;
        }
        for (std::size_t i = 0; i < consumed; ++i) {
            sim_sum += detail::pair_similarity(pool[i], pool[consumed], mode);
        }
        ++consumed;
    }
    return {consumed, pool.first(consumed)};
}

struct CurvePoint {
    double budget_fraction = 0.0;
    double captured_fraction = 0.0;
};

struct DiversityCurve {
    std::string strategy;
    Measure measure = Measure::region;
    std::vector<CurvePoint> points;
    std::size_t seeds_used = 1;
};

namespace detail {

/// Per-image diversity of the first `k` annotations, for k = 0..extra+1,
/// indexed by image in id order.
struct PrefixTable {
    std::vector<ImageId> ids;
    std::vector<std::vector<double>> prefix; // prefix[i][k] = sum_{a<k} d_ia
    double full = 0.0;

    PrefixTable(const DiversityTable& table, std::size_t extra, Measure m) {
        for (const auto& [id, scores] : table) {
            if (scores.size() < 1 + extra) {
                throw error(errc::insufficient_annotations, id + ": need " + std::to_string(1 + extra) +
                                                                " annotations, have " + std::to_string(scores.size()));
            }
            ids.push_back(id);
            std::vector<double> p(extra + 2, 0.0);
            for (std::size_t k = 1; k <= extra + 1; ++k) {
                p[k] = p[k - 1] + measure_value(scores[k - 1], m);
            }
            prefix.push_back(std::move(p));
        }
        for (const auto& p : prefix) {
            full += p.back();
        }
    }

    [[nodiscard]] double fraction(double captured) const noexcept { return full > 0.0 ? captured / full : 1.0; }
};

} // namespace detail

/// Captured fraction for B = 0..N images taken from the front of each
/// ordering; several orderings (one per seed) are averaged pointwise.
inline DiversityCurve budget_diversity_curve(std::string strategy, std::span<const std::vector<ImageId>> orderings,
                                             const DiversityTable& table, std::size_t extra, Measure m) {
    if (orderings.empty()) {
        throw error(errc::empty_input, "no orderings for curve " + strategy);
    }
    const detail::PrefixTable prefix(table, extra, m);
    const std::size_t n = prefix.ids.size();
    std::map<std::string_view, std::size_t> index_of;
    for (std::size_t i = 0; i < n; ++i) {
        index_of.emplace(prefix.ids[i], i);
    }

    DiversityCurve curve;
    curve.strategy = std::move(strategy);
    curve.measure = m;
    curve.seeds_used = orderings.size();
    std::vector<double> sums(n + 1, 0.0);
    for (const auto& order : orderings) {
        if (order.size() != n) {
            throw error(errc::id_mismatch, "ordering does not cover the batch");
        }
        std::vector<std::size_t> positions;
        positions.reserve(n);
        for (const auto& id : order) {
            auto it = index_of.find(id);
            if (it == index_of.end()) {
                throw error(errc::unknown_image, "ordering names unknown image " + id);
            }
            positions.push_back(it->second);
        }
        std::vector<char> chosen(n, 0);
        for (std::size_t b = 0; b <= n; ++b) {
            if (b > 0) {
                chosen[positions[b - 1]] = 1;
            }
            // Summed in id order, as batch_total_diversity does.
            double captured = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                captured += prefix.prefix[i][chosen[i] ? extra + 1 : 1];
            }
            sums[b] += prefix.fraction(captured);
        }
    }
    for (std::size_t b = 0; b <= n; ++b) {
        curve.points.push_back({n == 0 ? 1.0 : static_cast<double>(b) / static_cast<double>(n),
                                sums[b] / static_cast<double>(orderings.size())});
    }
    return curve;
}

/// Budget/diversity trade-off of the agreement-threshold baseline: each
/// threshold yields one point at the redundant annotations actually spent.
/// Points sharing a cost keep the best captured fraction.
inline DiversityCurve wp_curve(const AnnotationSets& sets, const DiversityTable& table,
                               std::span<const double> thresholds, AgreementMode mode, Measure m, std::size_t extra) {
    if (extra == 0) {
        throw error(errc::pool_too_small, "agreement baseline needs at least one redundant annotation");
    }
    const detail::PrefixTable prefix(table, extra, m);
    const double n = static_cast<double>(prefix.ids.size());
    std::map<double, double> best;
    for (double t : thresholds) {
        std::size_t spent = 0;
        double captured = 0.0;
        for (std::size_t i = 0; i < prefix.ids.size(); ++i) {
            const auto& masks = sets.at(prefix.ids[i]).masks();
            const auto pool = std::span<const PixelMask>(masks).first(extra + 1);
            const auto used = wp_simulate(pool, t, mode).consumed;
            spent += used;
            captured += prefix.prefix[i][used];
        }
        const double x = (static_cast<double>(spent) - n) / (n * static_cast<double>(extra));
        const double y = prefix.fraction(captured);
        auto [it, inserted] = best.emplace(x, y);
        if (!inserted) {
            it->second = std::max(it->second, y);
        }
    }
    DiversityCurve curve;
    curve.strategy = std::string(to_string(mode));
    curve.measure = m;
    for (const auto& [x, y] : best) {
        curve.points.push_back({x, y});
    }
    return curve;
}

/// Linear interpolation of a curve at budget fraction x (clamped to the
/// curve's range).
inline double curve_value_at(const DiversityCurve& curve, double x) {
    const auto& p = curve.points;
    if (p.empty()) {
        throw error(errc::empty_input, "empty curve");
    }
    if (x <= p.front().budget_fraction) {
        return p.front().captured_fraction;
    }
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (x <= p[i].budget_fraction) {
            const double t = (x - p[i - 1].budget_fraction) / (p[i].budget_fraction - p[i - 1].budget_fraction);
            return p[i - 1].captured_fraction + t * (p[i].captured_fraction - p[i - 1].captured_fraction);
        }
    }
    return p.back().captured_fraction;
}

inline constexpr double seconds_per_segmentation = 54.0;

inline double human_hours_saved(std::size_t annotations_avoided) {
    return static_cast<double>(annotations_avoided) * seconds_per_segmentation / 3600.0;
}

/// 0.00, 0.05, ..., 1.00
inline std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 20; ++i) {
        t.push_back(i / 20.0);
    }
    return t;
}

} // namespace segdiv

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "segdiv/distance_transform.hpp"
#include "segdiv/diversity.hpp"
#include "test_util.hpp"

using namespace segdiv;

namespace {

PixelMask block(int w, int h, int x0, int y0, int x1, int y1) {
    PixelMask m(w, h);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            m.set(x, y);
        }
    }
    return m;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

} // namespace

TEST(DistanceTransform, MatchesBruteForce) {
    Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        const int w = rng.integer(1, 15);
        const int h = rng.integer(1, 15);
        auto m = oracle::random_mask(rng, w, h, 0.1);
        m.set(rng.integer(0, w - 1), rng.integer(0, h - 1));
        const auto d2 = squared_distance_transform(m);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double best = 1e300;
                for (int v = 0; v < h; ++v) {
                    for (int u = 0; u < w; ++u) {
                        if (m.at(u, v)) {
                            best = std::min(best, double((u - x) * (u - x) + (v - y) * (v - y)));
                        }
                    }
                }
                EXPECT_EQ(d2[static_cast<std::size_t>(y) * w + x], best);
            }
        }
    }
}

TEST(WeightedF, IdenticalIsOne) {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const auto m = oracle::random_blobs(rng, 16, 16);
        EXPECT_EQ(weighted_fmeasure(m, m), 1.0);
    }
}

TEST(WeightedF, EmptyCandidateIsZero) {
    EXPECT_EQ(weighted_fmeasure(PixelMask(16, 16), block(16, 16, 3, 3, 9, 9)), 0.0);
}

TEST(WeightedF, EmptyReferenceThrows) {
    EXPECT_EQ(code_of([] { (void)weighted_fmeasure(block(4, 4, 0, 0, 1, 1), PixelMask(4, 4)); }),
              errc::empty_reference);
}

TEST(WeightedF, MatchesBruteForceOnFixturePair) {
    const auto ref = block(16, 16, 3, 4, 10, 11);
    const auto cand = block(16, 16, 5, 2, 13, 9);
    const double want = oracle::weighted_fmeasure(cand, ref);
    EXPECT_GT(want, 0.0);
    EXPECT_LT(want, 1.0);
    EXPECT_LE(rel_err(weighted_fmeasure(cand, ref), want), 1e-9);
}

TEST(WeightedF, MatchesBruteForceOnRandomPairs) {
    Rng rng(77);
    for (int i = 0; i < 100; ++i) {
        const auto ref = oracle::random_blobs(rng, 16, 16);
        const auto cand = i % 3 == 0 ? oracle::random_mask(rng, 16, 16, 0.3) : oracle::random_blobs(rng, 16, 16);
        const double got = weighted_fmeasure(cand, ref);
        EXPECT_LE(rel_err(got, oracle::weighted_fmeasure(cand, ref)), 1e-9);
        EXPECT_GE(got, 0.0);
        EXPECT_LE(got, 1.0);
    }
}

TEST(RegionDiversity, Examples) {
    const auto ref = block(16, 16, 2, 2, 8, 8);
    EXPECT_EQ(region_diversity(ref, ref), 0.0);
    EXPECT_EQ(region_diversity(PixelMask(16, 16), ref), 1.0);
    const auto cand = block(16, 16, 4, 4, 12, 12);
    EXPECT_LE(rel_err(region_diversity(cand, ref), 1.0 - oracle::weighted_fmeasure(cand, ref)), 1e-9);
}

TEST(RegionDiversity, DegenerateReference) {
    EXPECT_EQ(region_diversity(block(4, 4, 0, 0, 0, 0), PixelMask(4, 4)), 1.0);
    EXPECT_EQ(region_diversity(PixelMask(4, 4), PixelMask(4, 4)), 0.0);
}

TEST(Chamfer, Examples) {
    const auto a = block(8, 8, 1, 1, 4, 4);
    EXPECT_EQ(chamfer_distance(a, a), 0.0);
    PixelMask p(5, 1), q(5, 1);
    p.set(0, 0);
    q.set(3, 0);
    EXPECT_DOUBLE_EQ(chamfer_distance(p, q), 3.0);
    const auto b = block(8, 8, 2, 2, 3, 3);
    const auto c = block(8, 8, 3, 2, 4, 3);
    EXPECT_DOUBLE_EQ(chamfer_distance(b, c), oracle::chamfer(b, c));
    EXPECT_EQ(code_of([] { (void)chamfer_distance(PixelMask(3, 3), block(3, 3, 0, 0, 0, 0)); }), errc::empty_mask);
}

TEST(Chamfer, MatchesAllPairsOracle) {
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const auto a = oracle::random_blobs(rng, 14, 12);
        const auto b = oracle::random_blobs(rng, 14, 12);
        const double got = chamfer_distance(a, b);
        EXPECT_LE(rel_err(got, oracle::chamfer(a, b)), 1e-12);
        EXPECT_EQ(got, chamfer_distance(b, a));
    }
}

TEST(Chamfer, TranslationInvariant) {
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        const auto a = oracle::random_blobs(rng, 10, 10);
        const auto b = oracle::random_blobs(rng, 10, 10);
        PixelMask sa(20, 20), sb(20, 20), pa(20, 20), pb(20, 20);
        for (int y = 0; y < 10; ++y) {
            for (int x = 0; x < 10; ++x) {
                sa.set(x + 5, y + 4, a.at(x, y));
                sb.set(x + 5, y + 4, b.at(x, y));
                pa.set(x + 1, y + 1, a.at(x, y));
                pb.set(x + 1, y + 1, b.at(x, y));
            }
        }
        EXPECT_NEAR(chamfer_distance(sa, sb), chamfer_distance(pa, pb), 1e-12);
    }
}

TEST(AnnotationDiversity, IdenticalMasksScoreZero) {
    const auto m = block(10, 10, 2, 2, 6, 6);
    const AnnotationSet set("a", {m, m, m});
    for (std::size_t i = 0; i < 3; ++i) {
        const auto s = annotation_diversity(set, i);
        EXPECT_EQ(s.region, 0.0);
        ASSERT_TRUE(s.boundary);
        EXPECT_EQ(*s.boundary, 0.0);
    }
}

TEST(AnnotationDiversity, SingleMaskIsItsOwnReference) {
    const AnnotationSet set("a", {block(10, 10, 1, 1, 3, 3)});
    const auto s = annotation_diversity(set, 0);
    EXPECT_EQ(s.region, 0.0);
    EXPECT_EQ(s.boundary.value(), 0.0);
    EXPECT_EQ(code_of([&] { (void)annotation_diversity(set, 1); }), errc::index_out_of_range);
}

TEST(AnnotationDiversity, FiveMaskFixtureComposesOracles) {
    const std::vector<PixelMask> masks{block(16, 16, 2, 2, 9, 9), block(16, 16, 3, 2, 10, 9),
                                       block(16, 16, 2, 3, 9, 10), block(16, 16, 8, 8, 14, 14),
                                       block(16, 16, 1, 1, 8, 8)};
    const AnnotationSet set("a", masks);
    const auto& ref = set.reference();
    ASSERT_FALSE(ref.empty());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto s = annotation_diversity(set, i);
        EXPECT_LE(rel_err(s.region, 1.0 - oracle::weighted_fmeasure(masks[i], ref)), 1e-9);
        EXPECT_LE(rel_err(s.boundary.value(), oracle::chamfer(masks[i], ref)), 1e-12);
    }
}

TEST(AnnotationDiversity, EmptyAnnotationHasNoBoundaryValue) {
    const auto m = block(8, 8, 1, 1, 4, 4);
    const AnnotationSet set("a", {m, m, PixelMask(8, 8)});
    const auto s = annotation_diversity(set, 2);
    EXPECT_EQ(s.region, 1.0);
    EXPECT_FALSE(s.boundary.has_value());
    EXPECT_EQ(measure_value(s, Measure::boundary), 0.0);
}

TEST(BatchTotal, HandComputedExample) {
    DiversityTable table;
    table["img1"] = {{0.1, 1.0}, {0.2, 2.0}, {0.3, 3.0}};
    table["img2"] = {{0.0, 0.0}, {0.4, 4.0}};
    table["img3"] = {{0.2, 5.0}};
    AllocationPlan plan;
    plan.extra = 2;
    plan.budget = 1;
    plan.selected = {"img1"};
    const auto total = batch_total_diversity(table, plan);
    EXPECT_NEAR(total.total_region, 0.8, 1e-12);
    EXPECT_DOUBLE_EQ(total.total_boundary, 1.0 + 0.0 + 5.0 + 2.0 + 3.0);
}

TEST(BatchTotal, EmptySelectionIsFirstTermOnly) {
    DiversityTable table{{"a", {{0.25, 1.0}, {0.5, 1.0}}}, {"b", {{0.125, 2.0}, {0.5, 1.0}}}};
    AllocationPlan plan;
    plan.extra = 1;
    EXPECT_EQ(batch_total_diversity(table, plan).total_region, 0.375);
}

TEST(BatchTotal, AllZeroIsZero) {
    const auto m = block(8, 8, 1, 1, 4, 4);
    AnnotationSets sets;
    sets.emplace("a", AnnotationSet("a", {m, m, m}));
    sets.emplace("b", AnnotationSet("b", {m, m, m}));
    AllocationPlan plan;
    plan.extra = 2;
    plan.selected = {"a", "b"};
    const auto t = batch_total_diversity(sets, plan);
    EXPECT_EQ(t.total_region, 0.0);
    EXPECT_EQ(t.total_boundary, 0.0);
}

TEST(BatchTotal, ErrorsOnUnknownImageOrShortPool) {
    DiversityTable table{{"a", {{0.1, 1.0}}}};
    AllocationPlan plan;
    plan.extra = 1;
    plan.selected = {"zzz"};
    EXPECT_EQ(code_of([&] { (void)batch_total_diversity(table, plan); }), errc::unknown_image);
    plan.selected = {"a"};
    EXPECT_EQ(code_of([&] { (void)batch_total_diversity(table, plan); }), errc::insufficient_annotations);
}

TEST(BatchTotal, AdditiveAndMonotoneInSelection) {
    Rng rng(12);
    DiversityTable table;
    for (int i = 0; i < 8; ++i) {
        std::vector<DiversityScore> s;
        for (int a = 0; a < 5; ++a) {
            s.push_back({rng.uniform(), rng.uniform(0.0, 3.0)});
        }
        table["i" + std::to_string(i)] = s;
    }
    AllocationPlan plan;
    plan.extra = 4;
    double prev = batch_total_diversity(table, plan).total_region;
    double base = prev;
    for (const auto& [id, scores] : table) {
        plan.selected.push_back(id);
        const double now = batch_total_diversity(table, plan).total_region;
        EXPECT_GE(now, prev);
        double redundant = 0.0;
        for (int a = 1; a <= 4; ++a) {
            redundant += scores[a].region;
        }
        base += redundant;
        EXPECT_NEAR(now, base, 1e-12);
        prev = now;
    }
    auto reversed = plan;
    std::reverse(reversed.selected.begin(), reversed.selected.end());
    EXPECT_EQ(batch_total_diversity(table, reversed).total_region, prev);
}

#include <gtest/gtest.h>

#include "segdiv/random.hpp"
#include "segdiv/saliency.hpp"
#include "test_util.hpp"

using namespace segdiv;

namespace {

SubitizingDistribution dist(double p0, double p1, double p2, double p3, double p4) {
    return {{p0, p1, p2, p3, p4}};
}

const DetectionWindow small{{0, 0, 9, 9}, 0.9};
const DetectionWindow tall{{0, 0, 9, 19}, 0.6};
const DetectionWindow far{{50, 50, 59, 59}, 0.6};

} // namespace

TEST(Nms, Examples) {
    ASSERT_DOUBLE_EQ(box_iou(small.box, tall.box), 0.5);
    const std::vector<DetectionWindow> one{small};
    EXPECT_EQ(nms(one).size(), 1u);
    const std::vector<DetectionWindow> overlap{tall, small};
    const auto kept = nms(overlap);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].confidence, 0.9);
    const std::vector<DetectionWindow> disjoint{small, far};
    EXPECT_EQ(nms(disjoint).size(), 2u);
}

TEST(Nms, OutputProperties) {
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        std::vector<DetectionWindow> w;
        const int n = rng.integer(1, 12);
        for (int k = 0; k < n; ++k) {
            const int x = rng.integer(0, 40);
            const int y = rng.integer(0, 40);
            w.push_back({{x, y, x + rng.integer(0, 15), y + rng.integer(0, 15)}, rng.uniform()});
        }
        const auto kept = nms(w);
        ASSERT_FALSE(kept.empty());
        for (std::size_t a = 0; a < kept.size(); ++a) {
            if (a > 0) {
                EXPECT_GE(kept[a - 1].confidence, kept[a].confidence);
            }
            for (std::size_t b = a + 1; b < kept.size(); ++b) {
                EXPECT_LE(box_iou(kept[a].box, kept[b].box), feng_nms_threshold);
            }
        }
    }
}

TEST(Feng, Examples) {
    const std::vector<DetectionWindow> single{{{0, 0, 4, 4}, 0.8}};
    EXPECT_EQ(feng_unambiguity(single), 0.8);
    const std::vector<DetectionWindow> disjoint{small, far};
    EXPECT_DOUBLE_EQ(feng_unambiguity(disjoint), 0.9 - 0.6);
    const std::vector<DetectionWindow> overlap{small, tall};
    EXPECT_EQ(feng_unambiguity(overlap), 0.9);
    EXPECT_EQ(code_of([] { (void)feng_unambiguity(std::span<const DetectionWindow>{}); }), errc::no_windows);
}

TEST(Sos, MultiObjectImageComesFirst) {
    const std::map<ImageId, SubitizingDistribution> d{{"A", dist(0.0, 0.9, 0.1, 0.0, 0.0)},
                                                      {"B", dist(0.0, 0.2, 0.7, 0.1, 0.0)}};
    EXPECT_EQ(sos_priority_order(d), (std::vector<ImageId>{"B", "A"}));
}

TEST(Sos, IdenticalDistributionsFallBackToIdOrder) {
    const auto p = dist(0.1, 0.5, 0.2, 0.1, 0.1);
    const std::map<ImageId, SubitizingDistribution> d{{"c", p}, {"a", p}, {"b", p}};
    EXPECT_EQ(sos_priority_order(d), (std::vector<ImageId>{"a", "b", "c"}));
}

TEST(Sos, HandEnumeratedRanking) {
    const std::map<ImageId, SubitizingDistribution> d{{"X", dist(0.0, 0.9, 0.1, 0.0, 0.0)},
                                                      {"Y", dist(0.0, 0.6, 0.4, 0.0, 0.0)},
                                                      {"Z", dist(0.1, 0.2, 0.1, 0.5, 0.1)},
                                                      {"W", dist(0.7, 0.1, 0.1, 0.05, 0.05)},
                                                      {"V", dist(0.0, 0.1, 0.1, 0.1, 0.7)},
                                                      {"U", dist(0.0, 0.1, 0.8, 0.1, 0.0)},
                                                      {"T", dist(0.0, 0.2, 0.6, 0.2, 0.0)}};
    // 0 first, then 4+, 3, 2 (most confident first), then 1 (least confident first).
    EXPECT_EQ(sos_priority_order(d), (std::vector<ImageId>{"W", "V", "Z", "U", "T", "Y", "X"}));
    const auto scores = sos_priority_scores(d);
    EXPECT_LT(scores.at("W"), scores.at("X"));
    EXPECT_EQ(scores.at("W"), 0.0);
}

TEST(Sos, RejectsInvalidDistribution) {
    const std::map<ImageId, SubitizingDistribution> d{{"a", dist(0.5, 0.5, 0.5, 0.0, 0.0)}};
    EXPECT_EQ(code_of([&] { (void)sos_priority_order(d); }), errc::invalid_distribution);
}

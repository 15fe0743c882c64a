#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "segdiv/ambiguity.hpp"
#include "test_util.hpp"

using namespace segdiv;

namespace {

std::vector<VoteRecord> votes(const std::string& pattern) {
    std::vector<VoteRecord> out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        out.push_back({"img", "w" + std::to_string(i), pattern[i] == 'Y'});
    }
    return out;
}

PixelMask row(int w, int x0, int x1) {
    PixelMask m(w, 1);
    for (int x = x0; x <= x1; ++x) {
        m.set(x, 0);
    }
    return m;
}

} // namespace

TEST(Votes, MajorityRule) {
    EXPECT_EQ(aggregate_votes(votes("YYYNN")).label, Ambiguity::unambiguous);
    EXPECT_EQ(aggregate_votes(votes("NNNNN")).label, Ambiguity::ambiguous);
    EXPECT_EQ(aggregate_votes(votes("YYNNN")).label, Ambiguity::ambiguous);
    EXPECT_EQ(aggregate_votes(votes("YYYNN")).source, LabelSource::judgers);
}

TEST(Votes, Errors) {
    EXPECT_EQ(code_of([] { (void)aggregate_votes(votes("YYYN")); }), errc::wrong_vote_count);
    auto dup = votes("YYYNN");
    dup[4].worker_id = "w0";
    EXPECT_EQ(code_of([&] { (void)aggregate_votes(dup); }), errc::duplicate_worker);
    auto mixed = votes("YYYNN");
    mixed[2].image_id = "other";
    EXPECT_EQ(code_of([&] { (void)aggregate_votes(mixed); }), errc::id_mismatch);
}

TEST(Votes, OrderInvariant) {
    for (int bits = 0; bits < 32; ++bits) {
        std::string p;
        for (int i = 0; i < 5; ++i) {
            p += (bits >> i) & 1 ? 'Y' : 'N';
        }
        auto v = votes(p);
        const auto label = aggregate_votes(v).label;
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.worker_id > b.worker_id; });
        EXPECT_EQ(aggregate_votes(v).label, label);
        std::rotate(v.begin(), v.begin() + 2, v.end());
        EXPECT_EQ(aggregate_votes(v).label, label);
    }
}

TEST(Drawings, Examples) {
    const auto m = row(8, 1, 5);
    const std::vector<PixelMask> same{m, m, m};
    EXPECT_EQ(label_from_drawings("a", same).label, Ambiguity::unambiguous);
    PixelMask two(8, 1);
    two.set(0, 0);
    two.set(5, 0);
    const std::vector<PixelMask> split{two, two};
    EXPECT_EQ(label_from_drawings("a", split).label, Ambiguity::ambiguous);
    const auto a = row(5, 0, 3);
    const auto b = row(5, 2, 4);
    ASSERT_DOUBLE_EQ(iou(a, b), 0.4);
    const std::vector<PixelMask> low{a, b};
    EXPECT_EQ(label_from_drawings("a", low).label, Ambiguity::ambiguous);
    const std::vector<PixelMask> half{row(4, 0, 3), row(4, 0, 1)};
    EXPECT_EQ(label_from_drawings("a", half).label, Ambiguity::unambiguous);
}

TEST(Drawings, Errors) {
    const std::vector<PixelMask> one{row(4, 0, 1)};
    EXPECT_EQ(code_of([&] { (void)label_from_drawings("a", one); }), errc::too_few_masks);
    const std::vector<PixelMask> with_empty{row(4, 0, 1), PixelMask(4, 1)};
    EXPECT_EQ(code_of([&] { (void)label_from_drawings("a", with_empty); }), errc::empty_mask);
}

TEST(Drawings, InvariantToOrderAndDuplicates) {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        std::vector<PixelMask> masks;
        const int n = rng.integer(2, 5);
        for (int k = 0; k < n; ++k) {
            masks.push_back(oracle::random_blobs(rng, 10, 10));
        }
        const auto label = label_from_drawings("x", masks).label;
        std::reverse(masks.begin(), masks.end());
        EXPECT_EQ(label_from_drawings("x", masks).label, label);
        masks.push_back(masks[rng.below(masks.size())]);
        EXPECT_EQ(label_from_drawings("x", masks).label, label);
    }
}

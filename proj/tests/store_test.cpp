#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "store_fixture.hpp"

using namespace segdiv;

namespace {

struct Clock {
    std::int64_t now = 1'000'000;
    std::function<std::int64_t()> fn() {
        return [this] { return now; };
    }
};

/// Lets w0..w59 take and complete segment tasks until none are left for them.
void annotate_everything(CollectionStore& store) {
    for (int w = 0; w < 60; ++w) {
        const std::string worker = "w" + std::to_string(w);
        while (const auto t = store.next_task(worker)) {
            const std::vector<PolygonOutline> poly{square(2, 2, 10, 10)};
            store.submit_segmentation(t->task_id, worker, poly);
        }
    }
}

} // namespace

TEST(Store, SegmentBatchOpensOneTaskPerImage) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    const auto b = store.create_batch(make_corpus(dir, 10), TaskKind::segment, 4);
    const auto s = store.status(b);
    EXPECT_EQ(s.images, 10u);
    EXPECT_EQ(s.open, 10u);
    for (const auto& t : store.tasks()) {
        EXPECT_EQ(t.image_ids.size(), 1u);
        EXPECT_EQ(t.kind, TaskKind::segment);
    }
    EXPECT_DOUBLE_EQ(s.price_per_hit, segment_hit_price);
}

TEST(Store, VoteBatchesGroupFiveImages) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    store.create_batch(make_corpus(dir, 10), TaskKind::vote, 0);
    ASSERT_EQ(store.tasks().size(), 2u);
    EXPECT_EQ(store.tasks()[0].image_ids.size(), 5u);
    EXPECT_EQ(store.tasks()[1].image_ids.size(), 5u);

    TempDir other;
    CollectionStore seven(other / "log.jsonl", registry());
    seven.create_batch(make_corpus(other, 7), TaskKind::vote, 0);
    ASSERT_EQ(seven.tasks().size(), 2u);
    EXPECT_EQ(seven.tasks()[0].image_ids.size(), 5u);
    EXPECT_EQ(seven.tasks()[1].image_ids.size(), 2u);
}

TEST(Store, BatchCreationErrors) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    const auto manifest = make_corpus(dir, 3);
    EXPECT_EQ(code_of([&] { store.create_batch(manifest, TaskKind::segment, 10); }), errc::annotation_cap_reached);
    EXPECT_EQ(code_of([&] { store.create_batch(dir / "missing.jsonl", TaskKind::segment, 4); }), errc::io_failure);
    std::filesystem::remove(dir / "images" / "img0001.pgm");
    EXPECT_EQ(code_of([&] { store.create_batch(manifest, TaskKind::segment, 4); }), errc::missing_image);
    EXPECT_TRUE(store.tasks().empty());
    EXPECT_EQ(code_of([&] { (void)store.status("b9999"); }), errc::unknown_batch);
}

TEST(Store, NextTaskQualification) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    EXPECT_FALSE(store.next_task("w0").has_value());
    store.create_batch(make_corpus(dir, 2), TaskKind::segment, 4);
    EXPECT_EQ(code_of([&] { (void)store.next_task("lowq"); }), errc::ineligible_worker);
    EXPECT_EQ(code_of([&] { (void)store.next_task("novice"); }), errc::ineligible_worker);
    EXPECT_EQ(code_of([&] { (void)store.next_task("stranger"); }), errc::ineligible_worker);
    const auto a = store.next_task("w0");
    const auto b = store.next_task("w1");
    ASSERT_TRUE(a && b);
    EXPECT_NE(a->task_id, b->task_id);
    EXPECT_EQ(a->state, TaskState::assigned);
    EXPECT_FALSE(store.next_task("w2").has_value());
}

TEST(Store, WorkerPolicyFromConfig) {
    const auto reg = WorkerRegistry::from_json(nlohmann::json::parse(
        R"({"min_completed_tasks": 10, "min_approval_rate": 0.5, "workers": [{"worker_id": "a", "completed_tasks": 10, "approval_rate": 0.5}]})"));
    EXPECT_TRUE(reg.eligible("a"));
    EXPECT_EQ(code_of([] {
                  (void)WorkerRegistry::from_json(nlohmann::json::parse(
                      R"({"workers": [{"worker_id": "a", "completed_tasks": 1, "approval_rate": 1.5}]})"));
              }),
              errc::parse_error);
}

TEST(Store, FiveVotesMaterialiseALabelAndTheSixthIsRejected) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    const auto manifest = make_corpus(dir, 5);
    const auto batch = store.create_batch(manifest, TaskKind::vote, 0, 5);
    ASSERT_EQ(store.tasks().size(), 5u);
    std::map<ImageId, Ambiguity> labels;
    for (int w = 0; w < 5; ++w) {
        const auto t = store.next_task("w" + std::to_string(w));
        ASSERT_TRUE(t);
        const std::vector<bool> votes{true, w < 3, false, true, w == 0};
        const auto got = store.submit_vote(t->task_id, t->worker_id, votes);
        if (w < 4) {
            EXPECT_TRUE(got.empty());
        } else {
            labels = got;
        }
        EXPECT_EQ(code_of([&] { store.submit_vote(t->task_id, t->worker_id, votes); }), errc::not_assigned);
    }
    ASSERT_EQ(labels.size(), 5u);
    EXPECT_EQ(labels.at("img0000"), Ambiguity::unambiguous);
    EXPECT_EQ(labels.at("img0001"), Ambiguity::unambiguous);
    EXPECT_EQ(labels.at("img0002"), Ambiguity::ambiguous);
    EXPECT_EQ(labels.at("img0004"), Ambiguity::ambiguous);
    EXPECT_EQ(store.status(batch).labelled, 5u);

    store.create_batch(manifest, TaskKind::vote, 0);
    const auto extra = store.next_task("w5");
    ASSERT_TRUE(extra);
    EXPECT_EQ(code_of([&] { store.submit_vote(extra->task_id, "w5", {true, true, true, true, true}); }),
              errc::vote_cap_reached);
    EXPECT_EQ(store.image("img0000")->votes.size(), 5u);
}

TEST(Store, VoteValidation) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    store.create_batch(make_corpus(dir, 3), TaskKind::vote, 0);
    const auto t = store.next_task("w0");
    ASSERT_TRUE(t);
    EXPECT_EQ(code_of([&] { store.submit_vote(t->task_id, "w0", {true}); }), errc::vote_count_mismatch);
    EXPECT_EQ(code_of([&] { store.submit_vote(t->task_id, "w1", {true, true, true}); }), errc::not_assigned);
    EXPECT_EQ(code_of([&] { store.submit_vote("t999999", "w0", {true, true, true}); }), errc::unknown_task);
    const std::vector<PolygonOutline> poly{square(0, 0, 4, 4)};
    EXPECT_EQ(code_of([&] { store.submit_segmentation(t->task_id, "w0", poly); }), errc::wrong_kind);
}

TEST(Store, WorkerNeverSeesTheSameImageTwice) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    store.create_batch(make_corpus(dir, 5), TaskKind::vote, 0, 3);
    const auto t = store.next_task("w0");
    ASSERT_TRUE(t);
    EXPECT_FALSE(store.next_task("w0").has_value());
    store.submit_vote(t->task_id, "w0", {true, true, true, true, true});
    EXPECT_FALSE(store.next_task("w0").has_value());
    EXPECT_TRUE(store.next_task("w1").has_value());
}

TEST(Store, SegmentationSubmission) {
    TempDir dir;
    Clock clock;
    CollectionStore store(dir / "log.jsonl", registry(), {default_assignment_timeout_ms, clock.fn()});
    store.create_batch(make_corpus(dir, 1), TaskKind::segment, 4);
    const auto t = store.next_task("w0");
    ASSERT_TRUE(t);
    const std::vector<PolygonOutline> two{square(0, 0, 4, 4), square(6, 6, 9, 9)};
    EXPECT_EQ(code_of([&] { store.submit_segmentation(t->task_id, "w0", two); }), errc::multiple_polygons);
    const std::vector<PolygonOutline> none;
    EXPECT_EQ(code_of([&] { store.submit_segmentation(t->task_id, "w0", none); }), errc::empty_rasterization);
    const std::vector<PolygonOutline> sliver{{{{0.1, 0.1}, {0.4, 0.1}, {0.1, 0.4}}}};
    EXPECT_EQ(code_of([&] { store.submit_segmentation(t->task_id, "w0", sliver); }), errc::empty_rasterization);
    const std::vector<PolygonOutline> ok{square(0, 0, 2, 2)};
    const auto receipt = store.submit_segmentation(t->task_id, "w0", ok);
    EXPECT_EQ(receipt.pixels, 4u);
    EXPECT_EQ(receipt.timestamp, clock.now);
    EXPECT_EQ(store.task(t->task_id)->state, TaskState::done);
    const auto rec = store.image(t->image_ids[0]);
    ASSERT_EQ(rec->annotations.size(), 1u);
    EXPECT_EQ(decode_rle(rec->annotations[0].mask), rasterize_polygon(ok[0], 16, 16));
    EXPECT_EQ(code_of([&] { store.submit_segmentation(t->task_id, "w0", ok); }), errc::not_assigned);
}

TEST(Store, AssignmentTimeoutReopensTask) {
    TempDir dir;
    Clock clock;
    CollectionStore store(dir / "log.jsonl", registry(), {default_assignment_timeout_ms, clock.fn()});
    store.create_batch(make_corpus(dir, 1), TaskKind::segment, 4);
    const auto t = store.next_task("w0");
    ASSERT_TRUE(t);
    clock.now += default_assignment_timeout_ms - 1;
    EXPECT_EQ(store.expire_assignments(), 0u);
    EXPECT_FALSE(store.next_task("w1").has_value());
    clock.now += 1;
    const auto again = store.next_task("w1");
    ASSERT_TRUE(again);
    EXPECT_EQ(again->task_id, t->task_id);
    const std::vector<PolygonOutline> ok{square(0, 0, 2, 2)};
    EXPECT_EQ(code_of([&] { store.submit_segmentation(t->task_id, "w0", ok); }), errc::not_assigned);
    store.submit_segmentation(t->task_id, "w1", ok);
}

TEST(Store, AdaptiveRounds) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    const auto batch = store.create_batch(make_corpus(dir, 6), TaskKind::segment, 4);
    std::map<ImageId, double> scores;
    for (int i = 0; i < 6; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "img%04d", i);
        scores[id] = (i * 7) % 6 / 10.0;
    }
    EXPECT_EQ(code_of([&] { store.run_adaptive_round(batch, scores, "", 2, 4); }), errc::round_one_incomplete);
    annotate_everything(store);
    EXPECT_EQ(store.status(batch).annotated, 6u);

    const auto none = store.run_adaptive_round(batch, scores, "external", 0, 4);
    EXPECT_TRUE(none.opened_tasks.empty());
    EXPECT_EQ(store.image("img0000")->scores.at("external"), scores.at("img0000"));

    const auto round = store.run_adaptive_round(batch, scores, "", 2, 4);
    EXPECT_EQ(round.plan.selected, greedy_allocate(scores, 2, 4).selected);
    ASSERT_EQ(round.opened_tasks.size(), 8u);
    std::multiset<ImageId> opened;
    for (const auto& id : round.opened_tasks) {
        const auto t = store.task(id);
        EXPECT_EQ(t->round, 3u);
        opened.insert(t->image_ids[0]);
    }
    for (const auto& id : round.plan.selected) {
        EXPECT_EQ(opened.count(id), 4u);
    }
    EXPECT_EQ(store.status(batch).rounds, 2u);

    // 1 + 4 pending already; 9 more would pass the cap of 10.
    EXPECT_EQ(code_of([&] { store.run_adaptive_round(batch, scores, "", 1, 9); }), errc::annotation_cap_reached);
    std::map<ImageId, double> partial{{"img0000", 0.1}};
    EXPECT_EQ(code_of([&] { store.run_adaptive_round(batch, partial, "", 1, 4); }), errc::missing_score);
}

TEST(Store, FullBudgetOpensExtraTasksForEveryImage) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    const auto batch = store.create_batch(make_corpus(dir, 5), TaskKind::segment, 4);
    annotate_everything(store);
    std::map<ImageId, double> scores;
    for (const auto& r : store.manifest()) {
        scores[r.image_id] = 0.5;
    }
    EXPECT_EQ(store.run_adaptive_round(batch, scores, "", 5, 4).opened_tasks.size(), 20u);
    annotate_everything(store);
    for (const auto& r : store.manifest()) {
        EXPECT_EQ(r.annotations.size(), 5u);
        for (std::size_t a = 1; a < r.annotations.size(); ++a) {
            EXPECT_LT(r.annotations[a - 1].timestamp, r.annotations[a].timestamp);
        }
    }
    const auto report = store.report(batch);
    EXPECT_EQ(report.rows.size(), 5u);
    EXPECT_EQ(std::get<std::int64_t>(report.rows[0][4]), 5);
    EXPECT_EQ(std::get<std::int64_t>(report.rows[0][5]), 1);
}

TEST(Store, AdaptiveRoundsNeedSegmentBatches) {
    TempDir dir;
    CollectionStore store(dir / "log.jsonl", registry());
    const auto batch = store.create_batch(make_corpus(dir, 2), TaskKind::vote, 0);
    EXPECT_EQ(code_of([&] { store.run_adaptive_round(batch, {}, "", 1, 4); }), errc::wrong_kind);
}

TEST(Store, ReplayRebuildsIdenticalState) {
    TempDir dir;
    Clock clock;
    nlohmann::ordered_json live;
    {
        CollectionStore store(dir / "log.jsonl", registry(), {default_assignment_timeout_ms, clock.fn()});
        const auto manifest = make_corpus(dir, 5);
        store.create_batch(manifest, TaskKind::vote, 0, 5);
        const auto seg = store.create_batch(manifest, TaskKind::segment, 4);
        for (int w = 0; w < 5; ++w) {
            const auto t = store.next_task("w" + std::to_string(w));
            store.submit_vote(t->task_id, t->worker_id, {w % 2 == 0, true, false, true, w > 2});
            clock.now += 1000;
        }
        annotate_everything(store);
        std::map<ImageId, double> scores;
        for (const auto& r : store.manifest()) {
            scores[r.image_id] = static_cast<double>(r.image_id.back() - '0');
        }
        store.run_adaptive_round(seg, scores, "external", 2, 4);
        const auto pending = store.next_task("w40");
        ASSERT_TRUE(pending);
        live = store.snapshot();
    }
    CollectionStore again(dir / "log.jsonl", registry(), {default_assignment_timeout_ms, clock.fn()});
    EXPECT_EQ(again.snapshot(), live);
    EXPECT_EQ(again.snapshot().dump(), live.dump());
}

TEST(Store, TornFinalLineIsDiscarded) {
    TempDir dir;
    nlohmann::ordered_json live;
    {
        CollectionStore store(dir / "log.jsonl", registry());
        store.create_batch(make_corpus(dir, 2), TaskKind::segment, 4);
        live = store.snapshot();
    }
    {
        std::ofstream out(dir / "log.jsonl", std::ios::app);
        out << R"({"seq": 99, "type": "task_ass)";
    }
    auto saved = warning_sink();
    warning_sink() = [](std::string_view) {};
    CollectionStore again(dir / "log.jsonl", registry());
    warning_sink() = saved;
    EXPECT_EQ(again.snapshot(), live);
    ASSERT_TRUE(again.next_task("w0"));
    CollectionStore third(dir / "log.jsonl", registry());
    EXPECT_EQ(third.snapshot(), again.snapshot());
}

TEST(Store, CorruptLogIsRejected) {
    TempDir dir;
    {
        std::ofstream out(dir / "log.jsonl");
        out << "{\"seq\": 2, \"type\": \"task_reopen\", \"task_id\": \"t1\"}\n";
    }
    EXPECT_EQ(code_of([&] { CollectionStore s(dir / "log.jsonl", registry()); }), errc::parse_error);
}

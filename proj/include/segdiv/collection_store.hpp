#pragma once

// Collection state (batches, tasks, votes, annotations, scores, plans) kept
// behind an append-only JSONL event log. Every mutation is written as one or
// more events and then applied; replaying the log rebuilds identical state.
// One mutex serialises all operations.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "segdiv/allocation.hpp"
#include "segdiv/ambiguity.hpp"
#include "segdiv/diversity.hpp"
#include "segdiv/error.hpp"
#include "segdiv/image.hpp"
#include "segdiv/manifest.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/plan.hpp"
#include "segdiv/report.hpp"

namespace segdiv {

enum class TaskKind { vote, segment };
enum class TaskState { open, assigned, done };

inline std::string_view to_string(TaskKind k) noexcept { return k == TaskKind::vote ? "vote" : "segment"; }

inline std::string_view to_string(TaskState s) noexcept {
    switch (s) {
    case TaskState::open:
        return "open";
    case TaskState::assigned:
        return "assigned";
    case TaskState::done:
        return "done";
    }
    return "open";
}

inline TaskKind parse_task_kind(std::string_view s) {
    if (s == "vote") {
        return TaskKind::vote;
    }
    if (s == "segment") {
        return TaskKind::segment;
    }
    throw error(errc::parse_error, "unknown task kind '" + std::string(s) + "'");
}

inline TaskState parse_task_state(std::string_view s) {
    if (s == "open") {
        return TaskState::open;
    }
    if (s == "assigned") {
        return TaskState::assigned;
    }
    if (s == "done") {
        return TaskState::done;
    }
    throw error(errc::parse_error, "unknown task state '" + std::string(s) + "'");
}

inline constexpr std::size_t images_per_vote_task = 5;
inline constexpr std::size_t max_extra_annotations = 9;
inline constexpr double vote_hit_price = 0.02;
inline constexpr double segment_hit_price = 0.10;
inline constexpr std::int64_t default_assignment_timeout_ms = 30LL * 60 * 1000;

struct Task {
    std::string task_id;
    std::string batch_id;
    TaskKind kind = TaskKind::segment;
    std::vector<ImageId> image_ids;
    TaskState state = TaskState::open;
    std::string worker_id; // empty unless assigned or done
    std::int64_t assigned_at = 0;
    std::size_t round = 1;
};

inline nlohmann::ordered_json to_json(const Task& t) {
    return {{"task_id", t.task_id},     {"batch_id", t.batch_id},
            {"kind", to_string(t.kind)}, {"image_ids", t.image_ids},
            {"state", to_string(t.state)}, {"worker_id", t.worker_id},
            {"assigned_at", t.assigned_at}, {"round", t.round}};
}

struct WorkerProfile {
    std::string worker_id;
    std::size_t completed_tasks = 0;
    double approval_rate = 0.0;
};

struct WorkerPolicy {
    std::size_t min_completed_tasks = 100;
    double min_approval_rate = 0.92;
};

/// Declared worker profiles plus the qualification policy.
///
/// Config JSON: {"min_completed_tasks": 100, "min_approval_rate": 0.92,
///               "workers": [{"worker_id": "w1", "completed_tasks": 250,
///                            "approval_rate": 0.97}, ...]}
class WorkerRegistry {
public:
    WorkerRegistry() = default;
    explicit WorkerRegistry(WorkerPolicy policy) : policy_(policy) {}

    void add(WorkerProfile profile) { workers_[profile.worker_id] = std::move(profile); }

    [[nodiscard]] bool eligible(const std::string& worker_id) const {
        auto it = workers_.find(worker_id);
        return it != workers_.end() && it->second.completed_tasks >= policy_.min_completed_tasks &&
               it->second.approval_rate >= policy_.min_approval_rate;
    }

    [[nodiscard]] const WorkerPolicy& policy() const noexcept { return policy_; }
    [[nodiscard]] const std::map<std::string, WorkerProfile>& workers() const noexcept { return workers_; }

    static WorkerRegistry from_json(const nlohmann::json& j) {
        try {
            WorkerPolicy policy;
            policy.min_completed_tasks = j.value("min_completed_tasks", policy.min_completed_tasks);
            policy.min_approval_rate = j.value("min_approval_rate", policy.min_approval_rate);
            WorkerRegistry reg(policy);
            for (const auto& w : j.value("workers", nlohmann::json::array())) {
                WorkerProfile p{w.at("worker_id").get<std::string>(), w.at("completed_tasks").get<std::size_t>(),
                                w.at("approval_rate").get<double>()};
                if (!(p.approval_rate >= 0.0 && p.approval_rate <= 1.0)) {
                    throw error(errc::parse_error, "approval rate of " + p.worker_id + " outside [0, 1]");
                }
                reg.add(std::move(p));
            }
            return reg;
        } catch (const nlohmann::json::exception& e) {
            throw error(errc::parse_error, std::string("worker config: ") + e.what());
        }
    }

private:
    WorkerPolicy policy_;
    std::map<std::string, WorkerProfile> workers_;
};

inline WorkerRegistry load_worker_registry(const std::filesystem::path& path) {
    try {
        return WorkerRegistry::from_json(nlohmann::json::parse(detail::slurp(path)));
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, path.string() + ": " + e.what());
    }
}

struct Batch {
    std::string batch_id;
    TaskKind kind = TaskKind::segment;
    std::size_t extra = 0;
    std::size_t assignments = 1; // copies of each vote task
    double price_per_hit = 0.0;  // recorded only
    std::string manifest;
    std::vector<ImageId> images;
    std::vector<std::string> task_ids;
    std::vector<AllocationPlan> rounds;
};

struct BatchStatus {
    std::string batch_id;
    TaskKind kind = TaskKind::segment;
    std::size_t extra = 0;
    std::size_t images = 0;
    std::size_t open = 0;
    std::size_t assigned = 0;
    std::size_t done = 0;
    std::size_t labelled = 0;
    std::size_t annotated = 0;
    std::size_t annotations = 0;
    std::size_t rounds = 0;
    double price_per_hit = 0.0;
};

inline nlohmann::ordered_json to_json(const BatchStatus& s) {
    return {{"batch_id", s.batch_id},
            {"kind", to_string(s.kind)},
            {"extra", s.extra},
            {"images", s.images},
            {"tasks", {{"open", s.open}, {"assigned", s.assigned}, {"done", s.done}}},
            {"labelled_images", s.labelled},
            {"annotated_images", s.annotated},
            {"annotations", s.annotations},
            {"adaptive_rounds", s.rounds},
            {"price_per_hit", s.price_per_hit}};
}

inline nlohmann::ordered_json to_json(const AllocationPlan& p) {
    return {{"strategy", p.strategy}, {"budget", p.budget}, {"extra", p.extra}, {"selected", p.selected}};
}

inline AllocationPlan allocation_plan_from_json(const nlohmann::json& j) {
    AllocationPlan p;
    p.strategy = j.at("strategy").get<std::string>();
    p.budget = j.at("budget").get<std::size_t>();
    p.extra = j.at("extra").get<std::size_t>();
    p.selected = j.at("selected").get<std::vector<ImageId>>();
    return p;
}

struct RoundResult {
    AllocationPlan plan;
    std::vector<std::string> opened_tasks;
};

struct SegmentationReceipt {
    ImageId image_id;
    std::int64_t timestamp = 0;
    std::size_t pixels = 0;
};

struct StoreOptions {
    std::int64_t assignment_timeout_ms = default_assignment_timeout_ms;
    std::function<std::int64_t()> clock; // milliseconds; system clock when unset
};

class CollectionStore {
public:
    CollectionStore(std::filesystem::path log_path, WorkerRegistry workers, StoreOptions options = {})
        : log_path_(std::move(log_path)), workers_(std::move(workers)), options_(std::move(options)) {
        if (!options_.clock) {
            options_.clock = [] {
                return std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                    .count();
            };
        }
        replay();
        log_.open(log_path_, std::ios::app | std::ios::binary);
        if (!log_) {
            throw error(errc::io_failure, "cannot open event log " + log_path_.string());
        }
    }

    CollectionStore(const CollectionStore&) = delete;
    CollectionStore& operator=(const CollectionStore&) = delete;

    /// Reads the manifest (image paths resolve against its directory) and
    /// opens round-one tasks.
    std::string create_batch(const std::filesystem::path& manifest_path, TaskKind kind, std::size_t extra,
                             std::size_t assignments = 1) {
        const auto manifest = read_manifest(manifest_path);
        return create_batch(manifest, kind, extra, assignments, manifest_path.string(), manifest_path.parent_path());
    }

    std::string create_batch(const Manifest& manifest, TaskKind kind, std::size_t extra, std::size_t assignments,
                             const std::string& manifest_label, const std::filesystem::path& base_dir) {
        if (manifest.empty()) {
            throw error(errc::empty_input, "manifest lists no images");
        }
        if (extra > max_extra_annotations) {
            throw error(errc::annotation_cap_reached,
                        "extra " + std::to_string(extra) + " exceeds " + std::to_string(max_extra_annotations));
        }
        if (assignments < 1 || assignments > votes_per_image || (kind == TaskKind::segment && assignments != 1)) {
            throw error(errc::parse_error, "assignments must be 1..5 for vote batches and 1 for segment batches");
        }
        for (const auto& r : manifest) {
            check_image_readable(r, base_dir);
        }

        std::lock_guard lock(mutex_);
        for (const auto& r : manifest) {
            auto it = images_.find(r.image_id);
            if (it != images_.end() &&
                (it->second.record.width != r.width || it->second.record.height != r.height)) {
                throw error(errc::dimension_mismatch, r.image_id + " was registered with different dimensions");
            }
        }
        const std::int64_t now = options_.clock();
        char id[32];
        std::snprintf(id, sizeof id, "b%04zu", batches_.size() + 1);
        const std::string batch_id = id;

        std::vector<nlohmann::ordered_json> events;
        nlohmann::ordered_json batch{{"type", "batch"},
                                     {"time", now},
                                     {"batch_id", batch_id},
                                     {"kind", to_string(kind)},
                                     {"extra", extra},
                                     {"assignments", assignments},
                                     {"price_per_hit", kind == TaskKind::vote ? vote_hit_price : segment_hit_price},
                                     {"manifest", manifest_label},
                                     {"images", nlohmann::ordered_json::array()}};
        for (const auto& r : manifest) {
            batch["images"].push_back(to_json(r));
        }
        events.push_back(std::move(batch));

        std::size_t next_task = tasks_.size();
        auto open = [&](std::vector<ImageId> ids, std::size_t round) {
            events.push_back(task_open_event(now, ++next_task, batch_id, kind, std::move(ids), round));
        };
        if (kind == TaskKind::segment) {
            check_segment_capacity(manifest, 1);
            for (const auto& r : manifest) {
                open({r.image_id}, 1);
            }
        } else {
            for (std::size_t copy = 0; copy < assignments; ++copy) {
                for (std::size_t i = 0; i < manifest.size(); i += images_per_vote_task) {
                    std::vector<ImageId> group;
                    for (std::size_t j = i; j < std::min(manifest.size(), i + images_per_vote_task); ++j) {
                        group.push_back(manifest[j].image_id);
                    }
                    open(std::move(group), 1);
                }
            }
        }
        commit(events);
        return batch_id;
    }

    /// Oldest open task whose images this worker has never received for the
    /// task's kind; the task is assigned before the lock is released.
    std::optional<Task> next_task(const std::string& worker_id) {
        if (!workers_.eligible(worker_id)) {
            throw error(errc::ineligible_worker, "worker " + worker_id + " does not meet the qualification policy");
        }
        std::lock_guard lock(mutex_);
        const std::int64_t now = options_.clock();
        expire_locked(now);
        const auto hist = history_.find(worker_id);
        for (std::size_t idx : open_queue_) {
            const Task& t = tasks_[idx];
            if (hist != history_.end()) {
                const auto& seen = hist->second[static_cast<std::size_t>(t.kind)];
                if (std::any_of(t.image_ids.begin(), t.image_ids.end(),
                                [&](const ImageId& id) { return seen.contains(id); })) {
                    continue;
                }
            }
            const std::string task_id = t.task_id;
            commit({{{"type", "task_assign"}, {"time", now}, {"task_id", task_id}, {"worker_id", worker_id}}});
            return tasks_[idx];
        }
        return std::nullopt;
    }

    /// Returns assigned tasks whose timeout has passed to the open queue.
    std::size_t expire_assignments() {
        std::lock_guard lock(mutex_);
        return expire_locked(options_.clock());
    }

    /// One vote per task image, in task order. Returns labels that
    /// materialised because an image reached five votes.
    std::map<ImageId, Ambiguity> submit_vote(const std::string& task_id, const std::string& worker_id,
                                             const std::vector<bool>& votes) {
        std::lock_guard lock(mutex_);
        const Task& t = assigned_task(task_id, worker_id, TaskKind::vote);
        if (votes.size() != t.image_ids.size()) {
            throw error(errc::vote_count_mismatch, "task " + task_id + " needs " + std::to_string(t.image_ids.size()) +
                                                       " votes, got " + std::to_string(votes.size()));
        }
        std::map<ImageId, Ambiguity> materialised;
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < votes.size(); ++i) {
            const auto& img = images_.at(t.image_ids[i]);
            if (img.record.votes.size() >= votes_per_image) {
                throw error(errc::vote_cap_reached, t.image_ids[i] + " already has five votes");
            }
            if (std::any_of(img.record.votes.begin(), img.record.votes.end(),
                            [&](const StoredVote& v) { return v.worker_id == worker_id; })) {
                throw error(errc::duplicate_worker, worker_id + " already voted on " + t.image_ids[i]);
            }
            list.push_back({{"image_id", t.image_ids[i]}, {"vote", votes[i]}});
        }
        const std::int64_t now = options_.clock();
        commit({{{"type", "vote"}, {"time", now}, {"task_id", task_id}, {"worker_id", worker_id}, {"votes", list}},
                {{"type", "task_done"}, {"time", now}, {"task_id", task_id}}});
        for (const auto& id : t.image_ids) {
            const auto& img = images_.at(id);
            if (img.record.votes.size() == votes_per_image && img.label) {
                materialised[id] = *img.label;
            }
        }
        return materialised;
    }

    /// Exactly one polygon, rasterised here and stored in collection order.
    SegmentationReceipt submit_segmentation(const std::string& task_id, const std::string& worker_id,
                                            std::span<const PolygonOutline> polygons) {
        std::lock_guard lock(mutex_);
        const Task& t = assigned_task(task_id, worker_id, TaskKind::segment);
        if (polygons.size() > 1) {
            throw error(errc::multiple_polygons, "a segmentation carries exactly one polygon");
        }
        if (polygons.empty()) {
            throw error(errc::empty_rasterization, "no polygon submitted");
        }
        const auto& img = images_.at(t.image_ids.front());
        const PixelMask mask = rasterize_polygon(polygons.front(), img.record.width, img.record.height);
        if (mask.empty()) {
            throw error(errc::empty_rasterization, "polygon covers no pixel centre");
        }
        if (img.record.annotations.size() >= 1 + max_extra_annotations) {
            throw error(errc::annotation_cap_reached, img.record.image_id + " is at the annotation cap");
        }
        const std::int64_t now = options_.clock();
        std::int64_t stamp = now;
        if (!img.record.annotations.empty()) {
            stamp = std::max(stamp, img.record.annotations.back().timestamp + 1);
        }
        commit({{{"type", "annotation"},
                 {"time", now},
                 {"task_id", task_id},
                 {"worker_id", worker_id},
                 {"image_id", img.record.image_id},
                 {"timestamp", stamp},
                 {"mask", rle_to_json(encode_rle(mask))}},
                {{"type", "task_done"}, {"time", now}, {"task_id", task_id}}});
        return {img.record.image_id, stamp, mask.foreground_count()};
    }

    /// Records the scores under `method` (when non-empty), allocates the
    /// budget greedily over the batch and opens `extra` segment tasks for
    /// every selected image.
    RoundResult run_adaptive_round(const std::string& batch_id, const std::map<ImageId, double>& scores,
                                   const std::string& method, std::size_t budget, std::size_t extra) {
        std::lock_guard lock(mutex_);
        const Batch& b = batch_locked(batch_id);
        if (b.kind != TaskKind::segment) {
            throw error(errc::wrong_kind, "adaptive rounds run on segment batches");
        }
        for (const auto& id : b.images) {
            if (images_.at(id).record.annotations.empty()) {
                throw error(errc::round_one_incomplete, id + " has no annotation yet");
            }
        }
        if (extra > max_extra_annotations) {
            throw error(errc::annotation_cap_reached, "extra " + std::to_string(extra) + " exceeds the cap");
        }
        const AllocationPlan plan = greedy_allocate(scores, b.images, budget, extra);
        Manifest selected;
        for (const auto& id : plan.selected) {
            selected.push_back(images_.at(id).record);
        }
        check_segment_capacity(selected, extra);

        const std::int64_t now = options_.clock();
        std::vector<nlohmann::ordered_json> events;
        if (!method.empty()) {
            nlohmann::ordered_json s = nlohmann::ordered_json::object();
            for (const auto& id : b.images) {
                s[id] = scores.at(id);
            }
            events.push_back({{"type", "score"}, {"time", now}, {"method", method}, {"scores", s}});
        }
        const std::size_t round = b.rounds.size() + 2;
        events.push_back({{"type", "plan"}, {"time", now}, {"batch_id", batch_id}, {"round", round}, {"plan", to_json(plan)}});
        RoundResult result{plan, {}};
        std::size_t next_task = tasks_.size();
        for (const auto& id : plan.selected) {
            for (std::size_t a = 0; a < extra; ++a) {
                events.push_back(task_open_event(now, ++next_task, batch_id, TaskKind::segment, {id}, round));
                result.opened_tasks.push_back(events.back()["task_id"].get<std::string>());
            }
        }
        commit(events);
        return result;
    }

    [[nodiscard]] BatchStatus status(const std::string& batch_id) const {
        std::lock_guard lock(mutex_);
        const Batch& b = batch_locked(batch_id);
        BatchStatus s;
        s.batch_id = b.batch_id;
        s.kind = b.kind;
        s.extra = b.extra;
        s.images = b.images.size();
        s.rounds = b.rounds.size();
        s.price_per_hit = b.price_per_hit;
        for (const auto& tid : b.task_ids) {
            switch (tasks_[task_index_.at(tid)].state) {
            case TaskState::open:
                ++s.open;
                break;
            case TaskState::assigned:
                ++s.assigned;
                break;
            case TaskState::done:
                ++s.done;
                break;
            }
        }
        for (const auto& id : b.images) {
            const auto& img = images_.at(id);
            s.labelled += img.label ? 1 : 0;
            s.annotated += img.record.annotations.empty() ? 0 : 1;
            s.annotations += img.record.annotations.size();
        }
        return s;
    }

    /// Per-image summary of a batch. Diversity is computed after the lock is
    /// released, on a copy of the records.
    [[nodiscard]] Report report(const std::string& batch_id) const {
        std::vector<ImageRecord> records;
        std::vector<std::optional<Ambiguity>> labels;
        std::set<ImageId> selected;
        {
            std::lock_guard lock(mutex_);
            const Batch& b = batch_locked(batch_id);
            for (const auto& id : b.images) {
                records.push_back(images_.at(id).record);
                labels.push_back(images_.at(id).label);
            }
            for (const auto& plan : b.rounds) {
                selected.insert(plan.selected.begin(), plan.selected.end());
            }
        }
        Report report;
        report.columns = {"image_id",    "votes",    "yes_votes",        "label",
                          "annotations", "selected", "region_diversity", "boundary_diversity"};
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            const auto yes = std::count_if(r.votes.begin(), r.votes.end(), [](const StoredVote& v) { return v.vote; });
            Cell region = std::string();
            Cell boundary = std::string();
            if (!r.annotations.empty()) {
                const AnnotationSet set(r.image_id, decode_annotations(r));
                double rsum = 0.0;
                double bsum = 0.0;
                for (std::size_t a = 0; a < set.size(); ++a) {
                    const auto d = annotation_diversity(set, a);
                    rsum += d.region;
                    bsum += d.boundary.value_or(0.0);
                }
                region = rsum;
                boundary = bsum;
            }
            report.add({r.image_id, static_cast<std::int64_t>(r.votes.size()), static_cast<std::int64_t>(yes),
                        labels[i] ? std::string(to_string(*labels[i])) : std::string(),
                        static_cast<std::int64_t>(r.annotations.size()),
                        static_cast<std::int64_t>(selected.contains(r.image_id) ? 1 : 0), region, boundary});
        }
        return report;
    }

    [[nodiscard]] std::optional<Task> task(const std::string& task_id) const {
        std::lock_guard lock(mutex_);
        auto it = task_index_.find(task_id);
        if (it == task_index_.end()) {
            return std::nullopt;
        }
        return tasks_[it->second];
    }

    [[nodiscard]] std::vector<Task> tasks() const {
        std::lock_guard lock(mutex_);
        return tasks_;
    }

    [[nodiscard]] std::vector<std::string> batch_ids() const {
        std::lock_guard lock(mutex_);
        std::vector<std::string> ids;
        for (const auto& [id, b] : batches_) {
            ids.push_back(id);
        }
        return ids;
    }

    [[nodiscard]] std::optional<ImageRecord> image(const ImageId& id) const {
        std::lock_guard lock(mutex_);
        auto it = images_.find(id);
        if (it == images_.end()) {
            return std::nullopt;
        }
        return it->second.record;
    }

    /// Current records of every image, in id order.
    [[nodiscard]] Manifest manifest() const {
        std::lock_guard lock(mutex_);
        Manifest out;
        for (const auto& [id, img] : images_) {
            out.push_back(img.record);
        }
        return out;
    }

    /// Canonical JSON of the full state; equal for equal event histories.
    [[nodiscard]] nlohmann::ordered_json snapshot() const {
        std::lock_guard lock(mutex_);
        nlohmann::ordered_json j;
        j["seq"] = seq_;
        j["batches"] = nlohmann::ordered_json::array();
        for (const auto& [id, b] : batches_) {
            nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
            for (const auto& p : b.rounds) {
                rounds.push_back(to_json(p));
            }
            j["batches"].push_back({{"batch_id", b.batch_id},
                                    {"kind", to_string(b.kind)},
                                    {"extra", b.extra},
                                    {"assignments", b.assignments},
                                    {"price_per_hit", b.price_per_hit},
                                    {"manifest", b.manifest},
                                    {"images", b.images},
                                    {"task_ids", b.task_ids},
                                    {"rounds", rounds}});
        }
        j["tasks"] = nlohmann::ordered_json::array();
        for (const auto& t : tasks_) {
            j["tasks"].push_back(to_json(t));
        }
        j["open_queue"] = open_queue_;
        j["images"] = nlohmann::ordered_json::array();
        for (const auto& [id, img] : images_) {
            auto rec = to_json(img.record);
            rec["label"] = img.label ? std::string(to_string(*img.label)) : std::string();
            rec["pending_segments"] = img.pending_segments;
            j["images"].push_back(std::move(rec));
        }
        j["history"] = nlohmann::ordered_json::object();
        for (const auto& [worker, kinds] : history_) {
            j["history"][worker] = {{"vote", kinds[0]}, {"segment", kinds[1]}};
        }
        return j;
    }

    [[nodiscard]] const std::filesystem::path& log_path() const noexcept { return log_path_; }
    [[nodiscard]] const WorkerRegistry& workers() const noexcept { return workers_; }

private:
    struct StoredImage {
        ImageRecord record;
        std::optional<Ambiguity> label;
        std::size_t pending_segments = 0; // open or assigned segment tasks
    };

    static void check_image_readable(const ImageRecord& r, const std::filesystem::path& base_dir) {
        if (r.path.empty()) {
            throw error(errc::missing_image, r.image_id + " has no image path");
        }
        std::filesystem::path p = r.path;
        if (p.is_relative()) {
            p = base_dir / p;
        }
        std::ifstream in(p, std::ios::binary);
        if (!in) {
            throw error(errc::missing_image, r.image_id + ": cannot read " + p.string());
        }
        const auto ext = p.extension().string();
        if (ext == ".pgm" || ext == ".pbm" || ext == ".ppm" || ext == ".pnm") {
            const auto size = probe_pnm_size(p);
            if (size.width != r.width || size.height != r.height) {
                throw error(errc::dimension_mismatch, r.image_id + ": manifest size differs from " + p.string());
            }
        }
    }

    static nlohmann::ordered_json task_open_event(std::int64_t now, std::size_t number, const std::string& batch_id,
                                                  TaskKind kind, std::vector<ImageId> ids, std::size_t round) {
        char id[32];
        std::snprintf(id, sizeof id, "t%06zu", number);
        return {{"type", "task_open"}, {"time", now},      {"task_id", id},  {"batch_id", batch_id},
                {"kind", to_string(kind)}, {"image_ids", ids}, {"round", round}};
    }

    /// Existing, pending and newly requested annotations must fit the cap.
    void check_segment_capacity(const Manifest& records, std::size_t per_image) const {
        for (const auto& r : records) {
            std::size_t have = r.annotations.size();
            if (auto it = images_.find(r.image_id); it != images_.end()) {
                have = it->second.record.annotations.size() + it->second.pending_segments;
            }
            if (have + per_image > 1 + max_extra_annotations) {
                throw error(errc::annotation_cap_reached, r.image_id + " would exceed " +
                                                              std::to_string(1 + max_extra_annotations) +
                                                              " annotations");
            }
        }
    }

    const Batch& batch_locked(const std::string& batch_id) const {
        auto it = batches_.find(batch_id);
        if (it == batches_.end()) {
            throw error(errc::unknown_batch, "unknown batch " + batch_id);
        }
        return it->second;
    }

    const Task& assigned_task(const std::string& task_id, const std::string& worker_id, TaskKind kind) const {
        auto it = task_index_.find(task_id);
        if (it == task_index_.end()) {
            throw error(errc::unknown_task, "unknown task " + task_id);
        }
        const Task& t = tasks_[it->second];
        if (t.kind != kind) {
            throw error(errc::wrong_kind, "task " + task_id + " is a " + std::string(to_string(t.kind)) + " task");
        }
        if (t.state != TaskState::assigned || t.worker_id != worker_id) {
            throw error(errc::not_assigned, "task " + task_id + " is not assigned to " + worker_id);
        }
        return t;
    }

    std::size_t expire_locked(std::int64_t now) {
        std::vector<nlohmann::ordered_json> events;
        for (const auto& t : tasks_) {
            if (t.state == TaskState::assigned && now - t.assigned_at >= options_.assignment_timeout_ms) {
                events.push_back({{"type", "task_reopen"}, {"time", now}, {"task_id", t.task_id}});
            }
        }
        if (!events.empty()) {
            commit(events);
        }
        return events.size();
    }

    /// Writes the events as one append and applies them only once the write
    /// has reached the stream.
    void commit(std::vector<nlohmann::ordered_json> events) {
        std::string buf;
        std::uint64_t seq = seq_;
        for (auto& e : events) {
            nlohmann::ordered_json line{{"seq", ++seq}};
            line.update(e);
            e = std::move(line);
            buf += e.dump();
            buf += '\n';
        }
        log_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        log_.flush();
        if (!log_) {
            throw error(errc::io_failure, "append to " + log_path_.string() + " failed");
        }
        std::size_t start = 0;
        while (start < buf.size()) {
            const auto nl = buf.find('\n', start);
            apply(nlohmann::json::parse(buf.begin() + static_cast<std::ptrdiff_t>(start),
                                        buf.begin() + static_cast<std::ptrdiff_t>(nl)));
            start = nl + 1;
        }
    }

    void replay() {
        std::ifstream in(log_path_, std::ios::binary);
        if (!in) {
            return;
        }
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::size_t pos = 0;
        std::size_t lineno = 0;
        while (pos < text.size()) {
            const auto nl = text.find('\n', pos);
            ++lineno;
            if (nl == std::string::npos) {
                // A torn final write: drop it so later appends start clean.
                warning_sink()("discarding incomplete final event in " + log_path_.string());
                std::filesystem::resize_file(log_path_, pos);
                return;
            }
            const std::string line = text.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) {
                continue;
            }
            try {
                apply(nlohmann::json::parse(line));
            } catch (const nlohmann::json::exception& e) {
                throw error(errc::parse_error, log_path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
            } catch (const error& e) {
                throw error(errc::parse_error, log_path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    void apply(const nlohmann::json& e) {
        const auto seq = e.at("seq").get<std::uint64_t>();
        if (seq != seq_ + 1) {
            throw error(errc::parse_error, "event sequence jumps from " + std::to_string(seq_) + " to " +
                                               std::to_string(seq));
        }
        const auto type = e.at("type").get<std::string>();
        if (type == "batch") {
            Batch b;
            b.batch_id = e.at("batch_id").get<std::string>();
            b.kind = parse_task_kind(e.at("kind").get<std::string>());
            b.extra = e.at("extra").get<std::size_t>();
            b.assignments = e.at("assignments").get<std::size_t>();
            b.price_per_hit = e.at("price_per_hit").get<double>();
            b.manifest = e.at("manifest").get<std::string>();
            for (const auto& rj : e.at("images")) {
                auto rec = image_record_from_json(rj);
                b.images.push_back(rec.image_id);
                if (!images_.contains(rec.image_id)) {
                    StoredImage img;
                    if (rec.votes.size() == votes_per_image) {
                        img.label = label_of(rec);
                    }
                    img.record = std::move(rec);
                    images_.emplace(img.record.image_id, std::move(img));
                }
            }
            if (!batches_.emplace(b.batch_id, b).second) {
                throw error(errc::parse_error, "batch " + b.batch_id + " created twice");
            }
        } else if (type == "task_open") {
            Task t;
            t.task_id = e.at("task_id").get<std::string>();
            t.batch_id = e.at("batch_id").get<std::string>();
            t.kind = parse_task_kind(e.at("kind").get<std::string>());
            t.image_ids = e.at("image_ids").get<std::vector<ImageId>>();
            t.round = e.at("round").get<std::size_t>();
            auto& batch = batches_.at(t.batch_id);
            for (const auto& id : t.image_ids) {
                auto& img = images_.at(id);
                if (t.kind == TaskKind::segment) {
                    ++img.pending_segments;
                }
            }
            if (!task_index_.emplace(t.task_id, tasks_.size()).second) {
                throw error(errc::parse_error, "task " + t.task_id + " opened twice");
            }
            batch.task_ids.push_back(t.task_id);
            open_queue_.insert(tasks_.size());
            tasks_.push_back(std::move(t));
        } else if (type == "task_assign") {
            const auto idx = task_index_.at(e.at("task_id").get<std::string>());
            Task& t = tasks_[idx];
            transition(t, TaskState::open, TaskState::assigned);
            t.worker_id = e.at("worker_id").get<std::string>();
            t.assigned_at = e.at("time").get<std::int64_t>();
            open_queue_.erase(idx);
            auto& seen = history_[t.worker_id][static_cast<std::size_t>(t.kind)];
            seen.insert(t.image_ids.begin(), t.image_ids.end());
        } else if (type == "task_reopen") {
            const auto idx = task_index_.at(e.at("task_id").get<std::string>());
            Task& t = tasks_[idx];
            if (t.state != TaskState::assigned) {
                throw error(errc::parse_error, "task " + t.task_id + " reopened while " +
                                                   std::string(to_string(t.state)));
            }
            t.state = TaskState::open;
            t.worker_id.clear();
            t.assigned_at = 0;
            open_queue_.insert(idx);
        } else if (type == "task_done") {
            Task& t = tasks_[task_index_.at(e.at("task_id").get<std::string>())];
            transition(t, TaskState::assigned, TaskState::done);
            if (t.kind == TaskKind::segment) {
                for (const auto& id : t.image_ids) {
                    --images_.at(id).pending_segments;
                }
            }
        } else if (type == "vote") {
            const auto worker = e.at("worker_id").get<std::string>();
            for (const auto& v : e.at("votes")) {
                auto& img = images_.at(v.at("image_id").get<std::string>());
                if (img.record.votes.size() >= votes_per_image) {
                    throw error(errc::vote_cap_reached, img.record.image_id + " already has five votes");
                }
                img.record.votes.push_back({worker, v.at("vote").get<bool>()});
                if (img.record.votes.size() == votes_per_image) {
                    img.label = label_of(img.record);
                }
            }
        } else if (type == "annotation") {
            auto& img = images_.at(e.at("image_id").get<std::string>());
            AnnotationRecord a{e.at("worker_id").get<std::string>(),
                               e.at("timestamp").get<std::int64_t>(), rle_from_json(e.at("mask"))};
            if (a.mask.width != img.record.width || a.mask.height != img.record.height) {
                throw error(errc::dimension_mismatch, "annotation size differs from " + img.record.image_id);
            }
            if (!img.record.annotations.empty() && a.timestamp <= img.record.annotations.back().timestamp) {
                throw error(errc::parse_error, "annotation timestamps must increase for " + img.record.image_id);
            }
            img.record.annotations.push_back(std::move(a));
        } else if (type == "score") {
            const auto method = e.at("method").get<std::string>();
            for (const auto& [id, v] : e.at("scores").items()) {
                images_.at(id).record.scores[method] = v.get<double>();
            }
        } else if (type == "plan") {
            batches_.at(e.at("batch_id").get<std::string>())
                .rounds.push_back(allocation_plan_from_json(e.at("plan")));
        } else {
            throw error(errc::parse_error, "unknown event type '" + type + "'");
        }
        seq_ = seq;
    }

    static void transition(Task& t, TaskState from, TaskState to) {
        if (t.state != from) {
            throw error(errc::parse_error, "task " + t.task_id + " cannot move from " +
                                               std::string(to_string(t.state)) + " to " + std::string(to_string(to)));
        }
        t.state = to;
    }

    static Ambiguity label_of(const ImageRecord& r) {
        std::vector<VoteRecord> votes;
        for (const auto& v : r.votes) {
            votes.push_back({r.image_id, v.worker_id, v.vote});
        }
        return aggregate_votes(votes).label;
    }

    std::filesystem::path log_path_;
    WorkerRegistry workers_;
    StoreOptions options_;
    mutable std::mutex mutex_;
    std::ofstream log_;
    std::uint64_t seq_ = 0;
    std::map<std::string, Batch> batches_;
    std::vector<Task> tasks_;
    std::map<std::string, std::size_t> task_index_;
    std::set<std::size_t> open_queue_;
    std::map<ImageId, StoredImage> images_;
    std::map<std::string, std::array<std::set<ImageId>, 2>> history_; // worker -> [vote, segment] images received
};

} // namespace segdiv

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segdiv {

enum class errc {
    run_sum_mismatch,
    dimension_mismatch,
    empty_mask,
    empty_input,
    too_few_vertices,
    empty_reference,
    index_out_of_range,
    insufficient_annotations,
    wrong_vote_count,
    duplicate_worker,
    too_few_masks,
    image_too_small,
    target_too_large,
    single_class,
    too_few_samples,
    parse_error,
    unknown_image,
    non_finite_score,
    no_windows,
    invalid_distribution,
    missing_score,
    pool_too_small,
    id_mismatch,
    empty_ground_truth_set,
    empty_results,
    io_failure,
    missing_image,
    ineligible_worker,
    unknown_task,
    unknown_batch,
    wrong_kind,
    not_assigned,
    vote_count_mismatch,
    vote_cap_reached,
    empty_rasterization,
    multiple_polygons,
    annotation_cap_reached,
    round_one_incomplete,
};

constexpr std::string_view to_string(errc code) noexcept {
    switch (code) {
        case errc::run_sum_mismatch: return "RunSumMismatch";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::empty_mask: return "EmptyMask";
        case errc::empty_input: return "EmptyInput";
        case errc::too_few_vertices: return "TooFewVertices";
        case errc::empty_reference: return "EmptyReference";
        case errc::index_out_of_range: return "IndexOutOfRange";
        case errc::insufficient_annotations: return "InsufficientAnnotations";
        case errc::wrong_vote_count: return "WrongVoteCount";
        case errc::duplicate_worker: return "DuplicateWorker";
        case errc::too_few_masks: return "TooFewMasks";
        case errc::image_too_small: return "ImageTooSmall";
        case errc::target_too_large: return "TargetTooLarge";
        case errc::single_class: return "SingleClass";
        case errc::too_few_samples: return "TooFewSamples";
        case errc::parse_error: return "ParseError";
        case errc::unknown_image: return "UnknownImage";
        case errc::non_finite_score: return "NonFiniteScore";
        case errc::no_windows: return "NoWindows";
        case errc::invalid_distribution: return "InvalidDistribution";
        case errc::missing_score: return "MissingScore";
        case errc::pool_too_small: return "PoolTooSmall";
        case errc::id_mismatch: return "IdMismatch";
        case errc::empty_ground_truth_set: return "EmptyGroundTruthSet";
        case errc::empty_results: return "EmptyResults";
        case errc::io_failure: return "IoFailure";
        case errc::missing_image: return "MissingImage";
        case errc::ineligible_worker: return "IneligibleWorker";
        case errc::unknown_task: return "UnknownTask";
        case errc::unknown_batch: return "UnknownBatch";
        case errc::wrong_kind: return "WrongKind";
        case errc::not_assigned: return "NotAssigned";
        case errc::vote_count_mismatch: return "VoteCountMismatch";
        case errc::vote_cap_reached: return "VoteCapReached";
        case errc::empty_rasterization: return "EmptyRasterization";
        case errc::multiple_polygons: return "MultiplePolygons";
        case errc::annotation_cap_reached: return "AnnotationCapReached";
        case errc::round_one_incomplete: return "RoundOneIncomplete";
    }
    return "Unknown";
}

/// Every failure in the library surfaces as this exception; `code()` is the
/// machine-readable kind, `what()` carries the human-readable detail.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    [[nodiscard]] errc code() const noexcept { return code_; }

private:
    errc code_;
};

} // namespace segdiv

#pragma once

// Corpus manifest: line-delimited JSON, one ImageRecord per line.
//
// {"image_id": "img001", "width": 64, "height": 64, "source": "synthetic",
//  "path": "images/img001.pgm",
//  "votes": [{"worker_id": "w1", "vote": true}, ...],
//  "annotations": [{"worker_id": "w2", "timestamp": 17,
//                   "mask": {"w": 64, "h": 64, "runs": [...]}}, ...],
//  "scores": {"builtin": 0.42}}

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "segdiv/ambiguity.hpp"
#include "segdiv/diversity.hpp"
#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/plan.hpp"

namespace segdiv {

struct AnnotationRecord {
    std::string worker_id;
    std::int64_t timestamp = 0;
    RunLengthMask mask;
};

struct StoredVote {
    std::string worker_id;
    bool vote = false; // true = everyone would pick the same object
};

struct ImageRecord {
    ImageId image_id;
    int width = 0;
    int height = 0;
    std::string source;
    std::string path;
    std::vector<StoredVote> votes;
    std::vector<AnnotationRecord> annotations;
    std::map<std::string, double> scores;
};

inline nlohmann::ordered_json rle_to_json(const RunLengthMask& rle) {
    return {{"w", rle.width}, {"h", rle.height}, {"runs", rle.runs}};
}

inline RunLengthMask rle_from_json(const nlohmann::json& j) {
    try {
        RunLengthMask rle;
        rle.width = j.at("w").get<int>();
        rle.height = j.at("h").get<int>();
        rle.runs = j.at("runs").get<std::vector<std::uint32_t>>();
        return rle;
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, std::string("RLE record: ") + e.what());
    }
}

inline nlohmann::ordered_json to_json(const ImageRecord& r) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["width"] = r.width;
    j["height"] = r.height;
    j["source"] = r.source;
    j["path"] = r.path;
    j["votes"] = nlohmann::ordered_json::array();
    for (const auto& v : r.votes) {
        j["votes"].push_back({{"worker_id", v.worker_id}, {"vote", v.vote}});
    }
    j["annotations"] = nlohmann::ordered_json::array();
    for (const auto& a : r.annotations) {
        j["annotations"].push_back(
            {{"worker_id", a.worker_id}, {"timestamp", a.timestamp}, {"mask", rle_to_json(a.mask)}});
    }
    j["scores"] = nlohmann::ordered_json::object();
    for (const auto& [method, s] : r.scores) {
        j["scores"][method] = s;
    }
    return j;
}

/// Parses and validates one record: annotation dimensions must match the
/// image and timestamps must strictly increase.
inline ImageRecord image_record_from_json(const nlohmann::json& j) {
    ImageRecord r;
    try {
        r.image_id = j.at("image_id").get<std::string>();
        r.width = j.at("width").get<int>();
        r.height = j.at("height").get<int>();
        r.source = j.value("source", "");
        r.path = j.value("path", "");
        if (j.contains("votes")) {
            for (const auto& v : j.at("votes")) {
                r.votes.push_back({v.at("worker_id").get<std::string>(), v.at("vote").get<bool>()});
            }
        }
        if (j.contains("annotations")) {
            for (const auto& a : j.at("annotations")) {
                r.annotations.push_back({a.at("worker_id").get<std::string>(), a.at("timestamp").get<std::int64_t>(),
                                         rle_from_json(a.at("mask"))});
            }
        }
        if (j.contains("scores")) {
            for (const auto& [method, s] : j.at("scores").items()) {
                r.scores[method] = s.get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, std::string("image record: ") + e.what());
    }
    if (r.image_id.empty() || r.width < 1 || r.height < 1) {
        throw error(errc::parse_error, "image record needs an id and positive dimensions");
    }
    std::optional<std::int64_t> last;
    for (const auto& a : r.annotations) {
        if (a.mask.width != r.width || a.mask.height != r.height) {
            throw error(errc::dimension_mismatch, r.image_id + ": annotation size differs from the image");
        }
        if (last && a.timestamp <= *last) {
            throw error(errc::parse_error, r.image_id + ": annotation timestamps must strictly increase");
        }
        last = a.timestamp;
    }
    std::set<std::string> voters;
    for (const auto& v : r.votes) {
        if (!voters.insert(v.worker_id).second) {
            throw error(errc::duplicate_worker, r.image_id + ": " + v.worker_id + " voted twice");
        }
    }
    return r;
}

using Manifest = std::vector<ImageRecord>;

inline Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw error(errc::io_failure, "cannot open manifest " + path.string());
    }
    Manifest out;
    std::set<ImageId> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw error(errc::parse_error, path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto rec = image_record_from_json(j);
        if (!seen.insert(rec.image_id).second) {
            throw error(errc::parse_error, "duplicate image " + rec.image_id + " in manifest");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw error(errc::io_failure, "cannot write manifest " + path.string());
    }
    for (const auto& r : manifest) {
        out << to_json(r).dump() << '\n';
    }
    if (!out) {
        throw error(errc::io_failure, "write failed for " + path.string());
    }
}

inline std::vector<PixelMask> decode_annotations(const ImageRecord& r) {
    std::vector<PixelMask> masks;
    masks.reserve(r.annotations.size());
    for (const auto& a : r.annotations) {
        masks.push_back(decode_rle(a.mask));
    }
    return masks;
}

/// Images with at least one annotation, as annotation sets.
inline AnnotationSets annotation_sets(const Manifest& manifest) {
    AnnotationSets sets;
    for (const auto& r : manifest) {
        if (!r.annotations.empty()) {
            sets.emplace(r.image_id, AnnotationSet(r.image_id, decode_annotations(r)));
        }
    }
    return sets;
}

/// Majority labels for every image carrying exactly five votes.
inline std::map<ImageId, Ambiguity> judger_labels(const Manifest& manifest) {
    std::map<ImageId, Ambiguity> out;
    for (const auto& r : manifest) {
        if (r.votes.size() != votes_per_image) {
            continue;
        }
        std::vector<VoteRecord> votes;
        for (const auto& v : r.votes) {
            votes.push_back({r.image_id, v.worker_id, v.vote});
        }
        out[r.image_id] = aggregate_votes(votes).label;
    }
    return out;
}

/// Drawer-derived labels for every image with two or more non-empty drawings.
inline std::map<ImageId, Ambiguity> drawer_labels(const Manifest& manifest) {
    std::map<ImageId, Ambiguity> out;
    for (const auto& r : manifest) {
        if (r.annotations.size() < 2) {
            continue;
        }
        const auto masks = decode_annotations(r);
        if (std::any_of(masks.begin(), masks.end(), [](const PixelMask& m) { return m.empty(); })) {
            continue;
        }
        out[r.image_id] = label_from_drawings(r.image_id, masks).label;
    }
    return out;
}

inline std::set<ImageId> image_ids(const Manifest& manifest) {
    std::set<ImageId> ids;
    for (const auto& r : manifest) {
        ids.insert(r.image_id);
    }
    return ids;
}

} // namespace segdiv

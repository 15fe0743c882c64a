#pragma once

// Seeded synthetic corpora: flat-background images with bright disk blobs,
// ground-truth ambiguity labels, judger votes and annotation pools.
//
// Unambiguous images hold one large blob and every annotator outlines it
// (now and then missing a single boundary pixel). Ambiguous images hold 2-4
// smaller blobs and each annotator outlines one of them, so pools disagree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "segdiv/ambiguity.hpp"
#include "segdiv/error.hpp"
#include "segdiv/image.hpp"
#include "segdiv/manifest.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/random.hpp"

namespace segdiv {

struct Blob {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double intensity = 1.0;
};

struct SyntheticImage {
    ImageId image_id;
    Ambiguity label = Ambiguity::unambiguous;
    GrayImage image;
    std::vector<Blob> blobs;
    std::vector<PixelMask> pool;  // annotations in collection order
    std::vector<bool> votes;      // judger "same object" votes
};

struct SyntheticConfig {
    std::size_t images = 100;
    double ambiguous_fraction = 0.3;
    int width = 64;
    int height = 64;
    std::size_t pool_size = 5;
    std::uint64_t seed = 0;
};

inline PixelMask blob_mask(const Blob& b, int width, int height) {
    PixelMask m(width, height);
    const double r2 = b.radius * b.radius;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x + 0.5 - b.cx;
            const double dy = y + 0.5 - b.cy;
            if (dx * dx + dy * dy <= r2) {
                m.set(x, y, true);
            }
        }
    }
    return m;
}

namespace detail {

inline Blob place_blob(Rng& rng, int width, int height, double radius) {
    const double lo_x = radius + 1.0;
    const double lo_y = radius + 1.0;
    return {rng.uniform(lo_x, width - lo_x), rng.uniform(lo_y, height - lo_y), radius, rng.uniform(0.7, 1.0)};
}

inline bool separated(const Blob& a, const Blob& b, double gap) {
    return std::hypot(a.cx - b.cx, a.cy - b.cy) >= a.radius + b.radius + gap;
}

inline std::vector<Blob> ambiguous_blobs(Rng& rng, int width, int height) {
    const double side = std::min(width, height);
    while (true) {
        const int count = rng.integer(2, 4);
        std::vector<Blob> blobs;
        for (int attempt = 0; attempt < 200 && static_cast<int>(blobs.size()) < count; ++attempt) {
            const Blob b = place_blob(rng, width, height, side * rng.uniform(0.08, 0.14));
            if (std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) { return separated(b, o, 3.0); })) {
                blobs.push_back(b);
            }
        }
        if (static_cast<int>(blobs.size()) == count) {
            return blobs;
        }
    }
}

inline GrayImage render(const std::vector<Blob>& blobs, int width, int height, double background) {
    GrayImage img(width, height, background);
    for (const auto& b : blobs) {
        const auto m = blob_mask(b, width, height);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                if (m.at(x, y)) {
                    img.at(x, y) = b.intensity;
                }
            }
        }
    }
    return img;
}

/// Drops one boundary pixel, keeping the mask non-empty.
inline PixelMask jitter(const PixelMask& mask, Rng& rng) {
    const auto edge = boundary_pixels(mask);
    if (edge.size() < 2) {
        return mask;
    }
    PixelMask out = mask;
    const auto& p = edge[rng.below(edge.size())];
    out.set(p.x, p.y, false);
    return out;
}

/// Blob picks for an ambiguous pool: no blob is chosen by more than three
/// annotators (or the fewest that still fills the pool) and at least two
/// distinct blobs appear.
inline std::vector<std::size_t> ambiguous_picks(Rng& rng, std::size_t blobs, std::size_t pool) {
    const std::size_t cap = std::max<std::size_t>(
        {1, std::min<std::size_t>(3, (pool + 1) / 2), (pool + blobs - 1) / blobs});
    while (true) {
        std::vector<std::size_t> picks(pool);
        std::vector<std::size_t> counts(blobs, 0);
        for (auto& p : picks) {
            p = rng.below(blobs);
            ++counts[p];
        }
        const auto distinct = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
        if (*std::max_element(counts.begin(), counts.end()) <= cap && (pool < 2 || distinct >= 2)) {
            return picks;
        }
    }
}

} // namespace detail

inline std::vector<SyntheticImage> synthesize_corpus(const SyntheticConfig& config) {
    if (config.width < 16 || config.height < 16) {
        throw error(errc::image_too_small, "synthetic images need at least 16x16 pixels");
    }
    if (!(config.ambiguous_fraction >= 0.0 && config.ambiguous_fraction <= 1.0)) {
        throw error(errc::invalid_distribution, "ambiguous fraction must lie in [0, 1]");
    }
    Rng rng(config.seed);
    const auto n = config.images;
    const auto n_ambiguous = static_cast<std::size_t>(std::llround(config.ambiguous_fraction * static_cast<double>(n)));
    // Which images are ambiguous is itself shuffled so labels do not follow ids.
    std::vector<bool> ambiguous(n, false);
    for (std::size_t i = 0; i < n_ambiguous; ++i) {
        ambiguous[i] = true;
    }
    std::vector<bool> shuffled(n);
    const auto perm = seeded_permutation(n, rng.next());
    for (std::size_t i = 0; i < n; ++i) {
        shuffled[perm[i]] = ambiguous[i];
    }

    const int w = config.width;
    const int h = config.height;
    const double side = std::min(w, h);
    std::vector<SyntheticImage> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SyntheticImage s;
        char id[32];
        std::snprintf(id, sizeof id, "img%04zu", i);
        s.image_id = id;
        s.label = shuffled[i] ? Ambiguity::ambiguous : Ambiguity::unambiguous;
        const double background = rng.uniform(0.05, 0.3);
        if (s.label == Ambiguity::unambiguous) {
            s.blobs.push_back(detail::place_blob(rng, w, h, side * rng.uniform(0.2, 0.3)));
            const auto mask = blob_mask(s.blobs.front(), w, h);
            for (std::size_t a = 0; a < config.pool_size; ++a) {
                s.pool.push_back(rng.uniform() < 0.3 ? detail::jitter(mask, rng) : mask);
            }
        } else {
            s.blobs = detail::ambiguous_blobs(rng, w, h);
            std::vector<PixelMask> masks;
            for (const auto& b : s.blobs) {
                masks.push_back(blob_mask(b, w, h));
            }
            for (auto p : detail::ambiguous_picks(rng, s.blobs.size(), config.pool_size)) {
                s.pool.push_back(masks[p]);
            }
        }
        s.image = detail::render(s.blobs, w, h, background);
        // Five judgers; the majority always matches the label.
        const int agree = rng.integer(3, 5);
        const bool yes = s.label == Ambiguity::unambiguous;
        for (int v = 0; v < static_cast<int>(votes_per_image); ++v) {
            s.votes.push_back(v < agree ? yes : !yes);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Oracle unambiguity scores: 1 for unambiguous images, 0 for ambiguous.
inline std::map<ImageId, double> oracle_scores(const std::vector<SyntheticImage>& corpus) {
    std::map<ImageId, double> out;
    for (const auto& s : corpus) {
        out[s.image_id] = s.label == Ambiguity::unambiguous ? 1.0 : 0.0;
    }
    return out;
}

inline AnnotationSets annotation_sets(const std::vector<SyntheticImage>& corpus) {
    AnnotationSets sets;
    for (const auto& s : corpus) {
        sets.emplace(s.image_id, AnnotationSet(s.image_id, s.pool));
    }
    return sets;
}

/// Writes each image as <dir>/<id>.pgm and returns the matching manifest;
/// record paths are `path_prefix` + <id>.pgm.
inline Manifest write_corpus(const std::vector<SyntheticImage>& corpus, const std::filesystem::path& dir,
                             const std::string& path_prefix) {
    std::filesystem::create_directories(dir);
    Manifest manifest;
    for (const auto& s : corpus) {
        write_pgm(dir / (s.image_id + ".pgm"), s.image);
        ImageRecord r;
        r.image_id = s.image_id;
        r.width = s.image.width;
        r.height = s.image.height;
        r.source = s.label == Ambiguity::unambiguous ? "synthetic:unambiguous" : "synthetic:ambiguous";
        r.path = path_prefix + s.image_id + ".pgm";
        for (std::size_t v = 0; v < s.votes.size(); ++v) {
            r.votes.push_back({"judge" + std::to_string(v), static_cast<bool>(s.votes[v])});
        }
        for (std::size_t a = 0; a < s.pool.size(); ++a) {
            r.annotations.push_back({"drawer" + std::to_string(a), static_cast<std::int64_t>(a + 1), encode_rle(s.pool[a])});
        }
        manifest.push_back(std::move(r));
    }
    return manifest;
}

} // namespace segdiv

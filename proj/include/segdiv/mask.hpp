#pragma once

// Binary foreground masks and the geometric primitives built on them.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "segdiv/error.hpp"

namespace segdiv {

struct Pixel {
    int x = 0;
    int y = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
    friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Row-major binary mask; 1 = foreground.
class PixelMask {
public:
    PixelMask() = default;

    PixelMask(int width, int height) : width_(width), height_(height) {
        if (width < 1 || height < 1) {
            throw error(errc::dimension_mismatch, "mask dimensions must be >= 1");
        }
        bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
    }

    PixelMask(int width, int height, std::vector<std::uint8_t> bits) : width_(width), height_(height) {
        if (width < 1 || height < 1) {
            throw error(errc::dimension_mismatch, "mask dimensions must be >= 1");
        }
        if (bits.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw error(errc::dimension_mismatch, "bit count does not match width*height");
        }
        for (auto& b : bits) {
            if (b > 1) {
                throw error(errc::parse_error, "mask bits must be 0 or 1");
            }
        }
        bits_ = std::move(bits);
    }

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }
    [[nodiscard]] std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    [[nodiscard]] bool at(int x, int y) const noexcept {
        return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
    }
    void set(int x, int y, bool fg = true) noexcept {
        bits_[static_cast<std::size_t>(y) * width_ + x] = fg ? 1 : 0;
    }
    [[nodiscard]] bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    [[nodiscard]] std::size_t foreground_count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    [[nodiscard]] bool empty() const noexcept { return foreground_count() == 0; }

    [[nodiscard]] bool same_shape(const PixelMask& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const PixelMask&, const PixelMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Row-major, background-first run lengths. Only the first run may be zero.
struct RunLengthMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> runs;
    friend bool operator==(const RunLengthMask&, const RunLengthMask&) = default;
};

/// Inclusive pixel coordinates.
struct BoundingBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    [[nodiscard]] long long area() const noexcept {
        return static_cast<long long>(x_max - x_min + 1) * (y_max - y_min + 1);
    }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Implicitly closed outline in continuous image coordinates.
struct PolygonOutline {
    std::vector<Point> vertices;
};

inline void require_same_shape(const PixelMask& a, const PixelMask& b) {
    if (!a.same_shape(b)) {
        throw error(errc::dimension_mismatch,
                    std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                        std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
}

inline RunLengthMask encode_rle(const PixelMask& mask) {
    RunLengthMask rle{mask.width(), mask.height(), {}};
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (auto b : mask.bits()) {
        if (b == current) {
            ++run;
        } else {
            rle.runs.push_back(run);
            current = b;
            run = 1;
        }
    }
    rle.runs.push_back(run);
    return rle;
}

inline PixelMask decode_rle(const RunLengthMask& rle) {
    if (rle.width < 1 || rle.height < 1) {
        throw error(errc::dimension_mismatch, "RLE dimensions must be >= 1");
    }
    const auto total = static_cast<std::uint64_t>(rle.width) * static_cast<std::uint64_t>(rle.height);
    const auto sum = std::accumulate(rle.runs.begin(), rle.runs.end(), std::uint64_t{0});
    if (sum != total) {
        throw error(errc::run_sum_mismatch,
                    "runs sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
    }
    for (std::size_t i = 1; i < rle.runs.size(); ++i) {
        if (rle.runs[i] == 0) {
            throw error(errc::parse_error, "only the first run may be zero");
        }
    }
    std::vector<std::uint8_t> bits;
    bits.reserve(total);
    std::uint8_t value = 0;
    for (auto run : rle.runs) {
        bits.insert(bits.end(), run, value);
        value ^= 1;
    }
    return PixelMask(rle.width, rle.height, std::move(bits));
}

/// |a & b| / |a | b|; two empty masks agree perfectly.
inline double iou(const PixelMask& a, const PixelMask& b) {
    require_same_shape(a, b);
    std::size_t inter = 0;
    std::size_t uni = 0;
    auto ab = a.bits();
    auto bb = b.bits();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        inter += (ab[i] & bb[i]);
        uni += (ab[i] | bb[i]);
    }
    if (uni == 0) {
        return 1.0;
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline BoundingBox bounding_box(const PixelMask& mask) {
    BoundingBox box{mask.width(), mask.height(), -1, -1};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) {
                box.x_min = std::min(box.x_min, x);
                box.y_min = std::min(box.y_min, y);
                box.x_max = std::max(box.x_max, x);
                box.y_max = std::max(box.y_max, y);
            }
        }
    }
    if (box.x_max < 0) {
        throw error(errc::empty_mask, "bounding box of an empty mask");
    }
    return box;
}

inline double box_iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const int ix0 = std::max(a.x_min, b.x_min);
    const int iy0 = std::max(a.y_min, b.y_min);
    const int ix1 = std::min(a.x_max, b.x_max);
    const int iy1 = std::min(a.y_max, b.y_max);
    long long inter = 0;
    if (ix1 >= ix0 && iy1 >= iy0) {
        inter = static_cast<long long>(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
    }
    const long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

struct ComponentLabels {
    int count = 0;
    std::vector<int> labels; // row-major, 0 = background
};

/// 8-connected components, labelled 1..k in row-major first-encounter order.
inline ComponentLabels connected_components(const PixelMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    ComponentLabels out;
    out.labels.assign(mask.size(), 0);
    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int idx = y * w + x;
            if (!mask.at(x, y) || out.labels[idx] != 0) {
                continue;
            }
            const int label = ++out.count;
            out.labels[idx] = label;
            stack.push_back(idx);
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int cx = cur % w;
                const int cy = cur / w;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if ((dx == 0 && dy == 0) || !mask.contains(nx, ny)) {
                            continue;
                        }
                        const int nidx = ny * w + nx;
                        if (mask.at(nx, ny) && out.labels[nidx] == 0) {
                            out.labels[nidx] = label;
                            stack.push_back(nidx);
                        }
                    }
                }
            }
        }
    }
    return out;
}

/// Foreground pixels touching a background 4-neighbour or the image border,
/// in row-major order.
inline std::vector<Pixel> boundary_pixels(const PixelMask& mask) {
    std::vector<Pixel> out;
    const int w = mask.width();
    const int h = mask.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) {
                continue;
            }
            const bool on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            if (on_border || !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
                !mask.at(x, y + 1)) {
                out.push_back({x, y});
            }
        }
    }
    return out;
}

/// Even-odd fill sampled at pixel centres. An edge crosses the scanline
/// through a centre when exactly one endpoint lies strictly below it
/// (half-open in y); the centre is inside when an odd number of crossings lie
/// strictly to its right.
inline PixelMask rasterize_polygon(const PolygonOutline& poly, int width, int height) {
    const auto& v = poly.vertices;
    if (v.size() < 3) {
        throw error(errc::too_few_vertices, std::to_string(v.size()) + " vertices");
    }
    PixelMask mask(width, height);
    std::vector<double> crossings;
    for (int y = 0; y < height; ++y) {
        const double cy = y + 0.5;
        crossings.clear();
        for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
            const Point& p = v[i];
            const Point& q = v[j];
            if ((p.y > cy) != (q.y > cy)) {
                crossings.push_back(p.x + (cy - p.y) * (q.x - p.x) / (q.y - p.y));
            }
        }
        if (crossings.empty()) {
            continue;
        }
        std::sort(crossings.begin(), crossings.end());
        // crossings_right counts entries > cx; walk x left to right.
        std::size_t passed = 0;
        for (int x = 0; x < width; ++x) {
            const double cx = x + 0.5;
            while (passed < crossings.size() && crossings[passed] <= cx) {
                ++passed;
            }
            if ((crossings.size() - passed) % 2 == 1) {
                mask.set(x, y);
            }
        }
    }
    return mask;
}

/// Strict per-pixel majority; ties fall to background.
inline PixelMask majority_reference(std::span<const PixelMask> masks) {
    if (masks.empty()) {
        throw error(errc::empty_input, "majority over zero masks");
    }
    const PixelMask& first = masks.front();
    for (const auto& m : masks) {
        require_same_shape(first, m);
    }
    std::vector<std::uint16_t> votes(first.size(), 0);
    for (const auto& m : masks) {
        auto b = m.bits();
        for (std::size_t i = 0; i < b.size(); ++i) {
            votes[i] += b[i];
        }
    }
    std::vector<std::uint8_t> bits(first.size(), 0);
    for (std::size_t i = 0; i < votes.size(); ++i) {
        bits[i] = 2 * static_cast<std::size_t>(votes[i]) > masks.size() ? 1 : 0;
    }
    return PixelMask(first.width(), first.height(), std::move(bits));
}

} // namespace segdiv

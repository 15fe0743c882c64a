#pragma once

// Global gradient-orientation descriptor: 4x4 spatial cells x 8 unsigned
// orientation bins over a 128x128 resampling of the image.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "segdiv/error.hpp"
#include "segdiv/image.hpp"

namespace segdiv {

using FeatureVector = std::vector<double>;

namespace hog {
inline constexpr int canvas = 128;
inline constexpr int cells = 4;
inline constexpr int bins = 8;
inline constexpr int length = cells * cells * bins;
inline constexpr double epsilon = 1e-6;
inline constexpr int min_side = 8;
} // namespace hog

/// Bilinear resampling with pixel-centre alignment and clamped borders.
inline GrayImage resize_bilinear(const GrayImage& src, int width, int height) {
    GrayImage out(width, height);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double tx = fx - x0;
            const double top = src.at(x0, y0) * (1.0 - tx) + src.at(x1, y0) * tx;
            const double bottom = src.at(x0, y1) * (1.0 - tx) + src.at(x1, y1) * tx;
            out.at(x, y) = top * (1.0 - ty) + bottom * ty;
        }
    }
    return out;
}

inline FeatureVector extract_features(const GrayImage& image) {
    if (image.width < hog::min_side || image.height < hog::min_side) {
        throw error(errc::image_too_small, std::to_string(image.width) + "x" + std::to_string(image.height) +
                                               " is below the 8x8 minimum");
    }
    const GrayImage img = resize_bilinear(image, hog::canvas, hog::canvas);
    constexpr int n = hog::canvas;
    constexpr int cell_side = n / hog::cells;
    constexpr double bin_width = std::numbers::pi / hog::bins;

    FeatureVector out(hog::length, 0.0);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double gx = 0.5 * (img.at(std::min(x + 1, n - 1), y) - img.at(std::max(x - 1, 0), y));
            const double gy = 0.5 * (img.at(x, std::min(y + 1, n - 1)) - img.at(x, std::max(y - 1, 0)));
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) {
                continue;
            }
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) {
                theta += std::numbers::pi;
            }
            int bin = static_cast<int>(theta / bin_width);
            if (bin >= hog::bins) {
                bin -= hog::bins; // theta == pi folds back onto 0
            }
            const int cell = (y / cell_side) * hog::cells + (x / cell_side);
            out[static_cast<std::size_t>(cell) * hog::bins + bin] += mag;
        }
    }
    for (int c = 0; c < hog::cells * hog::cells; ++c) {
        double norm2 = 0.0;
        for (int b = 0; b < hog::bins; ++b) {
            norm2 += out[c * hog::bins + b] * out[c * hog::bins + b];
        }
        const double scale = 1.0 / (std::sqrt(norm2) + hog::epsilon);
        for (int b = 0; b < hog::bins; ++b) {
            out[c * hog::bins + b] *= scale;
        }
    }
    return out;
}

} // namespace segdiv

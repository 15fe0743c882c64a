#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "segdiv/mask.hpp"

namespace segdiv {

/// Exact squared Euclidean distance transform (lower envelope of parabolas,
/// one pass per axis). Entry i holds the squared distance from pixel i to the
/// nearest pixel with features[i] != 0, or +inf when there are none.
inline std::vector<double> squared_distance_transform(std::span<const std::uint8_t> features, int width,
                                                      int height) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        grid[i] = features[i] ? 0.0 : inf;
    }

    const int longest = std::max(width, height);
    std::vector<double> f(longest);
    std::vector<double> d(longest);
    std::vector<int> v(longest);
    std::vector<double> z(longest + 1);

    auto pass = [&](int n) {
        int k = 0;
        int first = -1;
        for (int q = 0; q < n; ++q) {
            if (f[q] < inf) {
                first = q;
                break;
            }
        }
        if (first < 0) {
            for (int q = 0; q < n; ++q) {
                d[q] = inf;
            }
            return;
        }
        v[0] = first;
        z[0] = -inf;
        z[1] = inf;
        for (int q = first + 1; q < n; ++q) {
            if (f[q] == inf) {
                continue;
            }
            double s = 0.0;
            while (true) {
                const int p = v[k];
                s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                    (2.0 * (q - p));
                // z[0] is -inf, so k never drops below 0.
                if (s <= z[k]) {
                    --k;
                } else {
                    break;
                }
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = inf;
        }
        k = 0;
        for (int q = 0; q < n; ++q) {
            while (z[k + 1] < q) {
                ++k;
            }
            const double diff = q - v[k];
            d[q] = diff * diff + f[v[k]];
        }
    };

    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) {
            f[y] = grid[static_cast<std::size_t>(y) * width + x];
        }
        pass(height);
        for (int y = 0; y < height; ++y) {
            grid[static_cast<std::size_t>(y) * width + x] = d[y];
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            f[x] = grid[static_cast<std::size_t>(y) * width + x];
        }
        pass(width);
        for (int x = 0; x < width; ++x) {
            grid[static_cast<std::size_t>(y) * width + x] = d[x];
        }
    }
    return grid;
}

inline std::vector<double> squared_distance_transform(const PixelMask& mask) {
    return squared_distance_transform(mask.bits(), mask.width(), mask.height());
}

} // namespace segdiv

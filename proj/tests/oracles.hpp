#pragma once

// Slow, direct reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "segdiv/allocation.hpp"
#include "segdiv/diversity.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/random.hpp"

namespace oracle {

using segdiv::PixelMask;

/// Weighted F-measure by brute force: exhaustive nearest-foreground search,
/// direct 2D Gaussian window, exhaustive distance to the reference.
inline double weighted_fmeasure(const PixelMask& cand, const PixelMask& ref) {
    const int w = ref.width();
    const int h = ref.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<int> fg;
    for (int i = 0; i < static_cast<int>(n); ++i) {
        if (ref.bits()[i]) {
            fg.push_back(i);
        }
    }
    std::vector<double> e(n), et(n), delta(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        e[i] = ref.bits()[i] != cand.bits()[i] ? 1.0 : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (ref.bits()[i]) {
            et[i] = e[i];
            continue;
        }
        const int x = static_cast<int>(i) % w;
        const int y = static_cast<int>(i) / w;
        long best = std::numeric_limits<long>::max();
        int best_j = -1;
        for (int j : fg) {
            const long dx = j % w - x;
            const long dy = j / w - y;
            const long d2 = dx * dx + dy * dy;
            if (d2 < best) {
                best = d2;
                best_j = j;
            }
        }
        et[i] = e[best_j];
        delta[i] = std::sqrt(static_cast<double>(best));
    }
    const double sigma = 5.0;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int x = static_cast<int>(i) % w;
        const int y = static_cast<int>(i) / w;
        if (ref.bits()[i]) {
            double num = 0.0, den = 0.0;
            for (int dy = -3; dy <= 3; ++dy) {
                for (int dx = -3; dx <= 3; ++dx) {
                    const int xx = x + dx;
                    const int yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= w || yy >= h) {
                        continue;
                    }
                    const double g = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
                    num += g * et[static_cast<std::size_t>(yy) * w + xx];
                    den += g;
                }
            }
            const double ew = std::min(e[i], num / den);
            tp += 1.0 - ew;
            fn += ew;
        } else {
            fp += e[i] * (2.0 - std::exp(std::log(0.5) / 5.0 * delta[i]));
        }
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

inline std::vector<std::pair<int, int>> boundary(const PixelMask& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.at(x, y)) {
                continue;
            }
            bool edge = false;
            const int nb[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
            for (const auto& d : nb) {
                const int xx = x + d[0];
                const int yy = y + d[1];
                if (xx < 0 || yy < 0 || xx >= m.width() || yy >= m.height() || !m.at(xx, yy)) {
                    edge = true;
                }
            }
            if (edge) {
                out.emplace_back(x, y);
            }
        }
    }
    return out;
}

/// Symmetric mean Chamfer distance over all boundary pairs.
inline double chamfer(const PixelMask& a, const PixelMask& b) {
    const auto ba = boundary(a);
    const auto bb = boundary(b);
    auto directed = [](const auto& from, const auto& to) {
        double acc = 0.0;
        for (const auto& [x, y] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [u, v] : to) {
                best = std::min(best, std::hypot(double(x - u), double(y - v)));
            }
            acc += best;
        }
        return acc / static_cast<double>(from.size());
    };
    return 0.5 * (directed(ba, bb) + directed(bb, ba));
}

/// Even-odd crossing test at pixel centres.
inline PixelMask rasterize(const segdiv::PolygonOutline& poly, int w, int h) {
    PixelMask m(w, h);
    const auto& v = poly.vertices;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            bool inside = false;
            for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
                if ((v[i].y > py) != (v[j].y > py) &&
                    px < (v[j].x - v[i].x) * (py - v[i].y) / (v[j].y - v[i].y) + v[i].x) {
                    inside = !inside;
                }
            }
            m.set(x, y, inside);
        }
    }
    return m;
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                off += a[p][q] * a[p][q];
            }
        }
        if (off < 1e-30) {
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) {
                    continue;
                }
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p];
                    const double akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k];
                    const double aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) {
        ev[i] = a[i][i];
    }
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

/// AP by enumerating every distinct threshold and counting from scratch.
inline double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
    std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
    const auto total = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    double ap = 0.0;
    double prev_recall = 0.0;
    for (double t : thresholds) {
        std::size_t tp = 0, predicted = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                ++predicted;
                tp += positive[i] ? 1 : 0;
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(total);
        const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

/// Batch diversity of one selection, images in id order, annotations in
/// collection order.
inline double selection_total(const segdiv::DiversityTable& table, const std::set<segdiv::ImageId>& chosen,
                              std::size_t extra, segdiv::Measure m) {
    double total = 0.0;
    for (const auto& [id, scores] : table) {
        double c = 0.0;
        const std::size_t upto = chosen.contains(id) ? extra : 0;
        for (std::size_t a = 0; a <= upto; ++a) {
            c += segdiv::measure_value(scores[a], m);
        }
        total += c;
    }
    return total;
}

/// Best total over every subset of exactly `budget` images.
inline double best_subset_total(const segdiv::DiversityTable& table, std::size_t budget, std::size_t extra,
                                segdiv::Measure m) {
    std::vector<segdiv::ImageId> ids;
    for (const auto& [id, s] : table) {
        ids.push_back(id);
    }
    const std::size_t n = ids.size();
    double best = -1.0;
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        if (static_cast<std::size_t>(__builtin_popcount(bits)) != budget) {
            continue;
        }
        std::set<segdiv::ImageId> chosen;
        for (std::size_t i = 0; i < n; ++i) {
            if (bits & (1u << i)) {
                chosen.insert(ids[i]);
            }
        }
        best = std::max(best, selection_total(table, chosen, extra, m));
    }
    return best;
}

inline PixelMask random_mask(segdiv::Rng& rng, int w, int h, double density) {
    PixelMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            m.set(x, y, rng.uniform() < density);
        }
    }
    return m;
}

/// Union of a few random rectangles; never empty.
inline PixelMask random_blobs(segdiv::Rng& rng, int w, int h) {
    PixelMask m(w, h);
    const int count = rng.integer(1, 3);
    for (int k = 0; k < count; ++k) {
        const int x0 = rng.integer(0, w - 1);
        const int y0 = rng.integer(0, h - 1);
        const int x1 = rng.integer(x0, std::min(w - 1, x0 + w / 2));
        const int y1 = rng.integer(y0, std::min(h - 1, y0 + h / 2));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                m.set(x, y);
            }
        }
    }
    return m;
}

} // namespace oracle

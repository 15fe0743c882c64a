#pragma once

// Grayscale images and the plain/binary portable-anymap codecs used for
// masks (P1) and scoring inputs (P2/P5).

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"

namespace segdiv {

/// Row-major luminance in [0, 1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    [[nodiscard]] double at(int x, int y) const noexcept {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    double& at(int x, int y) noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

class PnmReader {
public:
    explicit PnmReader(std::string data) : data_(std::move(data)) {}

    std::string magic() {
        skip_space();
        if (pos_ + 2 > data_.size()) {
            throw error(errc::parse_error, "truncated PNM header");
        }
        std::string m = data_.substr(pos_, 2);
        pos_ += 2;
        return m;
    }

    long long integer() {
        skip_space();
        if (pos_ >= data_.size() || !std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
            throw error(errc::parse_error, "expected integer in PNM stream");
        }
        long long v = 0;
        while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
            v = v * 10 + (data_[pos_] - '0');
            if (v > (1LL << 40)) {
                throw error(errc::parse_error, "PNM value out of range");
            }
            ++pos_;
        }
        return v;
    }

    // P1 rasters may pack digits without separators.
    int bit() {
        skip_space();
        if (pos_ >= data_.size()) {
            throw error(errc::parse_error, "truncated P1 raster");
        }
        const char c = data_[pos_++];
        if (c != '0' && c != '1') {
            throw error(errc::parse_error, "P1 raster value must be 0 or 1");
        }
        return c - '0';
    }

    // Exactly one whitespace byte separates the header from a binary raster.
    std::string_view raw(std::size_t count) {
        ++pos_;
        if (pos_ + count > data_.size()) {
            throw error(errc::parse_error, "truncated binary raster");
        }
        return std::string_view(data_).substr(pos_, count);
    }

private:
    void skip_space() {
        while (pos_ < data_.size()) {
            const char c = data_[pos_];
            if (c == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string data_;
    std::size_t pos_ = 0;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error(errc::io_failure, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(data.data(), static_cast<std::streamsize>(data.size()))) {
        throw error(errc::io_failure, "cannot write " + path.string());
    }
}

} // namespace detail

inline PixelMask parse_pbm(std::string data) {
    detail::PnmReader r(std::move(data));
    if (r.magic() != "P1") {
        throw error(errc::parse_error, "mask files must be plain PBM (P1)");
    }
    const auto w = r.integer();
    const auto h = r.integer();
    if (w < 1 || h < 1 || w * h > (1LL << 28)) {
        throw error(errc::parse_error, "invalid PBM dimensions");
    }
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(w * h));
    for (auto& b : bits) {
        b = static_cast<std::uint8_t>(r.bit());
    }
    return PixelMask(static_cast<int>(w), static_cast<int>(h), std::move(bits));
}

inline PixelMask read_pbm(const std::filesystem::path& path) { return parse_pbm(detail::slurp(path)); }

inline std::string format_pbm(const PixelMask& mask) {
    std::string out = "P1\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n";
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (x > 0) {
                out += ' ';
            }
            out += mask.at(x, y) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

inline void write_pbm(const std::filesystem::path& path, const PixelMask& mask) {
    detail::write_file(path, format_pbm(mask));
}

/// Reads an 8-bit graymap, plain (P2) or binary (P5), scaled to [0, 1].
inline GrayImage parse_pgm(std::string data) {
    detail::PnmReader r(std::move(data));
    const std::string magic = r.magic();
    if (magic != "P2" && magic != "P5") {
        throw error(errc::parse_error, "expected P2 or P5 graymap, got " + magic);
    }
    const auto w = r.integer();
    const auto h = r.integer();
    const auto maxval = r.integer();
    if (w < 1 || h < 1 || w * h > (1LL << 28)) {
        throw error(errc::parse_error, "invalid PGM dimensions");
    }
    if (maxval < 1 || maxval > 255) {
        throw error(errc::parse_error, "only 8-bit graymaps are supported");
    }
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    const double scale = 1.0 / static_cast<double>(maxval);
    if (magic == "P2") {
        for (auto& p : img.pixels) {
            const auto v = r.integer();
            if (v > maxval) {
                throw error(errc::parse_error, "graymap value exceeds maxval");
            }
            p = static_cast<double>(v) * scale;
        }
    } else {
        auto raster = r.raw(img.pixels.size());
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            const auto v = static_cast<unsigned char>(raster[i]);
            if (v > maxval) {
                throw error(errc::parse_error, "graymap value exceeds maxval");
            }
            img.pixels[i] = static_cast<double>(v) * scale;
        }
    }
    return img;
}

inline GrayImage read_pgm(const std::filesystem::path& path) { return parse_pgm(detail::slurp(path)); }

struct ImageSize {
    int width = 0;
    int height = 0;
};

/// Header-only probe; used when building manifests.
inline ImageSize probe_pnm_size(const std::filesystem::path& path) {
    detail::PnmReader r(detail::slurp(path));
    const std::string magic = r.magic();
    if (magic.size() != 2 || magic[0] != 'P' || magic[1] < '1' || magic[1] > '6') {
        throw error(errc::parse_error, "not a PNM file: " + path.string());
    }
    const auto w = r.integer();
    const auto h = r.integer();
    return {static_cast<int>(w), static_cast<int>(h)};
}

/// Writes a binary (P5) graymap, quantising [0, 1] to 0..255.
inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    for (double v : img.pixels) {
        const double c = std::clamp(v, 0.0, 1.0);
        out += static_cast<char>(static_cast<unsigned char>(c * 255.0 + 0.5));
    }
    detail::write_file(path, out);
}

} // namespace segdiv

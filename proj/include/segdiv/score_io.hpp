#pragma once

// Line-delimited score, detection and subitizing files:
//   image_id<TAB>score
//   image_id<TAB>x_min,y_min,x_max,y_max<TAB>confidence
//   image_id<TAB>p0,p1,p2,p3,p4plus

#include <cerrno>
#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "segdiv/error.hpp"
#include "segdiv/plan.hpp"
#include "segdiv/saliency.hpp"

namespace segdiv {

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

/// Accepts anything strtod accepts (including nan/inf) but requires the
/// whole field to be consumed.
inline double parse_double(std::string_view field, const std::string& where) {
    const std::string buf(field);
    if (buf.empty()) {
        throw error(errc::parse_error, where + ": empty number");
    }
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || errno == ERANGE) {
        throw error(errc::parse_error, where + ": bad number '" + buf + "'");
    }
    return v;
}

inline int parse_int(std::string_view field, const std::string& where) {
    const double v = parse_double(field, where);
    if (v != std::floor(v) || std::abs(v) > 1e9) {
        throw error(errc::parse_error, where + ": expected integer, got '" + std::string(field) + "'");
    }
    return static_cast<int>(v);
}

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw error(errc::io_failure, "cannot open " + path.string());
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        fn(line, path.filename().string() + ":" + std::to_string(lineno));
    }
}

inline void check_known(const std::optional<std::set<ImageId>>& known, const ImageId& id, const std::string& where) {
    if (known && !known->contains(id)) {
        throw error(errc::unknown_image, where + ": unknown image '" + id + "'");
    }
}

} // namespace detail

/// One finite score per image. When `known` is given, ids outside it are
/// rejected.
inline std::map<ImageId, double> ingest_scores(const std::filesystem::path& path,
                                               const std::optional<std::set<ImageId>>& known = std::nullopt) {
    std::map<ImageId, double> out;
    detail::for_each_record(path, [&](std::string_view line, const std::string& where) {
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 2 || fields[0].empty()) {
            throw error(errc::parse_error, where + ": expected image_id<TAB>score");
        }
        const ImageId id(fields[0]);
        detail::check_known(known, id, where);
        const double v = detail::parse_double(fields[1], where);
        if (!std::isfinite(v)) {
            throw error(errc::non_finite_score, where + ": score for " + id + " is not finite");
        }
        if (!out.emplace(id, v).second) {
            throw error(errc::parse_error, where + ": duplicate image '" + id + "'");
        }
    });
    return out;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_scores(const std::filesystem::path& path, const std::map<ImageId, double>& scores) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw error(errc::io_failure, "cannot write " + path.string());
    }
    for (const auto& [id, s] : scores) {
        out << id << '\t' << format_double(s) << '\n';
    }
    if (!out) {
        throw error(errc::io_failure, "write failed for " + path.string());
    }
}

inline std::map<ImageId, std::vector<DetectionWindow>> ingest_detections(
    const std::filesystem::path& path, const std::optional<std::set<ImageId>>& known = std::nullopt) {
    std::map<ImageId, std::vector<DetectionWindow>> out;
    detail::for_each_record(path, [&](std::string_view line, const std::string& where) {
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 3 || fields[0].empty()) {
            throw error(errc::parse_error, where + ": expected image_id<TAB>box<TAB>confidence");
        }
        const ImageId id(fields[0]);
        detail::check_known(known, id, where);
        const auto coords = detail::split(fields[1], ',');
        if (coords.size() != 4) {
            throw error(errc::parse_error, where + ": box needs four coordinates");
        }
        DetectionWindow w;
        w.box = {detail::parse_int(coords[0], where), detail::parse_int(coords[1], where),
                 detail::parse_int(coords[2], where), detail::parse_int(coords[3], where)};
        if (w.box.x_min > w.box.x_max || w.box.y_min > w.box.y_max) {
            throw error(errc::parse_error, where + ": inverted box");
        }
        w.confidence = detail::parse_double(fields[2], where);
        if (!std::isfinite(w.confidence)) {
            throw error(errc::non_finite_score, where + ": confidence is not finite");
        }
        out[id].push_back(w);
    });
    return out;
}

inline std::map<ImageId, SubitizingDistribution> ingest_subitizing(
    const std::filesystem::path& path, const std::optional<std::set<ImageId>>& known = std::nullopt) {
    std::map<ImageId, SubitizingDistribution> out;
    detail::for_each_record(path, [&](std::string_view line, const std::string& where) {
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 2 || fields[0].empty()) {
            throw error(errc::parse_error, where + ": expected image_id<TAB>p0,p1,p2,p3,p4plus");
        }
        const ImageId id(fields[0]);
        detail::check_known(known, id, where);
        const auto probs = detail::split(fields[1], ',');
        if (probs.size() != 5) {
            throw error(errc::parse_error, where + ": need five probabilities");
        }
        SubitizingDistribution d;
        for (std::size_t i = 0; i < 5; ++i) {
            d.p[i] = detail::parse_double(probs[i], where);
        }
        try {
            validate(d);
        } catch (const error& e) {
            throw error(e.code(), where + ": " + e.what());
        }
        if (!out.emplace(id, d).second) {
            throw error(errc::parse_error, where + ": duplicate image '" + id + "'");
        }
    });
    return out;
}

} // namespace segdiv

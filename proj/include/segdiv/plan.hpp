#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "segdiv/error.hpp"

namespace segdiv {

using ImageId = std::string;

enum class Measure { region, boundary };

inline std::string_view to_string(Measure m) noexcept { return m == Measure::region ? "region" : "boundary"; }

inline Measure parse_measure(std::string_view s) {
    if (s == "region") {
        return Measure::region;
    }
    if (s == "boundary") {
        return Measure::boundary;
    }
    throw error(errc::parse_error, "unknown measure '" + std::string(s) + "'");
}

/// Which images receive redundancy: `selected` holds min(budget, N) ids in
/// priority order, each granted `extra` annotations beyond the first.
struct AllocationPlan {
    std::size_t budget = 0;
    std::size_t extra = 0;
    std::vector<ImageId> selected;
    std::string strategy;
};

} // namespace segdiv

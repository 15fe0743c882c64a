#pragma once

// Tabular report emission (CSV or JSON) and the matching reader.
//
// CSV: one header row, then one row per record; doubles use 17 significant
// digits so values survive a round trip. JSON: {"columns": [...], "rows":
// [{col: value, ...}, ...]} with keys in column order.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "segdiv/error.hpp"
#include "segdiv/image.hpp"
#include "segdiv/score_io.hpp"

namespace segdiv {

using Cell = std::variant<std::string, std::int64_t, double>;

struct Report {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) {
            throw error(errc::dimension_mismatch, "row width does not match the report columns");
        }
        rows.push_back(std::move(row));
    }
    friend bool operator==(const Report&, const Report&) = default;
};

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") {
        return ReportFormat::csv;
    }
    if (s == "json") {
        return ReportFormat::json;
    }
    throw error(errc::parse_error, "unknown report format '" + std::string(s) + "'");
}

inline ReportFormat format_from_extension(const std::filesystem::path& path) {
    return path.extension() == ".json" ? ReportFormat::json : ReportFormat::csv;
}

namespace detail {

/// Bare CSV fields are typed back: integer, then floating point, else text.
inline Cell infer_cell(const std::string& field, bool quoted) {
    if (quoted || field.empty()) {
        return field;
    }
    char* end = nullptr;
    errno = 0;
    const long long i = std::strtoll(field.c_str(), &end, 10);
    if (end == field.c_str() + field.size() && errno == 0) {
        return static_cast<std::int64_t>(i);
    }
    errno = 0;
    const double d = std::strtod(field.c_str(), &end);
    if (end == field.c_str() + field.size() && errno == 0) {
        return d;
    }
    return field;
}

inline std::string csv_field(const Cell& cell) {
    if (const auto* i = std::get_if<std::int64_t>(&cell)) {
        return std::to_string(*i);
    }
    if (const auto* d = std::get_if<double>(&cell)) {
        // Keep a decimal point so the reader types it back as a double.
        std::string s = format_double(*d);
        if (s.find_first_of(".eEn") == std::string::npos) {
            s += ".0";
        }
        return s;
    }
    const auto& s = std::get<std::string>(cell);
    // Text that would read back as a number is quoted too.
    if (s.find_first_of(",\"\n\r") == std::string::npos && std::holds_alternative<std::string>(infer_cell(s, false))) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

inline nlohmann::ordered_json json_cell(const Cell& cell) {
    if (const auto* i = std::get_if<std::int64_t>(&cell)) {
        return *i;
    }
    if (const auto* d = std::get_if<double>(&cell)) {
        return *d;
    }
    return std::get<std::string>(cell);
}

inline std::vector<std::vector<std::pair<std::string, bool>>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::pair<std::string, bool>>> rows;
    std::vector<std::pair<std::string, bool>> row;
    std::string field;
    bool quoted = false;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.emplace_back(std::move(field), quoted);
            field.clear();
            quoted = false;
            any = true;
        } else if (c == '\n') {
            row.emplace_back(std::move(field), quoted);
            rows.push_back(std::move(row));
            row.clear();
            field.clear();
            quoted = false;
            any = false;
        } else if (c != '\r') {
            field += c;
            any = true;
        }
    }
    if (in_quotes) {
        throw error(errc::parse_error, "unterminated quoted CSV field");
    }
    if (any) {
        row.emplace_back(std::move(field), quoted);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

inline std::string render_report(const Report& report, ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out;
        for (std::size_t c = 0; c < report.columns.size(); ++c) {
            out += (c ? "," : "") + detail::csv_field(report.columns[c]);
        }
        out += '\n';
        for (const auto& row : report.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                out += (c ? "," : "") + detail::csv_field(row[c]);
            }
            out += '\n';
        }
        return out;
    }
    nlohmann::ordered_json doc;
    doc["columns"] = report.columns;
    doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            obj[report.columns[c]] = detail::json_cell(row[c]);
        }
        doc["rows"].push_back(std::move(obj));
    }
    return doc.dump(2) + "\n";
}

/// Writes the report; refuses to create a file for an empty result set.
inline void emit_report(const Report& report, const std::filesystem::path& path, ReportFormat format) {
    if (report.rows.empty()) {
        throw error(errc::empty_results, "nothing to report");
    }
    for (const auto& row : report.rows) {
        if (row.size() != report.columns.size()) {
            throw error(errc::dimension_mismatch, "row width does not match the report columns");
        }
    }
    detail::write_file(path, render_report(report, format));
}

inline Report parse_report(const std::string& text, ReportFormat format) {
    Report report;
    if (format == ReportFormat::csv) {
        const auto rows = detail::parse_csv(text);
        if (rows.empty()) {
            throw error(errc::parse_error, "CSV report has no header");
        }
        for (const auto& [name, quoted] : rows.front()) {
            report.columns.push_back(name);
        }
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() != report.columns.size()) {
                throw error(errc::parse_error, "CSV row " + std::to_string(r) + " has the wrong width");
            }
            std::vector<Cell> row;
            for (const auto& [field, quoted] : rows[r]) {
                row.push_back(detail::infer_cell(field, quoted));
            }
            report.rows.push_back(std::move(row));
        }
        return report;
    }
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
        report.columns = doc.at("columns").get<std::vector<std::string>>();
        for (const auto& obj : doc.at("rows")) {
            std::vector<Cell> row;
            for (const auto& col : report.columns) {
                const auto& v = obj.at(col);
                if (v.is_number_integer()) {
                    row.emplace_back(v.get<std::int64_t>());
                } else if (v.is_number()) {
                    row.emplace_back(v.get<double>());
                } else {
                    row.emplace_back(v.get<std::string>());
                }
            }
            report.rows.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        throw error(errc::parse_error, std::string("JSON report: ") + e.what());
    }
    return report;
}

inline Report read_report(const std::filesystem::path& path, ReportFormat format) {
    return parse_report(detail::slurp(path), format);
}

} // namespace segdiv

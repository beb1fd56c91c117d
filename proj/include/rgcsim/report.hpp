#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace rgcsim::frontend {

enum class Format { Json, Csv, Text };

Format parse_format(const std::string& s);

/// One experiment's output. `payload` may carry a "table" object
/// ({"columns": [...], "rows": [[...], ...]}) for CSV emission.
struct ReportRecord {
    std::string kind;
    std::string inputs_digest;
    nlohmann::json payload;
    std::string tool_version;
    std::uint64_t seed = 0;

    bool operator==(const ReportRecord&) const = default;
};

class UnsupportedFormat : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic JSON: sorted keys, doubles with 17 significant digits,
/// non-finite doubles as null, locale independent.
std::string canonical_json(const nlohmann::json& j, int indent = 2);

/// Shortest locale-independent text for a double at 17 significant digits.
std::string format_double(double v);

std::string emit_report(const ReportRecord& record, Format format);

/// Inverse of emit_report(..., Format::Json).
ReportRecord parse_report_json(const std::string& text);

nlohmann::json to_json(const ReportRecord& r);
ReportRecord record_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit digest rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& data);

}  // namespace rgcsim::frontend

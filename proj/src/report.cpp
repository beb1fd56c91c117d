#include "rgcsim/report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace rgcsim::frontend {

using nlohmann::json;

Format parse_format(const std::string& s)
{
    if (s == "json")
        return Format::Json;
    if (s == "csv")
        return Format::Csv;
    if (s == "text")
        return Format::Text;
    throw std::invalid_argument("unknown format '" + s + "' (expected json, csv or text)");
}

std::string format_double(double v)
{
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    (void)ec;
    std::string s(buf, p);
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

namespace {

void write_string(std::string& out, const std::string& s)
{
    out += json(s).dump(-1, ' ', false, json::error_handler_t::replace);
}

void write(std::string& out, const json& j, int indent, int depth)
{
    const auto newline = [&](int d) {
        if (indent >= 0) {
            out += '\n';
            out.append(static_cast<std::size_t>(indent * d), ' ');
        }
    };
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
            if (!first)
                out += ',';
            first = false;
            newline(depth + 1);
            write_string(out, it.key());
            out += indent >= 0 ? ": " : ":";
            write(out, it.value(), indent, depth + 1);
        }
        newline(depth);
        out += '}';
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        bool scalar = true;
        for (const auto& e : j)
            scalar = scalar && !e.is_structured();
        out += '[';
        bool first = true;
        for (const auto& e : j) {
            if (!first)
                out += scalar && indent >= 0 ? ", " : ",";
            first = false;
            if (!scalar)
                newline(depth + 1);
            write(out, e, indent, depth + 1);
        }
        if (!scalar)
            newline(depth);
        out += ']';
        return;
    }
    case json::value_t::number_float: {
        const double v = j.get<double>();
        out += std::isfinite(v) ? format_double(v) : "null";
        return;
    }
    case json::value_t::string:
        write_string(out, j.get_ref<const std::string&>());
        return;
    default:
        out += j.dump();
        return;
    }
}

std::string csv_cell(const json& v)
{
    if (v.is_number_float())
        return std::isfinite(v.get<double>()) ? format_double(v.get<double>()) : "nan";
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"')
                q += '"';
            q += c;
        }
        return q + '"';
    }
    if (v.is_boolean())
        return v.get<bool>() ? "1" : "0";
    if (v.is_null())
        return "";
    return v.dump();
}

void flatten_text(std::ostringstream& os, const json& j, const std::string& prefix)
{
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (prefix.empty() && it.key() == "table")
                continue;
            flatten_text(os, it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
        }
    } else if (j.is_array() && !j.empty() && j.front().is_structured()) {
        for (std::size_t k = 0; k < j.size(); ++k)
            flatten_text(os, j[k], prefix + "[" + std::to_string(k) + "]");
    } else {
        std::string v;
        write(v, j, -1, 0);
        os << prefix << ": " << v << '\n';
    }
}

}  // namespace

std::string canonical_json(const json& j, int indent)
{
    std::string out;
    write(out, j, indent, 0);
    return out;
}

json to_json(const ReportRecord& r)
{
    return json{{"kind", r.kind},
                {"inputs_digest", r.inputs_digest},
                {"payload", r.payload},
                {"tool_version", r.tool_version},
                {"seed", r.seed}};
}

ReportRecord record_from_json(const json& j)
{
    ReportRecord r;
    r.kind = j.at("kind").get<std::string>();
    r.inputs_digest = j.at("inputs_digest").get<std::string>();
    r.payload = j.at("payload");
    r.tool_version = j.at("tool_version").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

ReportRecord parse_report_json(const std::string& text)
{
    return record_from_json(json::parse(text));
}

std::string emit_report(const ReportRecord& record, Format format)
{
    switch (format) {
    case Format::Json:
        return canonical_json(to_json(record)) + "\n";
    case Format::Csv: {
        const auto it = record.payload.find("table");
        if (it == record.payload.end() || !it->is_object())
            throw UnsupportedFormat("CSV output is not available for '" + record.kind +
                                    "' reports (payload is not tabular)");
        std::string out;
        bool first = true;
        for (const auto& c : it->at("columns")) {
            if (!first)
                out += ',';
            first = false;
            out += c.get<std::string>();
        }
        out += '\n';
        for (const auto& row : it->at("rows")) {
            first = true;
            for (const auto& v : row) {
                if (!first)
                    out += ',';
                first = false;
                out += csv_cell(v);
            }
            out += '\n';
        }
        return out;
    }
    case Format::Text: {
        std::ostringstream os;
        os << "rgcsim " << record.tool_version << " | " << record.kind << " | seed "
           << record.seed << " | config " << record.inputs_digest << '\n';
        const auto& p = record.payload;
        if (record.kind == "energy") {
            const auto& e = p.at("energy");
            os << "crossbar energy: " << format_double(e.at("e_crossbar_j").get<double>()) << " J\n"
               << "neuron energy: " << format_double(e.at("e_neurons_j").get<double>()) << " J\n"
               << "sar calibration energy (amortized): "
               << format_double(e.at("e_sar_j").get<double>()) << " J\n"
               << "total analog energy: " << format_double(e.at("e_total_j").get<double>())
               << " J\n"
               << "evaluation time: " << format_double(e.at("t_eval_s").get<double>()) << " s\n"
               << "digital baseline energy: " << format_double(e.at("baseline_j").get<double>())
               << " J\n"
               << "analog/digital energy ratio: " << format_double(e.at("ratio").get<double>())
               << " (baseline / analog; depends on the assumptions below)\n";
            for (auto it = p.at("assumptions").begin(); it != p.at("assumptions").end(); ++it) {
                std::string v;
                write(v, it.value().at("value"), -1, 0);
                os << "  assumption " << it.key() << " = " << v << " ("
                   << it.value().at("source").get<std::string>() << ")\n";
            }
        } else {
            flatten_text(os, p, "");
        }
        return os.str();
    }
    }
    throw UnsupportedFormat("unknown format");
}

std::string fnv1a_hex(const std::string& data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    static constexpr char digits[] = "0123456789abcdef";
    for (int k = 15; k >= 0; --k) {
        buf[k] = digits[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return buf;
}

}  // namespace rgcsim::frontend

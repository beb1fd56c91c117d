#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rgcsim/energy.hpp"
#include "rgcsim/rgc_neuron.hpp"
#include "rgcsim/variability.hpp"

namespace rgcsim::frontend {

/// Configuration problem. `location` is file:line:column for syntax and
/// unit errors and the dotted key path for semantic ones.
class ConfigError : public std::runtime_error {
public:
    enum class Kind { Syntax, UnknownKey, Unit, Range, MissingSection, File };
    ConfigError(Kind kind, std::string location, const std::string& message);
    Kind kind() const { return kind_; }
    const std::string& location() const { return location_; }

private:
    Kind kind_;
    std::string location_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses "5u", "500k", "1e-3", "0.4", "2.5mV" into SI. Accepted suffixes:
/// f p n u m k K M G; an optional unit symbol (A V S s W J F Hz Ohm ohm)
/// may follow. Throws std::invalid_argument otherwise.
double parse_quantity(std::string_view text);

/// Parses the relaxed JSON-compatible tree: JSON plus unquoted keys and
/// words, '=' as well as ':', optional commas, optional top-level braces,
/// '#' and '//' comments and engineering-suffixed numbers.
nlohmann::json parse_tree(std::string_view text, std::string_view source = "<config>");

using Rows = std::vector<std::vector<double>>;

struct LayerEntry {
    std::string csv;
    Rows weights;
    std::string activation = "linear";  // linear | threshold
    double threshold = 0.0;

    bool operator==(const LayerEntry&) const = default;
};

struct OpSpec {
    double i_in = 0.0;
    std::int64_t code_in = 0;
    std::int64_t code_out = 0;
};

struct CrossbarSpec {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    double g_min = 1e-6;
    double g_max = 1e-3;
    std::string csv;
    Rows g;
    std::vector<double> inputs;
    std::string mode = "voltage";  // voltage | current
    double r_wire_row = 0.0;
    double r_wire_col = 0.0;
    double r_neuron_in = 0.0;
};

struct SarSpec {
    std::int64_t nbits = 6;       // width of both calibration DACs
    double t_step = 10e-9;
    double vref_in = 0.65;
    double vref_out = 0.0;        // 0 selects the nominal mid-scale output
    double comparator_offset = 0.0;
    std::string mode = "sequential";  // sequential | interleaved
    std::int64_t grid_points = 2001;
    std::int64_t n_max = 16;
};

struct McSpec {
    std::int64_t runs = 500;
    std::uint64_t seed = 1;
    bool calibrate = true;
    std::int64_t workers = 1;
};

struct NetworkSpec {
    std::vector<LayerEntry> layers;
    std::int64_t bits = 8;
    std::string fidelity = "circuit_ideal";  // ideal_math | circuit_ideal | circuit_nonideal
    std::string inputs_csv;
    Rows inputs;
    double v_read = 0.1;
    double i_full_scale = 2e-6;
    double g_min = 1e-6;
    double g_max = 100e-6;
    double r_wire_row = 0.0;
    double r_wire_col = 0.0;
};

struct OutputSpec {
    std::string path;
    std::string format = "json";
};

struct SimConfig {
    std::string preset = "reference";
    neuron::RgcParams neuron;
    OpSpec op;
    CrossbarSpec crossbar;
    SarSpec sar;
    mc::MismatchSpec mismatch;
    McSpec mc;
    NetworkSpec network;
    energy::EnergyParams energy;
    OutputSpec output;

    std::filesystem::path base_dir = ".";
    std::set<std::string> explicit_keys;  // provenance: keys given in the text

    bool is_explicit(const std::string& key) const { return explicit_keys.count(key) > 0; }
    /// Compares every setting; provenance and base_dir are ignored.
    bool operator==(const SimConfig& other) const;
};

/// Every known key path, in emission order.
std::vector<std::string> config_keys();

SimConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".",
                       std::string_view source = "<config>");
SimConfig load_config(const std::filesystem::path& path);

/// Canonical text with every setting written out (strict JSON, sorted keys).
std::string emit_config(const SimConfig& cfg);

/// Digest of emit_config, embedded in reports.
std::string config_digest(const SimConfig& cfg);

}  // namespace rgcsim::frontend

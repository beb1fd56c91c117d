#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgcsim::crossbar {

/// Memristor conductances (S), row-major. Rows are inputs, columns feed neurons.
class ConductanceMatrix {
public:
    ConductanceMatrix(std::size_t rows, std::size_t cols, double g_min, double g_max);
    ConductanceMatrix(std::size_t rows, std::size_t cols, double g_min, double g_max,
                      std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double g_min() const { return g_min_; }
    double g_max() const { return g_max_; }

    double operator()(std::size_t i, std::size_t j) const { return g_[i * cols_ + j]; }
    void set(std::size_t i, std::size_t j, double g);
    std::span<const double> values() const { return g_; }

    bool operator==(const ConductanceMatrix&) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    double g_min_;
    double g_max_;
    std::vector<double> g_;
};

/// Reads a row-major CSV of conductances. A leading non-numeric line is
/// treated as a header.
ConductanceMatrix load_csv(const std::filesystem::path& path, double g_min, double g_max);
ConductanceMatrix parse_csv(const std::string& text, double g_min, double g_max);
std::string to_csv(const ConductanceMatrix& g);

enum class ExcitationMode { Voltage, Current };

struct Excitation {
    ExcitationMode mode = ExcitationMode::Voltage;
    std::vector<double> values;  // V or A per row
};

/// Parasitics for the nodal solve. Empty per-column vectors mean zero.
struct NonIdealSpec {
    double r_wire_row = 0.0;  // ohm per segment, including driver-to-first-cell
    double r_wire_col = 0.0;  // ohm per segment, including last-cell-to-neuron
    std::vector<double> r_neuron_in;      // ohm, neuron input resistance per column
    std::vector<double> v_neuron_offset;  // V, neuron input node offset from virtual ground

    static NonIdealSpec zeros(std::size_t cols);
    NonIdealSpec scaled(double factor) const;
};

class SingularNetwork : public std::runtime_error {
public:
    SingularNetwork(const std::string& what, std::string node)
        : std::runtime_error(what), node_(std::move(node)) {}
    const std::string& node() const { return node_; }

private:
    std::string node_;
};

/// I_j = sum_i G(i,j) * V_i with every column held at virtual ground.
/// Current-mode rows are converted to the row voltage the source develops
/// against the grounded columns.
std::vector<double> output_currents_ideal(const ConductanceMatrix& g, const Excitation& x);

struct NodalSolution {
    std::vector<double> column_currents;  // A, into each neuron input
    std::vector<double> row_currents;     // A, delivered by each row driver
    std::vector<double> row_voltages;     // V, at each row driver terminal
    double source_power = 0.0;            // W, all drivers and offset sources
    double dissipated_power = 0.0;        // W, all resistive elements
    std::size_t unknowns = 0;
};

NodalSolution solve_nonideal(const ConductanceMatrix& g, const Excitation& x,
                             const NonIdealSpec& spec);

std::vector<double> output_currents_nonideal(const ConductanceMatrix& g, const Excitation& x,
                                             const NonIdealSpec& spec);

/// |I_nonideal - I_ideal| / |I_ideal| per column; a column whose ideal current
/// is exactly zero reports the absolute non-ideal current instead.
std::vector<double> dot_product_error(const ConductanceMatrix& g, const Excitation& x,
                                      const NonIdealSpec& spec);

/// Sum over cells of V_i^2 * G(i,j), the power drawn by an ideal voltage-mode read.
double ideal_read_power(const ConductanceMatrix& g, std::span<const double> row_voltages);

}  // namespace rgcsim::crossbar

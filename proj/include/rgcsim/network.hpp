#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgcsim/crossbar.hpp"
#include "rgcsim/rgc_neuron.hpp"
#include "rgcsim/sar.hpp"
#include "rgcsim/variability.hpp"

namespace rgcsim::net {

/// Dense row-major matrix; for weights rows are inputs and columns outputs.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

Matrix parse_matrix_csv(const std::string& text);
std::string matrix_to_csv(const Matrix& m);

enum class ActivationKind { Linear, Threshold };

struct Activation {
    ActivationKind kind = ActivationKind::Linear;
    double threshold = 0.0;  // in pre-activation units

    bool operator==(const Activation&) const = default;
};

struct LayerSpec {
    Matrix weights;
    Activation activation;
};

/// Differential-column mapping of one layer.
///
/// A weight w becomes level k = round(|w| / w_max * (2^bits - 1)) (ties away
/// from zero) on the side of its sign; the other side stays at g_min. The
/// pair reconstructs k * g_step * sign(w) = quantized(w) * scale.
struct MappedLayer {
    LayerSpec source;
    crossbar::ConductanceMatrix g_plus;
    crossbar::ConductanceMatrix g_minus;
    std::vector<std::int64_t> levels;  // signed level per weight, row-major
    int bits = 0;
    double w_max = 0.0;   // largest |w|, 1 for an all-zero layer
    double g_step = 0.0;  // S per level
    double scale = 0.0;   // S per unit weight

    double quantized_weight(std::size_t i, std::size_t j) const;
    std::size_t inputs() const { return source.weights.rows; }
    std::size_t outputs() const { return source.weights.cols; }
};

MappedLayer map_weights(const LayerSpec& layer, int bits, double g_min, double g_max);
MappedLayer map_weights(const Matrix& w, int bits, double g_min, double g_max);

/// Throws std::invalid_argument for non-finite weights or mismatched layer sizes.
void validate_layers(std::span<const LayerSpec> layers);

enum class Fidelity { IdealMath, CircuitIdeal, CircuitNonIdeal };

const char* to_string(Fidelity f);

struct CircuitConfig {
    neuron::RgcParams neuron;
    double v_read = 0.1;           // V per unit input
    double i_full_scale = 2e-6;    // A at the neuron input for the layer's largest |pre-activation|
    double vref_in = 0.65;         // V, input-node calibration target
    double r_wire_row = 0.0;       // ohm per segment (CircuitNonIdeal)
    double r_wire_col = 0.0;
    mc::MismatchSpec mismatch;     // CircuitNonIdeal
    std::uint64_t seed = 1;
};

struct NeuronState {
    neuron::RgcParams params;
    sar::NeuronCalibration calibration;
    double zin = 0.0;
    double v_in_offset = 0.0;  // calibrated v_in - vref_in
    double v_compare = 0.0;    // comparator reference for this neuron
};

struct LayerCircuit {
    double current_gain = 0.0;   // neuron input amps per crossbar differential amp
    double amps_per_unit = 0.0;  // differential crossbar amps per unit pre-activation
    double slope = 0.0;          // ohm, nominal transimpedance fit
    double intercept = 0.0;      // V, nominal quiescent output
    std::vector<NeuronState> neurons;
    std::optional<crossbar::ConductanceMatrix> combined;  // [G+ | G-] for the nodal solve
    crossbar::NonIdealSpec parasitics;
};

struct LayerResult {
    std::vector<double> pre_activation;  // ideal-math or circuit-inferred
    std::vector<double> outputs;         // passed to the next layer
    std::vector<bool> bits;              // comparator decisions
    std::vector<double> v_out;           // neuron output voltages (circuit tiers)
    double crossbar_power = 0.0;         // W during evaluation
};

struct InferenceResult {
    std::vector<LayerResult> layers;
    std::vector<std::string> failures;  // "layer L neuron J: message"

    const std::vector<double>& outputs() const { return layers.back().outputs; }
    const std::vector<bool>& bits() const { return layers.back().bits; }
};

/// Mapped layers plus the per-layer neuron state a fidelity tier needs.
/// Construction calibrates every mismatched neuron (CircuitNonIdeal) once.
class Network {
public:
    Network(std::vector<MappedLayer> layers, Fidelity fidelity, CircuitConfig cfg = {});

    InferenceResult infer(std::span<const double> input) const;

    Fidelity fidelity() const { return fidelity_; }
    const std::vector<MappedLayer>& layers() const { return layers_; }
    const std::vector<LayerCircuit>& circuits() const { return circuits_; }
    const CircuitConfig& config() const { return cfg_; }
    std::size_t neuron_count() const;
    std::size_t mac_count() const;
    std::size_t calibrated_nodes() const;

private:
    void prepare();
    LayerResult run_ideal(std::size_t l, std::span<const double> x) const;
    LayerResult run_circuit(std::size_t l, std::span<const double> x,
                            std::vector<std::string>& failures) const;

    std::vector<MappedLayer> layers_;
    Fidelity fidelity_;
    CircuitConfig cfg_;
    std::vector<LayerCircuit> circuits_;
};

InferenceResult infer(const std::vector<MappedLayer>& layers, std::span<const double> input,
                      Fidelity fidelity, const CircuitConfig& cfg = {});

}  // namespace rgcsim::net

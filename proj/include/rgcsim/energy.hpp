#pragma once

#include <cstddef>

namespace rgcsim::energy {

/// What one inference exercised, independent of how it was simulated.
struct RunRecord {
    std::size_t n_neurons = 0;
    std::size_t n_mac = 0;           // digital multiply-accumulates for the same network
    std::size_t n_activations = 0;
    double crossbar_power = 0.0;     // W while the read is active
    std::size_t n_calibrated_nodes = 0;
    int nbits = 0;
};

/// Timing and power assumptions. Only p_neuron (43 uW at 1 V) has a measured
/// origin; the digital baseline numbers are assumptions and are carried with
/// their provenance into every report.
struct EnergyParams {
    double t_eval = 10e-9;       // s
    double p_neuron = 43e-6;     // W per neuron
    double t_sar_step = 10e-9;   // s per comparison
    double p_sar = 10e-6;        // W while the shared SAR runs
    double n_inferences = 1e6;   // calibration amortization count
    double e_mac = 1e-12;        // J per digital MAC
    double e_act = 0.5e-12;      // J per digital activation

    bool operator==(const EnergyParams&) const = default;
};

struct EnergyReport {
    double e_crossbar = 0.0;
    double e_neurons = 0.0;
    double e_sar = 0.0;           // one-time calibration energy, amortized
    double e_total = 0.0;
    double t_eval = 0.0;
    double e_digital_baseline = 0.0;
    double ratio = 0.0;           // baseline / e_total
};

/// n_mac * e_mac + n_activation * e_act.
double digital_baseline(double n_mac, double e_mac, double n_activation, double e_act);

EnergyReport energy_estimate(const RunRecord& run, const EnergyParams& params);

}  // namespace rgcsim::energy

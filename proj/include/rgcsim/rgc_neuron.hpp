#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgcsim/device_models.hpp"

namespace rgcsim::neuron {

using device::MosEval;
using device::MosParams;

/// Binary-weighted current DAC: bit k mirrors 2^k unit currents.
struct DacSpec {
    double i_unit = 0.125e-6;  // A per LSB
    int nbits = 6;

    bool operator==(const DacSpec&) const = default;
};

std::uint32_t dac_max_code(const DacSpec& dac);

/// code * i_unit. Throws std::out_of_range for code >= 2^nbits.
double dac_current(const DacSpec& dac, std::uint32_t code);

/// Regulated-cascode transimpedance neuron.
///
/// Nodes: `in` is the crossbar column (source of the common-gate device M1),
/// `gate1` is the M1 gate driven by the common-source feedback device M2,
/// `mid` joins M1's drain to the cascode M3, and `out` is M3's drain loaded by
/// r_load to vdd. The bias sink `ib` pulls from `in`; `gate1` is fed by the
/// I_B2 source (ideal ib2 in parallel with ro_b2 to vdd) plus the calibration
/// DAC. The output DAC sinks current from `out`. M5 only enters the
/// tuned-transconductance relation of the single-transistor RGC.
struct RgcParams {
    MosParams m1{2e-3, 0.1, 0.05};
    MosParams m2{200e-6, 0.4, 0.05};
    MosParams m3{2e-3, 0.2, 0.05};
    MosParams m5{200e-6, 0.4, 0.05};
    double ib = 5e-6;      // A, main bias through M1
    double ib2 = 4e-6;     // A, feedback branch bias
    double ro_b2 = 1e6;    // ohm, incremental resistance of the I_B2 source (inf allowed)
    double vc = 0.2;       // V, control voltage of the tuned RGC
    double ic = 4e-6;      // A, control current of the tuned RGC
    double vdd = 1.0;      // V
    double vb3 = 1.0;      // V, cascode gate bias
    double r_load = 20e3;  // ohm, output load to vdd
    DacSpec dac{0.125e-6, 6};
    DacSpec dac_out{31.25e-9, 6};

    bool operator==(const RgcParams&) const = default;
};

/// The shipped reference configuration (the defaults above).
RgcParams reference_params();

/// Throws std::invalid_argument naming the offending field.
void validate(const RgcParams& p);

enum class NodeId : std::size_t { In = 0, Gate1 = 1, Mid = 2, Out = 3 };
inline constexpr std::size_t kNodeCount = 4;

struct Bias {
    double i_in = 0.0;  // A, current entering the input node from the crossbar
    std::uint32_t code_in = 0;
    std::uint32_t code_out = 0;
};

struct OperatingPoint {
    Bias bias;
    double v_in = 0.0;     // = V_DS1 referred to ground at the input node
    double v_gate1 = 0.0;
    double v_mid = 0.0;
    double v_out = 0.0;
    double i_m1 = 0.0;     // drain to source
    double i_m2 = 0.0;
    double i_m3 = 0.0;
    double i_dac = 0.0;
    double i_dac_out = 0.0;
    double i_load2 = 0.0;  // I_B2 source incl. ro_b2 share
    double i_load = 0.0;   // through r_load
    MosEval m1;
    MosEval m2;
    MosEval m3;
    std::array<double, kNodeCount> residual{};  // A, KCL at each node
    std::array<double, kNodeCount> forced_current{};  // A, supplied by forcing sources
    int iterations = 0;
};

class SolverError : public std::runtime_error {
public:
    enum class Kind { NonConvergence, InfeasibleBias };
    SolverError(Kind kind, const std::string& what, double last_residual = 0.0)
        : std::runtime_error(what), kind_(kind), last_residual_(last_residual) {}
    Kind kind() const { return kind_; }
    double last_residual() const { return last_residual_; }

private:
    Kind kind_;
    double last_residual_;
};

struct SolveOptions {
    double residual_tol = 1e-12;  // A
    double step_tol = 1e-13;      // V
    int max_iterations = 200;
    int max_halvings = 20;
    /// Nodes held at a fixed voltage by an ideal source; their KCL row is
    /// dropped and the source current reported in forced_current.
    std::array<std::optional<double>, kNodeCount> forced{};
};

/// Damped Newton DC solve. Throws SolverError on non-convergence or when M1,
/// M2 or M3 ends in cutoff.
OperatingPoint solve_dc(const RgcParams& p, const Bias& bias, const SolveOptions& opts = {});
OperatingPoint solve_dc(const RgcParams& p, double i_in, std::uint32_t code_in);

struct SmallSignalReport {
    double a = 0.0;         // feedback amplifier gain gm2*(ro2 || ro_b2)
    double zin = 0.0;       // ohm, 1/(a*gm1)
    double rout = 0.0;      // ohm, gm3*ro3*ro1
    double gm_tuned = 0.0;  // S, beta1 * v_ds1_tuned
    double v_ds1_tuned = 0.0;
};

class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Drain-source voltage set by the single-transistor RGC: vc + sqrt(2 ic/beta5) + vt5.
double tuned_vds1(const RgcParams& p);
double tuned_transconductance(const RgcParams& p);

/// Requires M2 and M3 in saturation and M1 conducting; throws
/// PreconditionError listing every violating device.
SmallSignalReport small_signal(const RgcParams& p, const OperatingPoint& op);

/// Central difference of v_in with respect to i_in.
double zin_numeric(const RgcParams& p, const Bias& bias, double delta_i = 1e-9);

/// Loop-broken feedback gain -d(v_gate1)/d(v_in) with the input node forced.
double gain_numeric(const RgcParams& p, const OperatingPoint& op, double delta_v = 1e-6);

/// Output impedance d(v_out)/d(i_m3) with the input node held at its DC value
/// (input port shorted) and the output node forced.
double rout_numeric(const RgcParams& p, const OperatingPoint& op, double delta_v = 5e-3);

struct TransferPoint {
    double i_in = 0.0;
    double v_out = 0.0;
    double v_in = 0.0;
    bool feasible = false;
    std::string error;
};

struct TransferCurve {
    std::vector<TransferPoint> points;
    double slope = 0.0;      // ohm, least-squares over the central 80% of the sweep
    double intercept = 0.0;  // V
    double max_fit_deviation = 0.0;  // fraction of the full-scale output swing
    std::size_t infeasible = 0;
};

TransferCurve transfer_curve(const RgcParams& p, std::uint32_t code_in, std::uint32_t code_out,
                             const std::vector<double>& i_in_sweep);

/// Evenly spaced sweep of n points over [center - half_span, center + half_span].
std::vector<double> linear_sweep(double center, double half_span, std::size_t n);

}  // namespace rgcsim::neuron

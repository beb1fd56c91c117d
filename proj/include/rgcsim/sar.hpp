#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgcsim::sar {

/// +1 for v >= 0, -1 otherwise.
constexpr double signum(double v) { return v >= 0.0 ? 1.0 : -1.0; }

/// x_i = x_{i-1} - s(x_{i-1} - x) / 2^i. Requires i >= 1.
double normalized_step(double x_prev, double x, int i);

struct NormalizedTrajectory {
    double x = 0.0;
    std::vector<double> approximations;  // x_1 .. x_n

    double final_value() const { return approximations.back(); }
    double error() const;
};

/// Runs n steps from x_0 = 0. Requires x in [-1, 1] and n >= 1.
NormalizedTrajectory normalized_converge(double x, int n);

enum class Direction { Increasing, Decreasing };
enum class Phase { Idle, Converging, Done };

/// MSB-first successive-approximation register.
class SarState {
public:
    explicit SarState(int nbits);

    void start();
    /// Register value with the current trial bit forced high.
    std::uint32_t trial_code() const;
    /// Keeps or clears the trial bit and advances toward the LSB.
    void decide(bool keep);

    int nbits() const { return nbits_; }
    int bit_index() const { return bit_index_; }
    int trial_bit() const { return nbits_ - 1 - bit_index_; }
    std::uint32_t code() const { return code_; }
    Phase phase() const { return phase_; }

private:
    int nbits_;
    int bit_index_ = 0;  // number of bits already decided
    std::uint32_t code_ = 0;
    Phase phase_ = Phase::Idle;
};

using Plant = std::function<double(std::uint32_t)>;

struct SarStep {
    int bit = 0;
    std::uint32_t trial_code = 0;
    double node_voltage = 0.0;
    bool kept = false;
};

struct SarOptions {
    double comparator_offset = 0.0;  // V, added to vref at the comparator
    bool check_monotone = false;     // sweep every code first and reject non-monotone plants
};

struct SarResult {
    std::uint32_t code = 0;
    double settled = 0.0;  // plant output at the returned code
    bool out_of_range = false;
    int comparisons = 0;
    std::vector<SarStep> transcript;
};

class NonMonotonePlant : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary search of a monotone code->voltage plant toward vref.
///
/// For an Increasing plant a trial bit is cleared when the plant exceeds vref,
/// so the result is the largest code whose output does not exceed vref. A
/// Decreasing plant keeps the bit while the output is still at or above vref.
/// Exactly nbits comparisons are made. The settled value is reused from the
/// transcript; only a zero result costs one extra plant observation.
SarResult sar_calibrate(const Plant& plant, double vref, int nbits, Direction direction,
                        const SarOptions& opts = {});

std::string transcript_csv(const SarResult& r);

enum class CalibrationNode { Input, Output };
enum class ScheduleMode { Sequential, Interleaved };

/// Both node voltages of one neuron as a function of its two DAC codes.
struct NeuronNodes {
    std::function<double(std::uint32_t code_in, std::uint32_t code_out)> input_node;
    std::function<double(std::uint32_t code_in, std::uint32_t code_out)> output_node;
    Direction input_direction = Direction::Increasing;
    Direction output_direction = Direction::Increasing;
};

struct NeuronCalibration {
    std::uint32_t code_in = 0;
    std::uint32_t code_out = 0;
    double v_in = 0.0;
    double v_out = 0.0;
    bool input_out_of_range = false;
    bool output_out_of_range = false;
    double input_drift = 0.0;  // change of v_in caused by the later output calibration
    int comparisons = 0;
    bool failed = false;
    std::string error;
};

struct ActivationEvent {
    std::size_t neuron = 0;
    CalibrationNode node = CalibrationNode::Input;
    int comparisons = 0;
};

struct CalibrationSchedule {
    std::vector<std::size_t> neuron_ids;        // visiting order
    std::vector<double> vref_in;                // per neuron id
    std::vector<double> vref_out;               // per neuron id
    ScheduleMode mode = ScheduleMode::Sequential;
    bool calibrate_output = true;
    SarOptions sar;

    // Filled by calibrate_array.
    std::size_t active_index = 0;
    std::vector<NeuronCalibration> results;     // per neuron id
    std::vector<ActivationEvent> log;
    bool running = false;
};

/// Schedule visiting neurons 0..n-1 with common targets.
CalibrationSchedule make_schedule(std::size_t n, double vref_in, double vref_out);

/// Calibrates every neuron one at a time. Output codes start at 0 while the
/// input pass runs. Failures are recorded per neuron and the pass continues.
CalibrationSchedule calibrate_array(std::span<const NeuronNodes> neurons,
                                    CalibrationSchedule schedule, int nbits);

/// n_neurons * nodes_per_neuron * nbits * t_step.
double calibration_latency(std::size_t n_neurons, std::size_t nodes_per_neuron, int nbits,
                           double t_step);

}  // namespace rgcsim::sar

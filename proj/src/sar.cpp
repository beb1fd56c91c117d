#include "rgcsim/sar.hpp"

#include <algorithm>
#include <cmath>
#include <locale>
#include <sstream>

namespace rgcsim::sar {

double normalized_step(double x_prev, double x, int i)
{
    if (i < 1)
        throw std::invalid_argument("normalized_step: i must be >= 1");
    return x_prev - signum(x_prev - x) * std::ldexp(1.0, -i);
}

double NormalizedTrajectory::error() const { return std::abs(final_value() - x); }

NormalizedTrajectory normalized_converge(double x, int n)
{
    if (!(x >= -1.0 && x <= 1.0))
        throw std::invalid_argument("normalized_converge: x must lie in [-1, 1]");
    if (n < 1)
        throw std::invalid_argument("normalized_converge: n must be >= 1");
    NormalizedTrajectory t;
    t.x = x;
    t.approximations.reserve(static_cast<std::size_t>(n));
    double xi = 0.0;
    for (int i = 1; i <= n; ++i) {
        xi = normalized_step(xi, x, i);
        t.approximations.push_back(xi);
    }
    return t;
}

SarState::SarState(int nbits) : nbits_(nbits)
{
    if (nbits < 1 || nbits > 31)
        throw std::invalid_argument("SAR nbits must be in [1, 31]");
}

void SarState::start()
{
    bit_index_ = 0;
    code_ = 0;
    phase_ = Phase::Converging;
}

std::uint32_t SarState::trial_code() const
{
    if (phase_ != Phase::Converging)
        throw std::logic_error("SAR register is not converging");
    return code_ | (std::uint32_t{1} << trial_bit());
}

void SarState::decide(bool keep)
{
    if (keep)
        code_ = trial_code();
    else if (phase_ != Phase::Converging)
        throw std::logic_error("SAR register is not converging");
    if (++bit_index_ == nbits_)
        phase_ = Phase::Done;
}

SarResult sar_calibrate(const Plant& plant, double vref, int nbits, Direction direction,
                        const SarOptions& opts)
{
    if (!std::isfinite(vref))
        throw std::invalid_argument("sar_calibrate: vref must be finite");
    SarState reg(nbits);
    const std::uint32_t max_code = static_cast<std::uint32_t>((std::uint64_t{1} << nbits) - 1);
    const bool increasing = direction == Direction::Increasing;

    if (opts.check_monotone) {
        double prev = plant(0);
        for (std::uint32_t c = 1; c <= max_code; ++c) {
            const double v = plant(c);
            if (increasing ? v < prev : v > prev) {
                std::ostringstream os;
                os << "plant is not monotone " << (increasing ? "increasing" : "decreasing")
                   << " between codes " << c - 1 << " and " << c;
                throw NonMonotonePlant(os.str());
            }
            prev = v;
        }
    }

    const double threshold = vref + opts.comparator_offset;
    SarResult r;
    r.transcript.reserve(static_cast<std::size_t>(nbits));
    reg.start();
    while (reg.phase() == Phase::Converging) {
        SarStep s;
        s.bit = reg.trial_bit();
        s.trial_code = reg.trial_code();
        s.node_voltage = plant(s.trial_code);
        ++r.comparisons;
        s.kept = increasing ? !(s.node_voltage > threshold) : !(s.node_voltage < threshold);
        reg.decide(s.kept);
        r.transcript.push_back(s);
    }
    r.code = reg.code();
    // A nonzero result was itself a trial code (its lowest set bit was the
    // last kept trial), so only code 0 needs a fresh observation.
    const auto seen = std::find_if(r.transcript.begin(), r.transcript.end(),
                                   [&](const SarStep& s) { return s.trial_code == r.code; });
    r.settled = seen != r.transcript.end() ? seen->node_voltage : plant(r.code);
    if (increasing)
        r.out_of_range = (r.code == 0 && r.settled > threshold) ||
                         (r.code == max_code && r.settled < threshold);
    else
        r.out_of_range = (r.code == 0 && r.settled < threshold) ||
                         (r.code == max_code && r.settled > threshold);
    return r;
}

std::string transcript_csv(const SarResult& r)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "step,bit,trial_code,node_voltage,kept\n";
    for (std::size_t k = 0; k < r.transcript.size(); ++k) {
        const auto& s = r.transcript[k];
        os << k << ',' << s.bit << ',' << s.trial_code << ',' << s.node_voltage << ','
           << (s.kept ? 1 : 0) << '\n';
    }
    return os.str();
}

CalibrationSchedule make_schedule(std::size_t n, double vref_in, double vref_out)
{
    CalibrationSchedule s;
    s.neuron_ids.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        s.neuron_ids[k] = k;
    s.vref_in.assign(n, vref_in);
    s.vref_out.assign(n, vref_out);
    return s;
}

namespace {

void calibrate_node(const NeuronNodes& nn, CalibrationNode node, double vref, int nbits,
                    const SarOptions& opts, NeuronCalibration& res)
{
    if (node == CalibrationNode::Input) {
        const std::uint32_t code_out = res.code_out;
        auto plant = [&](std::uint32_t c) { return nn.input_node(c, code_out); };
        const auto r = sar_calibrate(plant, vref, nbits, nn.input_direction, opts);
        res.code_in = r.code;
        res.v_in = r.settled;
        res.input_out_of_range = r.out_of_range;
        res.comparisons += r.comparisons;
    } else {
        const std::uint32_t code_in = res.code_in;
        auto plant = [&](std::uint32_t c) { return nn.output_node(code_in, c); };
        const auto r = sar_calibrate(plant, vref, nbits, nn.output_direction, opts);
        res.code_out = r.code;
        res.v_out = r.settled;
        res.output_out_of_range = r.out_of_range;
        res.comparisons += r.comparisons;
        const double v_in_now = nn.input_node(res.code_in, res.code_out);
        res.input_drift = v_in_now - res.v_in;
    }
}

}  // namespace

CalibrationSchedule calibrate_array(std::span<const NeuronNodes> neurons,
                                    CalibrationSchedule schedule, int nbits)
{
    const std::size_t n = neurons.size();
    if (schedule.vref_in.size() != n || schedule.vref_out.size() != n)
        throw std::invalid_argument("calibrate_array: one target pair per neuron required");
    std::vector<char> seen(n, 0);
    for (std::size_t id : schedule.neuron_ids) {
        if (id >= n || seen[id])
            throw std::invalid_argument("calibrate_array: schedule must visit each neuron once");
        seen[id] = 1;
    }
    if (schedule.neuron_ids.size() != n)
        throw std::invalid_argument("calibrate_array: schedule must visit each neuron once");

    schedule.results.assign(n, NeuronCalibration{});
    schedule.log.clear();
    schedule.running = true;

    auto visit = [&](std::size_t pos, CalibrationNode node) {
        schedule.active_index = pos;
        const std::size_t id = schedule.neuron_ids[pos];
        NeuronCalibration& res = schedule.results[id];
        if (res.failed)
            return;
        const int before = res.comparisons;
        try {
            const double vref = node == CalibrationNode::Input ? schedule.vref_in[id]
                                                               : schedule.vref_out[id];
            calibrate_node(neurons[id], node, vref, nbits, schedule.sar, res);
        } catch (const std::exception& e) {
            res.failed = true;
            res.error = e.what();
        }
        schedule.log.push_back({id, node, res.comparisons - before});
    };

    if (schedule.mode == ScheduleMode::Sequential) {
        for (std::size_t pos = 0; pos < n; ++pos)
            visit(pos, CalibrationNode::Input);
        if (schedule.calibrate_output)
            for (std::size_t pos = 0; pos < n; ++pos)
                visit(pos, CalibrationNode::Output);
    } else {
        for (std::size_t pos = 0; pos < n; ++pos) {
            visit(pos, CalibrationNode::Input);
            if (schedule.calibrate_output)
                visit(pos, CalibrationNode::Output);
        }
    }
    schedule.running = false;
    return schedule;
}

double calibration_latency(std::size_t n_neurons, std::size_t nodes_per_neuron, int nbits,
                           double t_step)
{
    return static_cast<double>(n_neurons) * static_cast<double>(nodes_per_neuron) *
           static_cast<double>(nbits) * t_step;
}

}  // namespace rgcsim::sar

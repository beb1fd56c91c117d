#include "rgcsim/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "rgcsim/rng.hpp"

namespace rgcsim::net {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values))
{
    if (data.size() != r * c)
        throw std::invalid_argument("matrix value count does not match dimensions");
}

Matrix parse_matrix_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    Matrix m;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        std::vector<double> row;
        bool numeric = true;
        std::stringstream fields(line);
        std::string f;
        while (std::getline(fields, f, ',')) {
            const auto b = f.find_first_not_of(" \t");
            const auto e = f.find_last_not_of(" \t");
            f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size()) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (m.rows == 0)
                continue;  // header
            throw std::invalid_argument("matrix CSV line " + std::to_string(line_no) +
                                        ": non-numeric field");
        }
        if (m.rows == 0)
            m.cols = row.size();
        else if (row.size() != m.cols)
            throw std::invalid_argument("matrix CSV line " + std::to_string(line_no) +
                                        ": expected " + std::to_string(m.cols) + " columns");
        m.data.insert(m.data.end(), row.begin(), row.end());
        ++m.rows;
    }
    return m;
}

std::string matrix_to_csv(const Matrix& m)
{
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, m(i, j),
                                         std::chars_format::general, 17);
            (void)ec;
            if (j)
                out += ',';
            out.append(buf, p);
        }
        out += '\n';
    }
    return out;
}

const char* to_string(Fidelity f)
{
    switch (f) {
    case Fidelity::IdealMath: return "ideal_math";
    case Fidelity::CircuitIdeal: return "circuit_ideal";
    case Fidelity::CircuitNonIdeal: return "circuit_nonideal";
    }
    return "unknown";
}

double MappedLayer::quantized_weight(std::size_t i, std::size_t j) const
{
    const double levels_max = std::ldexp(1.0, bits) - 1.0;
    return static_cast<double>(levels[i * outputs() + j]) * w_max / levels_max;
}

MappedLayer map_weights(const LayerSpec& layer, int bits, double g_min, double g_max)
{
    if (bits < 1 || bits > 30)
        throw std::invalid_argument("map_weights: bits must be in [1, 30]");
    const Matrix& w = layer.weights;
    if (w.rows == 0 || w.cols == 0)
        throw std::invalid_argument("map_weights: empty weight matrix");

    double w_max = 0.0;
    for (double v : w.data) {
        if (!std::isfinite(v))
            throw std::invalid_argument("map_weights: weights must be finite");
        w_max = std::max(w_max, std::abs(v));
    }
    if (w_max == 0.0)
        w_max = 1.0;

    const auto levels_max = static_cast<std::int64_t>((std::int64_t{1} << bits) - 1);
    const double g_step = (g_max - g_min) / static_cast<double>(levels_max);

    MappedLayer m{layer,
                  crossbar::ConductanceMatrix(w.rows, w.cols, g_min, g_max),
                  crossbar::ConductanceMatrix(w.rows, w.cols, g_min, g_max),
                  std::vector<std::int64_t>(w.rows * w.cols, 0),
                  bits,
                  w_max,
                  g_step,
                  (g_max - g_min) / w_max};
    for (std::size_t i = 0; i < w.rows; ++i)
        for (std::size_t j = 0; j < w.cols; ++j) {
            const double v = w(i, j);
            const auto k = static_cast<std::int64_t>(
                std::round(std::abs(v) / w_max * static_cast<double>(levels_max)));
            const double g = k == levels_max ? g_max : g_min + static_cast<double>(k) * g_step;
            if (v > 0.0)
                m.g_plus.set(i, j, g);
            else if (v < 0.0)
                m.g_minus.set(i, j, g);
            m.levels[i * w.cols + j] = v < 0.0 ? -k : k;
        }
    return m;
}

MappedLayer map_weights(const Matrix& w, int bits, double g_min, double g_max)
{
    return map_weights(LayerSpec{w, {}}, bits, g_min, g_max);
}

void validate_layers(std::span<const LayerSpec> layers)
{
    if (layers.empty())
        throw std::invalid_argument("network needs at least one layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l].weights;
        if (w.rows == 0 || w.cols == 0 || w.data.size() != w.rows * w.cols)
            throw std::invalid_argument("layer " + std::to_string(l) + ": malformed weights");
        for (double v : w.data)
            if (!std::isfinite(v))
                throw std::invalid_argument("layer " + std::to_string(l) + ": non-finite weight");
        if (l > 0 && layers[l - 1].weights.cols != w.rows)
            throw std::invalid_argument("layer " + std::to_string(l) + " expects " +
                                        std::to_string(w.rows) + " inputs but layer " +
                                        std::to_string(l - 1) + " produces " +
                                        std::to_string(layers[l - 1].weights.cols));
    }
}

Network::Network(std::vector<MappedLayer> layers, Fidelity fidelity, CircuitConfig cfg)
    : layers_(std::move(layers)), fidelity_(fidelity), cfg_(std::move(cfg))
{
    std::vector<LayerSpec> specs;
    for (const auto& m : layers_)
        specs.push_back(m.source);
    validate_layers(specs);
    if (fidelity_ != Fidelity::IdealMath)
        prepare();
}

std::size_t Network::neuron_count() const
{
    std::size_t n = 0;
    for (const auto& m : layers_)
        n += m.outputs();
    return n;
}

std::size_t Network::mac_count() const
{
    std::size_t n = 0;
    for (const auto& m : layers_)
        n += m.inputs() * m.outputs();
    return n;
}

std::size_t Network::calibrated_nodes() const
{
    return fidelity_ == Fidelity::CircuitNonIdeal ? 2 * neuron_count() : 0;
}

void Network::prepare()
{
    using neuron::Bias;
    const auto& nominal = cfg_.neuron;
    neuron::validate(nominal);
    if (fidelity_ == Fidelity::CircuitNonIdeal && nominal.dac.nbits != nominal.dac_out.nbits)
        throw std::invalid_argument("CircuitNonIdeal needs equal input and output DAC widths");

    // Nominal design point: input node at vref_in, output DAC at mid-scale.
    const auto in_plant = [&](std::uint32_t c) { return neuron::solve_dc(nominal, Bias{0, c, 0}).v_in; };
    const auto code_in = sar::sar_calibrate(in_plant, cfg_.vref_in, nominal.dac.nbits,
                                            sar::Direction::Increasing)
                             .code;
    const std::uint32_t code_out = (neuron::dac_max_code(nominal.dac_out) + 1) / 2;
    const double vref_out = neuron::solve_dc(nominal, Bias{0, code_in, code_out}).v_out;
    const auto fit = neuron::transfer_curve(nominal, code_in, code_out,
                                            neuron::linear_sweep(0.0, cfg_.i_full_scale, 11));
    if (fit.infeasible > 0)
        throw std::runtime_error("nominal neuron cannot swing the configured full-scale current");

    circuits_.clear();
    double input_bound = 1.0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& m = layers_[l];
        LayerCircuit lc;
        lc.slope = fit.slope;
        lc.intercept = fit.intercept;
        lc.amps_per_unit = cfg_.v_read * m.scale;
        double pre_bound = 0.0;
        for (std::size_t j = 0; j < m.outputs(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.inputs(); ++i)
                s += std::abs(m.quantized_weight(i, j));
            pre_bound = std::max(pre_bound, s * input_bound);
        }
        if (pre_bound == 0.0)
            pre_bound = 1.0;
        lc.current_gain = cfg_.i_full_scale / (lc.amps_per_unit * pre_bound);
        input_bound = m.source.activation.kind == ActivationKind::Threshold ? 1.0 : pre_bound;

        const double theta = m.source.activation.kind == ActivationKind::Threshold
                                 ? m.source.activation.threshold
                                 : 0.0;
        const double v_compare =
            lc.intercept + lc.slope * lc.current_gain * lc.amps_per_unit * theta;

        lc.neurons.resize(m.outputs());
        for (auto& ns : lc.neurons) {
            ns.params = nominal;
            ns.v_compare = v_compare;
            ns.calibration.code_in = code_in;
            ns.calibration.code_out = code_out;
        }

        if (fidelity_ == Fidelity::CircuitNonIdeal) {
            const std::uint64_t layer_seed = split_seed(cfg_.seed, l);
            std::vector<sar::NeuronNodes> nodes(m.outputs());
            for (std::size_t j = 0; j < m.outputs(); ++j) {
                Rng rng(split_seed(layer_seed, j));
                lc.neurons[j].params = mc::sample_params(nominal, cfg_.mismatch, rng);
                const auto* p = &lc.neurons[j].params;
                nodes[j].input_node = [p](std::uint32_t ci, std::uint32_t co) {
                    return neuron::solve_dc(*p, Bias{0, ci, co}).v_in;
                };
                nodes[j].output_node = [p](std::uint32_t ci, std::uint32_t co) {
                    return neuron::solve_dc(*p, Bias{0, ci, co}).v_out;
                };
                nodes[j].input_direction = sar::Direction::Increasing;
                nodes[j].output_direction = sar::Direction::Decreasing;
            }
            auto sched = sar::calibrate_array(
                nodes, sar::make_schedule(m.outputs(), cfg_.vref_in, vref_out), nominal.dac.nbits);

            lc.parasitics.r_wire_row = cfg_.r_wire_row;
            lc.parasitics.r_wire_col = cfg_.r_wire_col;
            lc.parasitics.r_neuron_in.assign(2 * m.outputs(), 0.0);
            lc.parasitics.v_neuron_offset.assign(2 * m.outputs(), 0.0);
            for (std::size_t j = 0; j < m.outputs(); ++j) {
                auto& ns = lc.neurons[j];
                ns.calibration = sched.results[j];
                if (!ns.calibration.failed) {
                    try {
                        const auto op = neuron::solve_dc(
                            ns.params, Bias{0, ns.calibration.code_in, ns.calibration.code_out});
                        try {
                            ns.zin = neuron::small_signal(ns.params, op).zin;
                        } catch (const neuron::PreconditionError&) {
                            ns.zin = neuron::zin_numeric(ns.params, op.bias);
                        }
                        ns.v_in_offset = op.v_in - cfg_.vref_in;
                    } catch (const std::exception& e) {
                        ns.calibration.failed = true;
                        ns.calibration.error = e.what();
                    }
                }
                lc.parasitics.r_neuron_in[j] = lc.parasitics.r_neuron_in[m.outputs() + j] = ns.zin;
                lc.parasitics.v_neuron_offset[j] =
                    lc.parasitics.v_neuron_offset[m.outputs() + j] = ns.v_in_offset;
            }

            std::vector<double> combined(m.inputs() * 2 * m.outputs());
            for (std::size_t i = 0; i < m.inputs(); ++i)
                for (std::size_t j = 0; j < m.outputs(); ++j) {
                    combined[i * 2 * m.outputs() + j] = m.g_plus(i, j);
                    combined[i * 2 * m.outputs() + m.outputs() + j] = m.g_minus(i, j);
                }
            lc.combined.emplace(m.inputs(), 2 * m.outputs(), m.g_plus.g_min(), m.g_plus.g_max(),
                                std::move(combined));
        }
        circuits_.push_back(std::move(lc));
    }
}

LayerResult Network::run_ideal(std::size_t l, std::span<const double> x) const
{
    const auto& src = layers_[l].source;
    LayerResult r;
    r.pre_activation.assign(src.weights.cols, 0.0);
    for (std::size_t i = 0; i < src.weights.rows; ++i)
        for (std::size_t j = 0; j < src.weights.cols; ++j)
            r.pre_activation[j] += x[i] * src.weights(i, j);
    const bool thr = src.activation.kind == ActivationKind::Threshold;
    const double theta = thr ? src.activation.threshold : 0.0;
    for (double pre : r.pre_activation) {
        const bool bit = pre >= theta;
        r.bits.push_back(bit);
        r.outputs.push_back(thr ? (bit ? 1.0 : 0.0) : pre);
    }
    return r;
}

LayerResult Network::run_circuit(std::size_t l, std::span<const double> x,
                                 std::vector<std::string>& failures) const
{
    const auto& m = layers_[l];
    const auto& lc = circuits_[l];
    const std::size_t n_out = m.outputs();
    crossbar::Excitation ex;
    ex.values.resize(m.inputs());
    for (std::size_t i = 0; i < m.inputs(); ++i)
        ex.values[i] = x[i] * cfg_.v_read;

    std::vector<double> i_diff(n_out);
    LayerResult r;
    if (fidelity_ == Fidelity::CircuitIdeal) {
        const auto ip = crossbar::output_currents_ideal(m.g_plus, ex);
        const auto im = crossbar::output_currents_ideal(m.g_minus, ex);
        for (std::size_t j = 0; j < n_out; ++j)
            i_diff[j] = ip[j] - im[j];
        r.crossbar_power = crossbar::ideal_read_power(m.g_plus, ex.values) +
                           crossbar::ideal_read_power(m.g_minus, ex.values);
    } else {
        const auto sol = crossbar::solve_nonideal(*lc.combined, ex, lc.parasitics);
        for (std::size_t j = 0; j < n_out; ++j)
            i_diff[j] = sol.column_currents[j] - sol.column_currents[n_out + j];
        r.crossbar_power = sol.dissipated_power;
    }

    const bool thr = m.source.activation.kind == ActivationKind::Threshold;
    const double v_per_unit = lc.slope * lc.current_gain * lc.amps_per_unit;
    for (std::size_t j = 0; j < n_out; ++j) {
        const auto& ns = lc.neurons[j];
        const double i_neuron = lc.current_gain * i_diff[j];
        double v_out = std::nan("");
        if (fidelity_ == Fidelity::CircuitIdeal) {
            v_out = lc.intercept + lc.slope * i_neuron;
        } else if (ns.calibration.failed) {
            failures.push_back("layer " + std::to_string(l) + " neuron " + std::to_string(j) +
                               ": calibration failed: " + ns.calibration.error);
        } else {
            try {
                v_out = neuron::solve_dc(ns.params, neuron::Bias{i_neuron, ns.calibration.code_in,
                                                                 ns.calibration.code_out})
                            .v_out;
            } catch (const std::exception& e) {
                failures.push_back("layer " + std::to_string(l) + " neuron " +
                                   std::to_string(j) + ": " + e.what());
            }
        }
        const bool bit = v_out >= ns.v_compare;
        const double pre = (v_out - lc.intercept) / v_per_unit;
        r.v_out.push_back(v_out);
        r.bits.push_back(bit);
        r.pre_activation.push_back(pre);
        r.outputs.push_back(thr ? (bit ? 1.0 : 0.0) : pre);
    }
    return r;
}

InferenceResult Network::infer(std::span<const double> input) const
{
    if (input.size() != layers_.front().inputs())
        throw std::invalid_argument("input length " + std::to_string(input.size()) +
                                    " does not match " + std::to_string(layers_.front().inputs()) +
                                    " network inputs");
    InferenceResult res;
    std::vector<double> x(input.begin(), input.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        res.layers.push_back(fidelity_ == Fidelity::IdealMath ? run_ideal(l, x)
                                                              : run_circuit(l, x, res.failures));
        x = res.layers.back().outputs;
    }
    return res;
}

InferenceResult infer(const std::vector<MappedLayer>& layers, std::span<const double> input,
                      Fidelity fidelity, const CircuitConfig& cfg)
{
    return Network(layers, fidelity, cfg).infer(input);
}

}  // namespace rgcsim::net

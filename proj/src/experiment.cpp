#include "rgcsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rgcsim/crossbar.hpp"
#include "rgcsim/energy.hpp"
#include "rgcsim/network.hpp"
#include "rgcsim/rgc_neuron.hpp"
#include "rgcsim/sar.hpp"
#include "rgcsim/variability.hpp"

#ifndef RGCSIM_VERSION
#define RGCSIM_VERSION "dev"
#endif

namespace rgcsim::frontend {

using nlohmann::json;

const char* to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::Op: return "op";
    case ExperimentKind::SmallSignal: return "smallsignal";
    case ExperimentKind::Sar: return "sar";
    case ExperimentKind::Mc: return "mc";
    case ExperimentKind::Infer: return "infer";
    case ExperimentKind::Energy: return "energy";
    }
    return "?";
}

ExperimentKind parse_kind(const std::string& name)
{
    for (auto k : {ExperimentKind::Op, ExperimentKind::SmallSignal, ExperimentKind::Sar,
                   ExperimentKind::Mc, ExperimentKind::Infer, ExperimentKind::Energy})
        if (name == to_string(k))
            return k;
    throw std::invalid_argument("unknown experiment '" + name + "'");
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UnsupportedFormat*>(&e))
        return exit_code::config;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e))
        return exit_code::io;
    if (const auto* x = dynamic_cast<const ExperimentError*>(&e)) {
        switch (x->category()) {
        case ExperimentError::Category::Config: return exit_code::config;
        case ExperimentError::Category::Io: return exit_code::io;
        case ExperimentError::Category::Solver: return exit_code::solver;
        }
    }
    return exit_code::solver;
}

namespace {

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream f(p);
    if (!f)
        throw IoError("cannot read '" + p.string() + "'");
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::uint32_t checked_code(std::int64_t code, const neuron::DacSpec& dac, const char* key)
{
    if (code < 0 || static_cast<std::uint64_t>(code) > neuron::dac_max_code(dac))
        throw ConfigError(ConfigError::Kind::Range, key,
                          "code must be in [0, " + std::to_string(neuron::dac_max_code(dac)) + "]");
    return static_cast<std::uint32_t>(code);
}

json mos_json(const device::MosEval& m)
{
    return {{"current", m.current}, {"region", device::to_string(m.region)},
            {"gm", m.gm}, {"gds", m.gds}, {"ro", m.ro}};
}

json op_json(const neuron::OperatingPoint& op)
{
    json residual = json::array();
    for (double r : op.residual)
        residual.push_back(r);
    return {{"i_in", op.bias.i_in},
            {"code_in", op.bias.code_in},
            {"code_out", op.bias.code_out},
            {"v_in", op.v_in},
            {"v_gate1", op.v_gate1},
            {"v_mid", op.v_mid},
            {"v_out", op.v_out},
            {"i_m1", op.i_m1},
            {"i_m2", op.i_m2},
            {"i_m3", op.i_m3},
            {"i_dac", op.i_dac},
            {"i_dac_out", op.i_dac_out},
            {"m1", mos_json(op.m1)},
            {"m2", mos_json(op.m2)},
            {"m3", mos_json(op.m3)},
            {"kcl_residual", residual},
            {"iterations", op.iterations}};
}

json stats_json(const mc::Stats& s) { return {{"n", s.n}, {"mean", s.mean}, {"std", s.std}}; }

json table(std::vector<std::string> columns, json rows)
{
    return {{"columns", std::move(columns)}, {"rows", std::move(rows)}};
}

neuron::Bias op_bias(const SimConfig& cfg)
{
    return {cfg.op.i_in, checked_code(cfg.op.code_in, cfg.neuron.dac, "op.code_in"),
            checked_code(cfg.op.code_out, cfg.neuron.dac_out, "op.code_out")};
}

json run_op(const SimConfig& cfg)
{
    return {{"operating_point", op_json(neuron::solve_dc(cfg.neuron, op_bias(cfg)))}};
}

json run_smallsignal(const SimConfig& cfg)
{
    const auto bias = op_bias(cfg);
    const auto op = neuron::solve_dc(cfg.neuron, bias);
    const auto ss = neuron::small_signal(cfg.neuron, op);
    const double zin_fd = neuron::zin_numeric(cfg.neuron, bias);
    const double a_fd = neuron::gain_numeric(cfg.neuron, op);
    const double rout_fd = neuron::rout_numeric(cfg.neuron, op);

    const auto sweep = neuron::linear_sweep(bias.i_in, cfg.network.i_full_scale, 11);
    const auto curve = neuron::transfer_curve(cfg.neuron, bias.code_in, bias.code_out, sweep);
    json rows = json::array();
    for (const auto& pt : curve.points)
        rows.push_back({pt.i_in, pt.v_in, pt.v_out, pt.feasible});

    const auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    return {{"operating_point", op_json(op)},
            {"formula", {{"a", ss.a}, {"zin", ss.zin}, {"rout", ss.rout},
                         {"gm_tuned", ss.gm_tuned}, {"v_ds1_tuned", ss.v_ds1_tuned}}},
            {"numeric", {{"a", a_fd}, {"zin", zin_fd}, {"rout", rout_fd}}},
            {"relative_deviation", {{"a", rel(ss.a, a_fd)}, {"zin", rel(ss.zin, zin_fd)},
                                    {"rout", rel(ss.rout, rout_fd)}}},
            {"transfer", {{"slope_ohm", curve.slope}, {"intercept_v", curve.intercept},
                          {"max_fit_deviation", curve.max_fit_deviation},
                          {"infeasible", curve.infeasible}}},
            {"table", table({"i_in", "v_in", "v_out", "feasible"}, rows)}};
}

json sar_node_json(const sar::SarResult& r, const sar::Plant& plant, double vref, int nbits)
{
    // Exhaustive search for the code nearest the target.
    const std::uint32_t n_codes = 1u << nbits;
    std::uint32_t best = 0;
    double best_err = std::abs(plant(0) - vref);
    for (std::uint32_t c = 1; c < n_codes; ++c) {
        const double e = std::abs(plant(c) - vref);
        if (e < best_err) {
            best_err = e;
            best = c;
        }
    }
    const std::uint32_t nb = r.code + 1 < n_codes ? r.code + 1 : r.code - 1;
    const double lsb = std::abs(plant(nb) - r.settled);
    return {{"code", r.code},
            {"settled_v", r.settled},
            {"vref", vref},
            {"error_v", r.settled - vref},
            {"local_lsb_v", lsb},
            {"within_one_lsb", std::abs(r.settled - vref) <= lsb},
            {"nearest_code", best},
            {"out_of_range", r.out_of_range},
            {"comparisons", r.comparisons}};
}

json run_sar(const SimConfig& cfg)
{
    const int n_max = static_cast<int>(cfg.sar.n_max);
    const auto points = static_cast<std::size_t>(cfg.sar.grid_points);
    json grid = json::array();
    bool holds = true;
    for (int n = 1; n <= n_max; ++n) {
        double worst = 0.0;
        for (std::size_t k = 0; k < points; ++k) {
            const double x = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(points - 1);
            worst = std::max(worst, sar::normalized_converge(x, n).error());
        }
        const double bound = std::ldexp(1.0, -n);
        holds = holds && worst <= bound;
        grid.push_back({{"n", n}, {"max_error", worst}, {"bound", bound}});
    }

    const auto& p = cfg.neuron;
    const int nbits = p.dac.nbits;
    sar::SarOptions opts;
    opts.comparator_offset = cfg.sar.comparator_offset;

    const sar::Plant in_plant = [&](std::uint32_t c) {
        return neuron::solve_dc(p, neuron::Bias{0.0, c, 0}).v_in;
    };
    const auto in = sar::sar_calibrate(in_plant, cfg.sar.vref_in, nbits, sar::Direction::Increasing, opts);

    const std::uint32_t mid = 1u << (p.dac_out.nbits - 1);
    const sar::Plant out_plant = [&](std::uint32_t c) {
        return neuron::solve_dc(p, neuron::Bias{0.0, in.code, c}).v_out;
    };
    const double vref_out = cfg.sar.vref_out > 0.0 ? cfg.sar.vref_out : out_plant(mid);
    const auto out = sar::sar_calibrate(out_plant, vref_out, p.dac_out.nbits,
                                        sar::Direction::Decreasing, opts);

    json rows = json::array();
    for (std::size_t k = 0; k < in.transcript.size(); ++k) {
        const auto& s = in.transcript[k];
        rows.push_back({"input", k, s.bit, s.trial_code, s.node_voltage, s.kept});
    }
    for (std::size_t k = 0; k < out.transcript.size(); ++k) {
        const auto& s = out.transcript[k];
        rows.push_back({"output", k, s.bit, s.trial_code, s.node_voltage, s.kept});
    }
    return {{"normalized", {{"grid_points", points}, {"n_max", n_max}, {"per_n", grid},
                            {"max_error", grid.back()["max_error"]}, {"bound_holds", holds}}},
            {"input", sar_node_json(in, in_plant, cfg.sar.vref_in, nbits)},
            {"output", sar_node_json(out, out_plant, vref_out, p.dac_out.nbits)},
            {"latency_s", sar::calibration_latency(1, 2, nbits, cfg.sar.t_step)},
            {"table", table({"node", "step", "bit", "trial_code", "node_voltage", "kept"}, rows)}};
}

json run_mc(const SimConfig& cfg)
{
    if (cfg.mc.runs < 2)
        throw ConfigError(ConfigError::Kind::Range, "mc.runs",
                          "Monte Carlo needs at least 2 runs (got " + std::to_string(cfg.mc.runs) + ")");
    mc::McOptions o;
    o.n_runs = static_cast<std::size_t>(cfg.mc.runs);
    o.seed = cfg.mc.seed;
    o.calibrate = cfg.mc.calibrate;
    o.vref = cfg.sar.vref_in;
    o.nbits = static_cast<int>(cfg.sar.nbits);
    o.workers = static_cast<unsigned>(cfg.mc.workers);
    const auto r = mc::run_mc(cfg.neuron, cfg.mismatch, o);

    json rows = json::array();
    for (const auto& s : r.samples)
        rows.push_back({s.run_index, s.v_in_pre, s.v_in_post, s.code});
    const double reduction = r.v_in_post.std > 0.0 ? r.v_in_pre.std / r.v_in_post.std
                                                   : std::numeric_limits<double>::infinity();
    // Reference measurement: 10.3519 mV before and 2.63019 mV (100 runs) after calibration.
    return {{"runs", r.n_runs},
            {"calibrated", r.calibrated},
            {"vref", r.vref},
            {"nbits", r.nbits},
            {"v_in_pre", stats_json(r.v_in_pre)},
            {"v_in_post", stats_json(r.v_in_post)},
            {"v_out_pre", stats_json(r.v_out_pre)},
            {"v_out_post", stats_json(r.v_out_post)},
            {"excluded", r.excluded},
            {"out_of_range", r.out_of_range},
            {"reduction", r.calibrated ? json(reduction) : json(nullptr)},
            {"reference", {{"std_pre", 10.3519e-3}, {"std_post", 2.63019e-3},
                           {"reduction", 10.3519 / 2.63019}}},
            {"table", table({"run_index", "v_in_pre", "v_in_post", "code"}, rows)}};
}

std::vector<net::LayerSpec> load_layers(const SimConfig& cfg)
{
    if (cfg.network.layers.empty())
        throw ConfigError(ConfigError::Kind::MissingSection, "network.layers",
                          "this experiment needs at least one network layer");
    std::vector<net::LayerSpec> out;
    for (const auto& e : cfg.network.layers) {
        net::LayerSpec s;
        if (!e.csv.empty()) {
            s.weights = net::parse_matrix_csv(read_file(cfg.base_dir / e.csv));
        } else {
            std::vector<double> v;
            for (const auto& row : e.weights)
                v.insert(v.end(), row.begin(), row.end());
            s.weights = net::Matrix(e.weights.size(), e.weights.front().size(), std::move(v));
        }
        s.activation.kind = e.activation == "threshold" ? net::ActivationKind::Threshold
                                                        : net::ActivationKind::Linear;
        s.activation.threshold = e.threshold;
        out.push_back(std::move(s));
    }
    try {
        net::validate_layers(out);
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ConfigError::Kind::Range, "network.layers", ex.what());
    }
    return out;
}

Rows load_inputs(const SimConfig& cfg)
{
    if (!cfg.network.inputs_csv.empty()) {
        const auto m = net::parse_matrix_csv(read_file(cfg.base_dir / cfg.network.inputs_csv));
        Rows rows(m.rows, std::vector<double>(m.cols));
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                rows[i][j] = m(i, j);
        return rows;
    }
    return cfg.network.inputs;
}

net::Fidelity fidelity_of(const std::string& s)
{
    if (s == "ideal_math")
        return net::Fidelity::IdealMath;
    if (s == "circuit_nonideal")
        return net::Fidelity::CircuitNonIdeal;
    return net::Fidelity::CircuitIdeal;
}

net::CircuitConfig circuit_config(const SimConfig& cfg)
{
    net::CircuitConfig c;
    c.neuron = cfg.neuron;
    c.v_read = cfg.network.v_read;
    c.i_full_scale = cfg.network.i_full_scale;
    c.vref_in = cfg.sar.vref_in;
    c.r_wire_row = cfg.network.r_wire_row;
    c.r_wire_col = cfg.network.r_wire_col;
    c.mismatch = cfg.mismatch;
    c.seed = cfg.mc.seed;
    return c;
}

std::vector<net::MappedLayer> mapped_layers(const SimConfig& cfg)
{
    std::vector<net::MappedLayer> mapped;
    for (const auto& l : load_layers(cfg))
        mapped.push_back(net::map_weights(l, static_cast<int>(cfg.network.bits), cfg.network.g_min,
                                          cfg.network.g_max));
    return mapped;
}

json run_infer(const SimConfig& cfg)
{
    const auto mapped = mapped_layers(cfg);
    const Rows inputs = load_inputs(cfg);
    if (inputs.empty())
        throw ConfigError(ConfigError::Kind::MissingSection, "network.inputs",
                          "inference needs input rows (network.inputs or network.inputs_csv)");
    for (std::size_t k = 0; k < inputs.size(); ++k)
        if (inputs[k].size() != mapped.front().inputs())
            throw ConfigError(ConfigError::Kind::Range, "network.inputs[" + std::to_string(k) + "]",
                              "expected " + std::to_string(mapped.front().inputs()) + " values");

    const net::Network model(mapped, fidelity_of(cfg.network.fidelity), circuit_config(cfg));
    const net::Network oracle(mapped, net::Fidelity::IdealMath);
    const std::size_t n_out = mapped.back().outputs();

    std::vector<std::string> cols{"input_index"};
    for (std::size_t j = 0; j < n_out; ++j)
        cols.push_back("out_" + std::to_string(j));
    for (std::size_t j = 0; j < n_out; ++j)
        cols.push_back("bit_" + std::to_string(j));
    for (std::size_t j = 0; j < n_out; ++j)
        cols.push_back("ideal_bit_" + std::to_string(j));

    json rows = json::array();
    json failures = json::array();
    std::size_t agree = 0;
    double power = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto r = model.infer(inputs[k]);
        const auto ref = oracle.infer(inputs[k]);
        json row = json::array({k});
        for (double v : r.outputs())
            row.push_back(v);
        for (bool b : r.bits())
            row.push_back(b ? 1 : 0);
        for (bool b : ref.bits())
            row.push_back(b ? 1 : 0);
        for (std::size_t j = 0; j < n_out; ++j)
            agree += r.bits()[j] == ref.bits()[j];
        for (const auto& f : r.failures)
            failures.push_back("input " + std::to_string(k) + ": " + f);
        for (const auto& l : r.layers)
            power += l.crossbar_power;
        rows.push_back(std::move(row));
    }
    return {{"fidelity", cfg.network.fidelity},
            {"bits", cfg.network.bits},
            {"n_inputs", inputs.size()},
            {"neurons", model.neuron_count()},
            {"bit_agreement", static_cast<double>(agree) / static_cast<double>(inputs.size() * n_out)},
            {"mean_crossbar_power_w", power / static_cast<double>(inputs.size())},
            {"failures", failures},
            {"table", table(cols, rows)}};
}

json assumption(const SimConfig& cfg, const std::string& key, double value, const char* fallback)
{
    return {{"value", value}, {"source", cfg.is_explicit("energy." + key) ? "config" : fallback}};
}

json run_energy(const SimConfig& cfg)
{
    energy::RunRecord rec;
    std::string workload;
    if (!cfg.network.layers.empty()) {
        auto mapped = mapped_layers(cfg);
        auto fid = fidelity_of(cfg.network.fidelity);
        if (fid == net::Fidelity::IdealMath)
            fid = net::Fidelity::CircuitIdeal;
        const net::Network model(std::move(mapped), fid, circuit_config(cfg));
        Rows inputs = load_inputs(cfg);
        if (inputs.empty())
            inputs.push_back(std::vector<double>(model.layers().front().inputs(), 1.0));
        double power = 0.0;
        for (const auto& x : inputs)
            for (const auto& l : model.infer(x).layers)
                power += l.crossbar_power;
        rec.n_neurons = model.neuron_count();
        rec.n_mac = model.mac_count();
        rec.n_activations = model.neuron_count();
        rec.crossbar_power = power / static_cast<double>(inputs.size());
        workload = "network";
    } else if (!cfg.crossbar.g.empty() || !cfg.crossbar.csv.empty()) {
        const auto& c = cfg.crossbar;
        crossbar::ConductanceMatrix g(1, 1, c.g_min, c.g_max);
        if (!c.csv.empty()) {
            g = crossbar::parse_csv(read_file(cfg.base_dir / c.csv), c.g_min, c.g_max);
        } else {
            std::vector<double> v;
            for (const auto& row : c.g)
                v.insert(v.end(), row.begin(), row.end());
            g = crossbar::ConductanceMatrix(c.g.size(), c.g.front().size(), c.g_min, c.g_max, std::move(v));
        }
        if (c.inputs.size() != g.rows())
            throw ConfigError(ConfigError::Kind::Range, "crossbar.inputs",
                              "expected " + std::to_string(g.rows()) + " row voltages");
        rec.n_neurons = g.cols();
        rec.n_mac = g.rows() * g.cols();
        rec.n_activations = g.cols();
        rec.crossbar_power = crossbar::ideal_read_power(g, c.inputs);
        workload = "crossbar";
    } else {
        rec.n_neurons = 1;
        workload = "single_neuron";
    }
    rec.n_calibrated_nodes = 2 * rec.n_neurons;
    rec.nbits = static_cast<int>(cfg.sar.nbits);

    const auto& e = cfg.energy;
    const auto r = energy::energy_estimate(rec, e);
    json rows = json::array({json::array({r.e_crossbar, r.e_neurons, r.e_sar, r.e_total, r.t_eval,
                                          r.e_digital_baseline, r.ratio})});
    return {{"workload", workload},
            {"counts", {{"neurons", rec.n_neurons}, {"macs", rec.n_mac},
                        {"activations", rec.n_activations},
                        {"calibrated_nodes", rec.n_calibrated_nodes}, {"nbits", rec.nbits},
                        {"crossbar_power_w", rec.crossbar_power}}},
            {"energy", {{"e_crossbar_j", r.e_crossbar}, {"e_neurons_j", r.e_neurons},
                        {"e_sar_j", r.e_sar}, {"e_total_j", r.e_total}, {"t_eval_s", r.t_eval},
                        {"baseline_j", r.e_digital_baseline}, {"ratio", r.ratio}}},
            {"ratio_at_least_100", r.ratio >= 100.0},
            {"ratio_note", "the ratio depends on the digital baseline assumptions e_mac and e_act"},
            {"assumptions",
             {{"t_eval", assumption(cfg, "t_eval", e.t_eval, "default: nanosecond-scale neuron response")},
              {"p_neuron", assumption(cfg, "p_neuron", e.p_neuron, "default: measured neuron power at vdd = 1 V")},
              {"t_sar_step", assumption(cfg, "t_sar_step", e.t_sar_step, "default: assumed")},
              {"p_sar", assumption(cfg, "p_sar", e.p_sar, "default: assumed")},
              {"n_inferences", assumption(cfg, "n_inferences", e.n_inferences, "default: assumed amortization count")},
              {"e_mac", assumption(cfg, "e_mac", e.e_mac, "default: assumed digital MAC energy")},
              {"e_act", assumption(cfg, "e_act", e.e_act, "default: assumed digital activation energy")}}},
            {"table", table({"e_crossbar_j", "e_neurons_j", "e_sar_j", "e_total_j", "t_eval_s",
                             "baseline_j", "ratio"}, rows)}};
}

json dispatch(const SimConfig& cfg, ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::Op: return run_op(cfg);
    case ExperimentKind::SmallSignal: return run_smallsignal(cfg);
    case ExperimentKind::Sar: return run_sar(cfg);
    case ExperimentKind::Mc: return run_mc(cfg);
    case ExperimentKind::Infer: return run_infer(cfg);
    case ExperimentKind::Energy: return run_energy(cfg);
    }
    throw std::logic_error("unhandled experiment");
}

}  // namespace

ReportRecord run_experiment(const SimConfig& cfg, ExperimentKind kind)
{
    const std::string ctx = std::string(to_string(kind)) + ": ";
    ReportRecord rec;
    rec.kind = to_string(kind);
    rec.inputs_digest = config_digest(cfg);
    rec.tool_version = RGCSIM_VERSION;
    rec.seed = cfg.mc.seed;
    try {
        rec.payload = dispatch(cfg, kind);
    } catch (const ConfigError&) {
        throw;
    } catch (const IoError&) {
        throw;
    } catch (const neuron::SolverError& e) {
        throw ExperimentError(ExperimentError::Category::Solver, ctx + e.what());
    } catch (const neuron::PreconditionError& e) {
        throw ExperimentError(ExperimentError::Category::Solver, ctx + e.what());
    } catch (const crossbar::SingularNetwork& e) {
        throw ExperimentError(ExperimentError::Category::Solver,
                              ctx + e.what() + " (node " + e.node() + ")");
    } catch (const sar::NonMonotonePlant& e) {
        throw ExperimentError(ExperimentError::Category::Solver, ctx + e.what());
    } catch (const std::invalid_argument& e) {
        throw ExperimentError(ExperimentError::Category::Config, ctx + e.what());
    } catch (const std::out_of_range& e) {
        throw ExperimentError(ExperimentError::Category::Config, ctx + e.what());
    } catch (const std::runtime_error& e) {
        throw ExperimentError(ExperimentError::Category::Solver, ctx + e.what());
    }
    return rec;
}

}  // namespace rgcsim::frontend

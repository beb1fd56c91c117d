// rgcsim command line: one subcommand per experiment.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rgcsim/config.hpp"
#include "rgcsim/experiment.hpp"
#include "rgcsim/report.hpp"

using namespace rgcsim::frontend;

int main(int argc, char** argv)
{
    CLI::App app{"rgcsim: memristor crossbar / RGC neuron simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(RGCSIM_VERSION));

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> runs;
    std::string out_path;
    std::string format;
    bool verbose = false;

    app.add_option("--config", config_path, "experiment configuration file");
    app.add_option("--seed", seed, "overrides mc.seed");
    app.add_option("--out", out_path, "write the report here instead of stdout");
    app.add_option("--format", format, "json | csv | text")->check(CLI::IsMember({"json", "csv", "text"}));
    app.add_option("--runs", runs, "overrides mc.runs");
    app.add_flag("--verbose", verbose, "progress on stderr");

    const char* help[] = {"DC operating point of one neuron",
                          "small-signal gain, input and output impedance",
                          "normalized SAR bound and neuron calibration",
                          "Monte Carlo mismatch with and without calibration",
                          "network inference",
                          "energy report against a digital baseline"};
    const ExperimentKind kinds[] = {ExperimentKind::Op, ExperimentKind::SmallSignal,
                                    ExperimentKind::Sar, ExperimentKind::Mc,
                                    ExperimentKind::Infer, ExperimentKind::Energy};
    for (int k = 0; k < 6; ++k)
        app.add_subcommand(to_string(kinds[k]), help[k])->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code::config;
    }

    try {
        SimConfig cfg = config_path.empty() ? parse_config("preset = \"reference\"") : load_config(config_path);
        if (seed)
            cfg.mc.seed = *seed;
        if (runs)
            cfg.mc.runs = *runs;
        if (!format.empty())
            cfg.output.format = format;
        if (!out_path.empty())
            cfg.output.path = out_path;

        const ExperimentKind kind = parse_kind(app.get_subcommands().front()->get_name());
        if (verbose)
            std::cerr << "rgcsim: running " << to_string(kind) << " (seed " << cfg.mc.seed
                      << ", config " << config_digest(cfg) << ")\n";
        const ReportRecord rec = run_experiment(cfg, kind);
        const std::string text = emit_report(rec, parse_format(cfg.output.format));

        if (cfg.output.path.empty()) {
            std::cout << text;
            std::cout.flush();
            if (!std::cout)
                throw IoError("failed writing to stdout");
        } else {
            std::ofstream f(cfg.output.path, std::ios::binary);
            if (!(f << text))
                throw IoError("cannot write '" + cfg.output.path + "'");
            if (verbose)
                std::cerr << "rgcsim: wrote " << cfg.output.path << '\n';
        }
        return exit_code::ok;
    } catch (const std::exception& e) {
        std::cerr << "rgcsim: error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

#pragma once

#include <exception>
#include <stdexcept>
#include <string>

#include "rgcsim/config.hpp"
#include "rgcsim/report.hpp"

namespace rgcsim::frontend {

enum class ExperimentKind { Op, SmallSignal, Sar, Mc, Infer, Energy };

const char* to_string(ExperimentKind k);
/// Throws std::invalid_argument for an unknown name.
ExperimentKind parse_kind(const std::string& name);

/// A module failure wrapped with the experiment it happened in.
class ExperimentError : public std::runtime_error {
public:
    enum class Category { Config, Solver, Io };
    ExperimentError(Category c, const std::string& what) : std::runtime_error(what), category_(c) {}
    Category category() const { return category_; }

private:
    Category category_;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int solver = 3;
inline constexpr int io = 4;
}  // namespace exit_code

/// Maps any exception thrown by parsing or run_experiment to a process exit code.
int exit_code_for(const std::exception& e);

/// Runs one experiment. The record carries the config digest and the seed
/// (mc.seed) so the run can be replayed.
ReportRecord run_experiment(const SimConfig& cfg, ExperimentKind kind);

}  // namespace rgcsim::frontend

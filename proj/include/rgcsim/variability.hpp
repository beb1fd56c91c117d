#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgcsim/rgc_neuron.hpp"
#include "rgcsim/rng.hpp"

namespace rgcsim::mc {

/// Independent Gaussian mismatch per device. The defaults are fitted so the
/// uncalibrated input-node spread of the reference neuron lands near 10 mV.
struct MismatchSpec {
    double sigma_vt = 10e-3;        // V
    double sigma_beta_rel = 0.02;   // relative

    bool operator==(const MismatchSpec&) const = default;
};

void validate(const MismatchSpec& s);

/// Perturbs m1, m2, m3, m5 in that order, drawing (vt, beta) per device:
/// vt += N(0, sigma_vt), beta *= 1 + N(0, sigma_beta_rel), beta kept > 0.
neuron::RgcParams sample_params(const neuron::RgcParams& nominal, const MismatchSpec& spec,
                                Rng& rng);

struct McOptions {
    std::size_t n_runs = 500;
    std::uint64_t seed = 1;
    bool calibrate = true;
    double vref = 0.65;               // V, input-node calibration target
    std::optional<int> nbits;         // overrides the input DAC width
    unsigned workers = 1;
};

struct McSample {
    std::size_t run_index = 0;
    double v_in_pre = 0.0;
    double v_in_post = 0.0;
    double v_out_pre = 0.0;
    double v_out_post = 0.0;
    std::uint32_t code = 0;
    double local_lsb = 0.0;   // |v_in(code+1) - v_in(code)|, diagnostic only
    bool out_of_range = false;
    bool failed = false;
    std::string error;
};

struct Stats {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;  // unbiased (n - 1)

    bool operator==(const Stats&) const = default;
};

/// Welford accumulation; std is 0 for fewer than two samples.
Stats summarize(std::span<const double> values);

struct McResult {
    std::size_t n_runs = 0;
    std::uint64_t seed = 0;
    bool calibrated = false;
    double vref = 0.0;
    int nbits = 0;
    std::vector<McSample> samples;
    Stats v_in_pre;
    Stats v_in_post;
    Stats v_out_pre;
    Stats v_out_post;
    std::size_t excluded = 0;       // solver failures, left out of the statistics
    std::size_t out_of_range = 0;   // kept in the statistics but flagged

    /// Post-calibration input statistics when calibrated, else pre.
    const Stats& headline() const { return calibrated ? v_in_post : v_in_pre; }
};

/// Seeded Monte Carlo of the input (and output) DC point. Run k draws from
/// Rng(split_seed(seed, k)), so results do not depend on `workers`.
McResult run_mc(const neuron::RgcParams& nominal, const MismatchSpec& spec, const McOptions& opts);

struct Reduction {
    double factor = 1.0;  // a.headline().std / b.headline().std
    std::array<std::string, 2> summary;
};

Reduction compare_stats(const McResult& a, const McResult& b);

/// "run_index,v_in_pre,v_in_post,code" rows, one per run.
std::string samples_csv(const McResult& r);

}  // namespace rgcsim::mc

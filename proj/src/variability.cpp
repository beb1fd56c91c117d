#include "rgcsim/variability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <locale>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rgcsim/sar.hpp"

namespace rgcsim::mc {

using neuron::Bias;
using neuron::RgcParams;

void validate(const MismatchSpec& s)
{
    if (!(s.sigma_vt >= 0.0) || !(s.sigma_beta_rel >= 0.0))
        throw std::invalid_argument("mismatch sigmas must be >= 0");
}

RgcParams sample_params(const RgcParams& nominal, const MismatchSpec& spec, Rng& rng)
{
    RgcParams p = nominal;
    for (auto* m : {&p.m1, &p.m2, &p.m3, &p.m5}) {
        const double dvt = rng.normal();
        const double dbeta = rng.normal();
        m->vt += spec.sigma_vt * dvt;
        const double factor = 1.0 + spec.sigma_beta_rel * dbeta;
        m->beta *= factor > 1e-6 ? factor : 1e-6;
    }
    return p;
}

Stats summarize(std::span<const double> values)
{
    Stats s;
    double m2 = 0.0;
    for (double v : values) {
        ++s.n;
        const double d = v - s.mean;
        s.mean += d / static_cast<double>(s.n);
        m2 += d * (v - s.mean);
    }
    s.std = s.n > 1 ? std::sqrt(m2 / static_cast<double>(s.n - 1)) : 0.0;
    return s;
}

namespace {

McSample run_one(const RgcParams& nominal, const MismatchSpec& spec, const McOptions& opts,
                 int nbits, std::size_t k)
{
    McSample s;
    s.run_index = k;
    Rng rng(split_seed(opts.seed, k));
    RgcParams p = sample_params(nominal, spec, rng);
    p.dac.nbits = nbits;
    try {
        const auto op0 = neuron::solve_dc(p, Bias{0.0, 0, 0});
        s.v_in_pre = op0.v_in;
        s.v_out_pre = op0.v_out;
        s.v_in_post = op0.v_in;
        s.v_out_post = op0.v_out;
        if (opts.calibrate) {
            auto plant = [&](std::uint32_t c) { return neuron::solve_dc(p, Bias{0.0, c, 0}).v_in; };
            const auto r = sar::sar_calibrate(plant, opts.vref, nbits, sar::Direction::Increasing);
            s.code = r.code;
            s.out_of_range = r.out_of_range;
            const auto op = neuron::solve_dc(p, Bias{0.0, r.code, 0});
            s.v_in_post = op.v_in;
            s.v_out_post = op.v_out;
            const std::uint32_t max_code = neuron::dac_max_code(p.dac);
            const std::uint32_t nb = r.code < max_code ? r.code + 1 : r.code - 1;
            s.local_lsb = std::abs(plant(nb) - s.v_in_post);
        }
    } catch (const std::exception& e) {
        s.failed = true;
        s.error = e.what();
    }
    return s;
}

}  // namespace

McResult run_mc(const RgcParams& nominal, const MismatchSpec& spec, const McOptions& opts)
{
    if (opts.n_runs < 2)
        throw std::invalid_argument("run_mc: n_runs must be >= 2 (got " +
                                    std::to_string(opts.n_runs) + ")");
    validate(spec);
    neuron::validate(nominal);
    const int nbits = opts.nbits.value_or(nominal.dac.nbits);
    if (nbits < 1 || nbits > 24)
        throw std::invalid_argument("run_mc: nbits must be in [1, 24]");

    McResult r;
    r.n_runs = opts.n_runs;
    r.seed = opts.seed;
    r.calibrated = opts.calibrate;
    r.vref = opts.vref;
    r.nbits = nbits;
    r.samples.resize(opts.n_runs);

    const unsigned workers = std::max(1u, std::min<unsigned>(opts.workers,
                                                             static_cast<unsigned>(opts.n_runs)));
    if (workers == 1) {
        for (std::size_t k = 0; k < opts.n_runs; ++k)
            r.samples[k] = run_one(nominal, spec, opts, nbits, k);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < opts.n_runs; k += workers)
                    r.samples[k] = run_one(nominal, spec, opts, nbits, k);
            });
    }

    std::vector<double> in_pre, in_post, out_pre, out_post;
    for (const auto& s : r.samples) {
        if (s.failed) {
            ++r.excluded;
            continue;
        }
        if (s.out_of_range)
            ++r.out_of_range;
        in_pre.push_back(s.v_in_pre);
        in_post.push_back(s.v_in_post);
        out_pre.push_back(s.v_out_pre);
        out_post.push_back(s.v_out_post);
    }
    r.v_in_pre = summarize(in_pre);
    r.v_in_post = summarize(in_post);
    r.v_out_pre = summarize(out_pre);
    r.v_out_post = summarize(out_post);
    return r;
}

Reduction compare_stats(const McResult& a, const McResult& b)
{
    Reduction red;
    const double sa = a.headline().std;
    const double sb = b.headline().std;
    if (sb == 0.0)
        red.factor = sa == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    else
        red.factor = sa / sb;
    std::ostringstream l1, l2;
    l1.imbue(std::locale::classic());
    l2.imbue(std::locale::classic());
    l1 << "reference: std " << sa * 1e3 << " mV over " << a.headline().n << " runs (seed "
       << a.seed << (a.calibrated ? ", calibrated)" : ", uncalibrated)");
    l2 << "compared: std " << sb * 1e3 << " mV over " << b.headline().n << " runs (seed "
       << b.seed << (b.calibrated ? ", calibrated)" : ", uncalibrated)") << ", reduction x"
       << red.factor;
    red.summary = {l1.str(), l2.str()};
    return red;
}

std::string samples_csv(const McResult& r)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "run_index,v_in_pre,v_in_post,code\n";
    for (const auto& s : r.samples) {
        if (s.failed)
            os << s.run_index << ",nan,nan,\n";
        else
            os << s.run_index << ',' << s.v_in_pre << ',' << s.v_in_post << ',' << s.code << '\n';
    }
    return os.str();
}

}  // namespace rgcsim::mc

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rgcsim/rgc_neuron.hpp"
#include "rgcsim/sar.hpp"
#include "rgcsim/variability.hpp"

using namespace rgcsim::sar;

namespace {

// Code whose output is nearest vref, by brute force.
std::uint32_t nearest_code(const Plant& plant, double vref, int nbits)
{
    std::uint32_t best = 0;
    double err = std::abs(plant(0) - vref);
    for (std::uint32_t c = 1; c < (1u << nbits); ++c)
        if (std::abs(plant(c) - vref) < err) {
            err = std::abs(plant(c) - vref);
            best = c;
        }
    return best;
}

// Largest code on the kept side of vref; what the keep/clear rule must find.
std::uint32_t kept_side_code(const Plant& plant, double vref, int nbits, Direction d)
{
    std::uint32_t best = 0;
    for (std::uint32_t c = 0; c < (1u << nbits); ++c) {
        const double v = plant(c);
        if (d == Direction::Increasing ? v <= vref : v >= vref)
            best = c;
    }
    return best;
}

}  // namespace

TEST_CASE("normalized recurrence")
{
    CHECK(normalized_step(0.0, 0.3, 1) == 0.5);
    CHECK(normalized_step(0.5, 0.3, 2) == 0.25);
    CHECK(normalized_step(0.3, 0.3, 3) == 0.3 - 0.125);
    CHECK_THROWS(normalized_step(0.0, 0.3, 0));

    const auto t = normalized_converge(0.3, 4);
    REQUIRE(t.approximations.size() == 4);
    CHECK(t.final_value() == 0.3125);
    CHECK(t.error() == doctest::Approx(0.0125).epsilon(1e-12));
    CHECK(std::abs(normalized_converge(0.0, 8).final_value()) <= 1.0 / 256);
}

TEST_CASE("normalized bound on a dense grid up to 20 steps")
{
    for (int k = 0; k <= 4000; ++k) {
        const double x = -1.0 + k / 2000.0;
        const auto t = normalized_converge(x, 20);
        for (int i = 1; i <= 20; ++i)
            REQUIRE(std::abs(t.approximations[static_cast<std::size_t>(i - 1)] - x) <= std::ldexp(1.0, -i));
    }
}

TEST_CASE("register walks MSB first")
{
    SarState s(4);
    CHECK(s.phase() == Phase::Idle);
    s.start();
    CHECK(s.phase() == Phase::Converging);
    CHECK(s.trial_code() == 8);
    s.decide(false);
    CHECK(s.trial_code() == 4);
    s.decide(true);
    CHECK(s.trial_code() == 6);
    s.decide(false);
    CHECK(s.trial_code() == 5);
    s.decide(false);
    CHECK(s.phase() == Phase::Done);
    CHECK(s.code() == 4);
    CHECK(s.bit_index() == 4);
    CHECK_THROWS(s.trial_code());
    CHECK_THROWS(SarState(0));
}

TEST_CASE("hand-run 4-bit calibration")
{
    const Plant plant = [](std::uint32_t c) { return c / 16.0; };
    const auto r = sar_calibrate(plant, 0.3, 4, Direction::Increasing);
    CHECK(r.code == 4);
    CHECK(r.settled == 0.25);
    CHECK(r.comparisons == 4);
    std::vector<std::uint32_t> trials;
    for (const auto& s : r.transcript)
        trials.push_back(s.trial_code);
    CHECK(trials == std::vector<std::uint32_t>{8, 4, 6, 5});
    CHECK(std::abs(r.settled - 0.3) <= 1.0 / 16);
    CHECK_FALSE(r.out_of_range);
    CHECK(transcript_csv(r).rfind("step,bit,trial_code,node_voltage,kept\n", 0) == 0);

    CHECK(sar_calibrate(plant, 0.0, 4, Direction::Increasing).code == 0);
}

TEST_CASE("out of range targets return boundary codes")
{
    const Plant plant = [](std::uint32_t c) { return 0.5 + c / 64.0; };
    auto r = sar_calibrate(plant, 0.1, 6, Direction::Increasing);
    CHECK(r.code == 0);
    CHECK(r.out_of_range);
    r = sar_calibrate(plant, 5.0, 6, Direction::Increasing);
    CHECK(r.code == 63);
    CHECK(r.out_of_range);
    const Plant down = [](std::uint32_t c) { return 1.0 - c / 64.0; };
    r = sar_calibrate(down, 2.0, 6, Direction::Decreasing);
    CHECK(r.code == 0);
    CHECK(r.out_of_range);
}

TEST_CASE("random monotone plants land within one local LSB of the optimum")
{
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int nbits = 1 + trial % 10;
        const std::uint32_t n = 1u << nbits;
        std::vector<double> v(n);
        double acc = u(gen);
        for (auto& x : v) {
            x = acc;
            acc += 1e-3 + u(gen) * u(gen);
        }
        const Direction d = trial % 2 ? Direction::Increasing : Direction::Decreasing;
        if (d == Direction::Decreasing)
            std::reverse(v.begin(), v.end());
        int calls = 0;
        const Plant plant = [&](std::uint32_t c) {
            ++calls;
            return v.at(c);
        };
        const double lo = *std::min_element(v.begin(), v.end());
        const double hi = *std::max_element(v.begin(), v.end());
        const double vref = lo + (hi - lo) * u(gen);
        const auto r = sar_calibrate(plant, vref, nbits, d);
        CHECK(r.comparisons == nbits);
        CHECK(r.transcript.size() == static_cast<std::size_t>(nbits));
        CHECK(calls <= nbits + (r.code == 0 ? 1 : 0));
        CHECK(r.code == kept_side_code(plant, vref, nbits, d));
        const std::uint32_t best = nearest_code(plant, vref, nbits);
        CHECK((r.code == best || r.code + 1 == best || r.code == best + 1));
        const std::uint32_t nb = r.code + 1 < n ? r.code + 1 : r.code - 1;
        CHECK(std::abs(r.settled - vref) <= std::abs(v[nb] - v[r.code]));
    }
}

TEST_CASE("monotonicity check")
{
    const Plant bumpy = [](std::uint32_t c) { return c == 5 ? 0.0 : c / 16.0; };
    SarOptions o;
    o.check_monotone = true;
    CHECK_THROWS_AS(sar_calibrate(bumpy, 0.3, 4, Direction::Increasing, o), NonMonotonePlant);
    CHECK_NOTHROW(sar_calibrate([](std::uint32_t c) { return c / 16.0; }, 0.3, 4, Direction::Increasing, o));
}

TEST_CASE("comparator offset shifts the decision threshold")
{
    const Plant plant = [](std::uint32_t c) { return c / 16.0; };
    SarOptions o;
    o.comparator_offset = 0.07;
    CHECK(sar_calibrate(plant, 0.3, 4, Direction::Increasing, o).code == 5);
}

TEST_CASE("reference neuron plant")
{
    const auto p = rgcsim::neuron::reference_params();
    const Plant plant = [&](std::uint32_t c) { return rgcsim::neuron::solve_dc(p, 0.0, c).v_in; };
    const auto r = sar_calibrate(plant, 0.65, p.dac.nbits, Direction::Increasing);
    CHECK(r.comparisons == p.dac.nbits);
    const auto best = nearest_code(plant, 0.65, p.dac.nbits);
    CHECK((r.code == best || r.code + 1 == best));
    CHECK(std::abs(r.settled - 0.65) <= plant(r.code + 1) - plant(r.code));
}

namespace {

NeuronNodes neuron_nodes(const rgcsim::neuron::RgcParams& p)
{
    NeuronNodes n;
    n.input_node = [p](std::uint32_t ci, std::uint32_t co) {
        return rgcsim::neuron::solve_dc(p, rgcsim::neuron::Bias{0.0, ci, co}).v_in;
    };
    n.output_node = [p](std::uint32_t ci, std::uint32_t co) {
        return rgcsim::neuron::solve_dc(p, rgcsim::neuron::Bias{0.0, ci, co}).v_out;
    };
    n.input_direction = Direction::Increasing;
    n.output_direction = Direction::Decreasing;
    return n;
}

}  // namespace

TEST_CASE("array of one equals a single calibration")
{
    const auto p = rgcsim::neuron::reference_params();
    const std::vector<NeuronNodes> arr{neuron_nodes(p)};
    const auto s = calibrate_array(arr, make_schedule(1, 0.65, 0.85), 6);
    const Plant plant = [&](std::uint32_t c) { return rgcsim::neuron::solve_dc(p, 0.0, c).v_in; };
    CHECK(s.results[0].code_in == sar_calibrate(plant, 0.65, 6, Direction::Increasing).code);
    CHECK(s.results[0].comparisons == 12);
    CHECK_FALSE(s.running);
}

TEST_CASE("identical neurons get identical codes; one active at a time")
{
    const auto p = rgcsim::neuron::reference_params();
    const std::vector<NeuronNodes> arr(8, neuron_nodes(p));
    const auto s = calibrate_array(arr, make_schedule(8, 0.65, 0.85), 6);
    for (const auto& r : s.results) {
        CHECK(r.code_in == s.results[0].code_in);
        CHECK(r.code_out == s.results[0].code_out);
    }
    // Sequential: all inputs, then all outputs, each visit 6 comparisons.
    REQUIRE(s.log.size() == 16);
    for (std::size_t k = 0; k < 16; ++k) {
        CHECK(s.log[k].neuron == k % 8);
        CHECK(s.log[k].node == (k < 8 ? CalibrationNode::Input : CalibrationNode::Output));
        CHECK(s.log[k].comparisons == 6);
    }
}

TEST_CASE("mismatched neurons match per-neuron exhaustive search, in any order")
{
    const auto nominal = rgcsim::neuron::reference_params();
    std::vector<NeuronNodes> arr;
    std::vector<rgcsim::neuron::RgcParams> params;
    for (std::uint64_t k = 0; k < 8; ++k) {
        rgcsim::Rng rng(rgcsim::split_seed(42, k));
        params.push_back(rgcsim::mc::sample_params(nominal, {}, rng));
        arr.push_back(neuron_nodes(params.back()));
    }
    auto sched = make_schedule(8, 0.65, 0.85);
    const auto s = calibrate_array(arr, sched, 6);
    for (std::size_t k = 0; k < 8; ++k) {
        const Plant plant = [&](std::uint32_t c) {
            return rgcsim::neuron::solve_dc(params[k], 0.0, c).v_in;
        };
        CHECK(s.results[k].code_in == kept_side_code(plant, 0.65, 6, Direction::Increasing));
    }

    sched.neuron_ids = {5, 2, 7, 0, 1, 6, 3, 4};
    sched.mode = ScheduleMode::Interleaved;
    const auto t = calibrate_array(arr, sched, 6);
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK(t.results[k].code_in == s.results[k].code_in);
        CHECK(t.results[k].code_out == s.results[k].code_out);
    }
    CHECK(t.log[0].neuron == 5);
    CHECK(t.log[1].neuron == 5);
    CHECK(t.log[1].node == CalibrationNode::Output);
}

TEST_CASE("a failing neuron does not stop the pass")
{
    const auto p = rgcsim::neuron::reference_params();
    std::vector<NeuronNodes> arr(3, neuron_nodes(p));
    arr[1].input_node = [](std::uint32_t, std::uint32_t) -> double { throw std::runtime_error("dead"); };
    const auto s = calibrate_array(arr, make_schedule(3, 0.65, 0.85), 6);
    CHECK(s.results[1].failed);
    CHECK(s.results[1].error == "dead");
    CHECK_FALSE(s.results[0].failed);
    CHECK_FALSE(s.results[2].failed);
    CHECK(s.results[2].code_in == s.results[0].code_in);
}

TEST_CASE("schedule validation")
{
    const auto p = rgcsim::neuron::reference_params();
    const std::vector<NeuronNodes> arr(2, neuron_nodes(p));
    auto s = make_schedule(2, 0.65, 0.85);
    s.neuron_ids = {0, 0};
    CHECK_THROWS_AS(calibrate_array(arr, s, 6), std::invalid_argument);
}

TEST_CASE("latency")
{
    CHECK(calibration_latency(1, 1, 4, 1e-6) == doctest::Approx(4e-6).epsilon(1e-15));
    CHECK(calibration_latency(16, 2, 6, 100e-9) == doctest::Approx(19.2e-6).epsilon(1e-14));
    CHECK(calibration_latency(0, 2, 6, 100e-9) == 0.0);
}

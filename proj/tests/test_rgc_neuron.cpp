#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "rgcsim/rgc_neuron.hpp"

using namespace rgcsim::neuron;
using rgcsim::device::Region;

namespace {

RgcParams square_law()
{
    RgcParams p = reference_params();
    p.m1.lambda = p.m2.lambda = p.m3.lambda = p.m5.lambda = 0.0;
    p.ro_b2 = std::numeric_limits<double>::infinity();
    return p;
}

oracle::NeuronCase to_case(const RgcParams& p, const Bias& b)
{
    return {{p.m1.beta, p.m1.vt, p.m1.lambda},
            {p.m2.beta, p.m2.vt, p.m2.lambda},
            {p.m3.beta, p.m3.vt, p.m3.lambda},
            p.ib, p.ib2, p.ro_b2, p.vdd, p.vb3, p.r_load,
            dac_current(p.dac, b.code_in), dac_current(p.dac_out, b.code_out), b.i_in};
}

}  // namespace

TEST_CASE("dac")
{
    const DacSpec d{0.125e-6, 6};
    CHECK(dac_current(d, 0) == 0.0);
    CHECK(dac_current(d, 63) == doctest::Approx(7.875e-6).epsilon(1e-15));
    CHECK(dac_current(d, 32) == doctest::Approx(4e-6).epsilon(1e-15));
    CHECK(dac_max_code(d) == 63);
    CHECK_THROWS_AS(dac_current(d, 64), std::out_of_range);
    for (std::uint32_t c = 1; c < 64; ++c)
        CHECK(dac_current(d, c) > dac_current(d, c - 1));
}

TEST_CASE("closed form at lambda = 0")
{
    const RgcParams p = square_law();
    auto op = solve_dc(p, 0.0, 0);
    CHECK(std::abs(op.v_in - 0.6) <= 1e-12);

    op = solve_dc(p, 0.0, 32);
    CHECK(std::abs(op.v_in - (0.4 + std::sqrt(0.08))) <= 1e-12);

    // Every node in closed form while all three devices saturate.
    for (std::uint32_t code : {0u, 5u, 11u}) {
        for (double i_in : {-2e-6, 0.0, 1.5e-6}) {
            op = solve_dc(p, Bias{i_in, code, 7});
            REQUIRE(op.m1.region == Region::Saturation);
            const double i1 = p.ib - i_in;
            const double vx = p.m2.vt + std::sqrt(2 * (p.ib2 + dac_current(p.dac, code)) / p.m2.beta);
            CHECK(std::abs(op.v_in - vx) <= 1e-12);
            CHECK(std::abs(op.v_gate1 - (vx + p.m1.vt + std::sqrt(2 * i1 / p.m1.beta))) <= 1e-12);
            CHECK(std::abs(op.v_mid - (p.vb3 - p.m3.vt - std::sqrt(2 * i1 / p.m3.beta))) <= 1e-12);
            CHECK(std::abs(op.v_out - (p.vdd - p.r_load * (i1 + dac_current(p.dac_out, 7)))) <= 1e-12);
            for (double r : op.residual)
                CHECK(std::abs(r) <= 1e-12);
        }
    }
}

TEST_CASE("lambda > 0 against the bisection oracle")
{
    RgcParams p = reference_params();
    p.m2.lambda = 0.1;
    for (std::uint32_t code : {0u, 16u, 40u}) {
        for (double i_in : {-1e-6, 0.0, 2e-6}) {
            const Bias b{i_in, code, 3};
            const auto op = solve_dc(p, b);
            const auto ref = oracle::neuron_bisection(to_case(p, b));
            CHECK(std::abs(op.v_in - ref.v_in) <= 1e-9);
            CHECK(std::abs(op.v_gate1 - ref.v_gate1) <= 1e-9);
            CHECK(std::abs(op.v_mid - ref.v_mid) <= 1e-9);
            CHECK(std::abs(op.v_out - ref.v_out) <= 1e-9);
            for (double r : op.residual)
                CHECK(std::abs(r) <= 1e-12);
            CHECK(op.iterations <= 200);
        }
    }
}

TEST_CASE("input node rises strictly with the dac code")
{
    const RgcParams p = reference_params();
    double prev = -1.0;
    for (std::uint32_t c = 0; c <= dac_max_code(p.dac); ++c) {
        const double v = solve_dc(p, 0.0, c).v_in;
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("forced nodes report their source current")
{
    const RgcParams p = reference_params();
    const auto op = solve_dc(p, 0.0, 10);
    SolveOptions o;
    o.forced[0] = op.v_in;
    const auto f = solve_dc(p, op.bias, o);
    CHECK(f.v_gate1 == doctest::Approx(op.v_gate1).epsilon(1e-9));
    CHECK(std::abs(f.forced_current[0]) <= 1e-12);
    CHECK(f.residual[0] == 0.0);
}

TEST_CASE("infeasible bias is reported")
{
    const RgcParams p = reference_params();
    try {
        solve_dc(p, 6e-6, 0);
        FAIL("expected an infeasible bias");
    } catch (const SolverError& e) {
        CHECK(e.kind() == SolverError::Kind::InfeasibleBias);
    }
    RgcParams bad = p;
    bad.vb3 = 0.1;  // cascode gate below its threshold
    CHECK_THROWS_AS(solve_dc(bad, 0.0, 0), SolverError);
}

TEST_CASE("small-signal arithmetic")
{
    RgcParams p = reference_params();
    p.ro_b2 = 500e3;
    OperatingPoint op;
    op.m1 = {1e-5, Region::Saturation, 100e-6, 2e-6, 500e3};
    op.m2 = {1e-5, Region::Saturation, 100e-6, 2e-6, 500e3};
    op.m3 = {1e-5, Region::Saturation, 100e-6, 2e-6, 500e3};
    const auto r = small_signal(p, op);
    CHECK(r.a == doctest::Approx(25.0).epsilon(1e-14));
    CHECK(r.zin == doctest::Approx(400.0).epsilon(1e-14));
    CHECK(r.rout == doctest::Approx(25e6).epsilon(1e-14));

    op.m2.region = Region::Triode;
    CHECK_THROWS_AS(small_signal(p, op), PreconditionError);
}

TEST_CASE("tuned transconductance")
{
    RgcParams p = reference_params();
    p.vc = 0.2;
    p.ic = 4e-6;
    p.m5 = {200e-6, 0.4, 0.0};
    CHECK(tuned_vds1(p) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(tuned_transconductance(p) == doctest::Approx(p.m1.beta * 0.8).epsilon(1e-14));
    double prev = 0.0;
    for (double vc = 0.0; vc <= 0.5; vc += 0.05) {
        p.vc = vc;
        CHECK(tuned_transconductance(p) > prev);
        prev = tuned_transconductance(p);
    }
    p.vc = 0.2;
    prev = 0.0;
    for (double ic = 1e-6; ic <= 10e-6; ic += 1e-6) {
        p.ic = ic;
        CHECK(tuned_transconductance(p) > prev);
        prev = tuned_transconductance(p);
    }
}

TEST_CASE("numeric impedances agree with the formulas")
{
    const RgcParams p = reference_params();
    const Bias b{0.0, 12, 0};
    const auto op = solve_dc(p, b);
    const auto ss = small_signal(p, op);
    REQUIRE(ss.a >= 20.0);
    const double z = zin_numeric(p, b);
    CHECK(std::abs(z - ss.zin) <= 0.15 * ss.zin);
    CHECK(std::abs(gain_numeric(p, op) - ss.a) <= 0.05 * ss.a);
    CHECK(std::abs(rout_numeric(p, op) - ss.rout) <= 0.25 * ss.rout);

    // Step-size robustness.
    const double z_half = zin_numeric(p, b, 0.5e-9);
    CHECK(std::abs(z_half - z) <= 1e-3 * z);

    // More loop gain: lower Zin and a closer match to 1/(A gm1).
    RgcParams q = p;
    q.ro_b2 *= 10.0;
    const auto op_q = solve_dc(q, b);
    const auto ss_q = small_signal(q, op_q);
    const double z_q = zin_numeric(q, b);
    CHECK(z_q < z);
    CHECK(std::abs(z_q - ss_q.zin) / ss_q.zin < std::abs(z - ss.zin) / ss.zin);
}

TEST_CASE("transfer curve is linear and stateless")
{
    const RgcParams p = reference_params();
    const auto sweep = linear_sweep(0.0, 2e-6, 11);
    const auto tc = transfer_curve(p, 0, 0, sweep);
    CHECK(tc.infeasible == 0);
    CHECK(tc.max_fit_deviation <= 0.02);
    CHECK(tc.points[5].i_in == 0.0);
    CHECK(tc.points[5].v_out == solve_dc(p, 0.0, 0).v_out);

    auto rev = sweep;
    std::reverse(rev.begin(), rev.end());
    const auto tr = transfer_curve(p, 0, 0, rev);
    for (std::size_t k = 0; k < sweep.size(); ++k)
        CHECK(tr.points[sweep.size() - 1 - k].v_out == tc.points[k].v_out);

    // A sweep that runs past the bias flags points instead of failing.
    const auto wide = transfer_curve(p, 0, 0, linear_sweep(0.0, 8e-6, 9));
    CHECK(wide.infeasible > 0);
}

TEST_CASE("parameter validation")
{
    RgcParams p = reference_params();
    p.ib = 0.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = reference_params();
    p.dac.nbits = 25;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = reference_params();
    p.m2.polarity = rgcsim::device::Polarity::Pmos;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

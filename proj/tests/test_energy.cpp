#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "rgcsim/crossbar.hpp"
#include "rgcsim/energy.hpp"

using namespace rgcsim;
using namespace rgcsim::energy;

namespace {

bool within_ulps(double a, double b, int n)
{
    double x = b;
    for (int k = 0; k < n; ++k)
        x = std::nextafter(x, a);
    return x == a;
}

}  // namespace

TEST_CASE("one neuron for 10 ns is 0.43 pJ")
{
    RunRecord run;
    run.n_neurons = 1;
    EnergyParams p;
    p.t_eval = 10e-9;
    p.p_neuron = 43e-6;
    const auto r = energy_estimate(run, p);
    CHECK(r.e_neurons == 43e-6 * 10e-9);
    CHECK(within_ulps(r.e_neurons, 0.43e-12, 1));
    CHECK(r.t_eval == 10e-9);
}

TEST_CASE("zero duration costs nothing")
{
    RunRecord run;
    run.n_neurons = 4;
    run.crossbar_power = 1e-3;
    EnergyParams p;
    p.t_eval = 0.0;
    p.t_sar_step = 0.0;
    const auto r = energy_estimate(run, p);
    CHECK(r.e_neurons == 0.0);
    CHECK(r.e_crossbar == 0.0);
    CHECK(r.e_total == 0.0);
}

TEST_CASE("2x2 crossbar read for 10 ns is 3.1 pJ")
{
    crossbar::ConductanceMatrix g(2, 2, 1e-6, 1e-2, {1e-3, 2e-3, 3e-3, 4e-3});
    const std::vector<double> v{0.1, 0.2};
    const double p = crossbar::ideal_read_power(g, v);
    CHECK(p == doctest::Approx(310e-6).epsilon(1e-12));
    RunRecord run;
    run.crossbar_power = p;
    EnergyParams ep;
    ep.t_eval = 10e-9;
    CHECK(energy_estimate(run, ep).e_crossbar == doctest::Approx(3.1e-12).epsilon(1e-12));
}

TEST_CASE("digital baseline product-sum")
{
    CHECK(digital_baseline(64, 1e-12, 8, 0.5e-12) == doctest::Approx(68e-12).epsilon(1e-14));
    CHECK(digital_baseline(0, 1e-12, 0, 0.5e-12) == 0.0);
    CHECK_THROWS_AS(digital_baseline(-1, 1e-12, 0, 0), std::invalid_argument);
}

TEST_CASE("total is exactly the sum of its parts")
{
    RunRecord run{12, 96, 12, 3.7e-5, 24, 6};
    EnergyParams p;
    const auto r = energy_estimate(run, p);
    CHECK(r.e_total == r.e_crossbar + r.e_neurons + r.e_sar);
    CHECK(r.e_sar == 24.0 * 6 * p.t_sar_step * p.p_sar / p.n_inferences);
    CHECK(r.e_digital_baseline == 96 * p.e_mac + 12 * p.e_act);
    CHECK(r.ratio == r.e_digital_baseline / r.e_total);
}

TEST_CASE("ratio edge cases")
{
    RunRecord run;
    run.n_mac = 10;
    EnergyParams p;
    CHECK(energy_estimate(run, p).ratio == std::numeric_limits<double>::infinity());
    run.n_mac = 0;
    CHECK(energy_estimate(run, p).ratio == 0.0);
}

TEST_CASE("invalid parameters")
{
    RunRecord run;
    EnergyParams p;
    p.t_eval = -1;
    CHECK_THROWS_AS(energy_estimate(run, p), std::invalid_argument);
    p = {};
    p.n_inferences = 0.5;
    CHECK_THROWS_AS(energy_estimate(run, p), std::invalid_argument);
}

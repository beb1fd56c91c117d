#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rgcsim/device_models.hpp"

using namespace rgcsim::device;

TEST_CASE("square law reference points")
{
    const MosParams p{200e-6, 0.4, 0.0};
    auto e = mos_eval(p, 0.9, 1.0);
    CHECK(e.current == doctest::Approx(25e-6).epsilon(1e-14));
    CHECK(e.region == Region::Saturation);
    CHECK(e.gm == doctest::Approx(100e-6).epsilon(1e-14));
    CHECK(std::isinf(e.ro));

    e = mos_eval(p, 0.3, 0.5);
    CHECK(e.current == 0.0);
    CHECK(e.region == Region::Cutoff);
    CHECK(e.gm == 0.0);

    const MosParams q{200e-6, 0.4, 0.1};
    e = mos_eval(q, 0.9, 1.0);
    CHECK(e.current == doctest::Approx(27.5e-6).epsilon(1e-14));
    CHECK(e.gds == doctest::Approx(2.5e-6).epsilon(1e-14));
    CHECK(e.ro == doctest::Approx(400e3).epsilon(1e-12));
}

TEST_CASE("triode branch")
{
    const MosParams p{200e-6, 0.4, 0.0};
    const auto e = mos_eval(p, 0.9, 0.2);
    CHECK(e.region == Region::Triode);
    CHECK(e.current == doctest::Approx(200e-6 * (0.5 * 0.2 - 0.02)).epsilon(1e-14));
    CHECK(e.gm == doctest::Approx(200e-6 * 0.2).epsilon(1e-14));
    CHECK(e.gds == doctest::Approx(200e-6 * (0.5 - 0.2)).epsilon(1e-14));
}

TEST_CASE("boundary continuity")
{
    // lambda = 0: both expressions agree at vds = vov.
    const MosParams p{300e-6, 0.35, 0.0};
    const double vov = 0.25;
    const double below = mos_eval(p, 0.35 + vov, std::nextafter(vov, 0.0)).current;
    const double at = mos_eval(p, 0.35 + vov, vov).current;
    CHECK(std::abs(below - at) <= 1e-18);

    // lambda > 0: saturation-only factor leaves a step of beta/2 vov^2 lambda vds.
    const MosParams q{300e-6, 0.35, 0.08};
    const double tri = mos_eval(q, 0.35 + vov, std::nextafter(vov, 0.0)).current;
    const double sat = mos_eval(q, 0.35 + vov, vov).current;
    CHECK(sat - tri == doctest::Approx(0.5 * 300e-6 * vov * vov * 0.08 * vov).epsilon(1e-6));
}

TEST_CASE("derivatives match central differences away from boundaries")
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ub(50e-6, 2e-3), uvt(0.1, 0.6), ul(0.0, 0.2), u(0.0, 1.0);
    const double h = 1e-6;
    int checked = 0;
    for (int k = 0; k < 400; ++k) {
        const MosParams p{ub(gen), uvt(gen), ul(gen)};
        const double vgs = p.vt + 0.02 + 0.8 * u(gen);
        const double vds = 0.01 + 1.0 * u(gen);
        const double vov = vgs - p.vt;
        if (std::abs(vds - vov) < 1e-3)
            continue;
        const auto e = mos_eval(p, vgs, vds);
        const double gm_fd = (mos_eval(p, vgs + h, vds).current - mos_eval(p, vgs - h, vds).current) / (2 * h);
        const double gds_fd = (mos_eval(p, vgs, vds + h).current - mos_eval(p, vgs, vds - h).current) / (2 * h);
        CHECK(std::abs(gm_fd - e.gm) <= 1e-6 * e.gm);
        if (e.gds > 0.0)
            CHECK(std::abs(gds_fd - e.gds) <= 1e-6 * e.gds + 1e-15);
        ++checked;
    }
    CHECK(checked > 300);
}

TEST_CASE("current is monotone in vgs and vds within a region")
{
    // With lambda > 0 the boundary step can go either way, so pairs that
    // straddle it are skipped.
    const MosParams p{200e-6, 0.4, 0.05};
    int pairs = 0;
    for (double vds = 0.0; vds <= 1.0; vds += 0.05) {
        auto prev = mos_eval(p, 0.0, vds);
        for (double vgs = 0.01; vgs <= 1.2; vgs += 0.01) {
            const auto e = mos_eval(p, vgs, vds);
            if (e.region == prev.region || prev.region == Region::Cutoff) {
                CHECK(e.current >= prev.current);
                ++pairs;
            }
            prev = e;
        }
    }
    for (double vgs = 0.5; vgs <= 1.2; vgs += 0.05) {
        auto prev = mos_eval(p, vgs, 0.0);
        for (double vds = 0.005; vds <= 1.0; vds += 0.005) {
            const auto e = mos_eval(p, vgs, vds);
            CHECK(e.current >= prev.current);
            prev = e;
            ++pairs;
        }
    }
    CHECK(pairs > 3000);
}

TEST_CASE("pmos uses the same formulas on magnitudes")
{
    MosParams p{200e-6, 0.4, 0.1, Polarity::Pmos};
    MosParams n = p;
    n.polarity = Polarity::Nmos;
    const auto a = mos_eval(p, 0.8, 0.6);
    const auto b = mos_eval(n, 0.8, 0.6);
    CHECK(a.current == b.current);
    CHECK(a.gm == b.gm);
}

TEST_CASE("invalid inputs")
{
    CHECK_THROWS_AS(mos_eval(MosParams{200e-6, 0.4, 0.0}, 0.9, -0.1), std::domain_error);
    CHECK_THROWS_AS(validate(MosParams{0.0, 0.4, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(MosParams{1e-4, 0.4, -0.1}), std::invalid_argument);
    CHECK_THROWS_AS(validate(MosParams{1e-4, std::numeric_limits<double>::quiet_NaN(), 0.0}),
                    std::invalid_argument);
}

TEST_CASE("conductance clamping")
{
    auto r = clamp_conductance(2e-3, 1e-6, 1e-3);
    CHECK(r.cell.g == 1e-3);
    CHECK(r.clamped);
    r = clamp_conductance(0.5e-3, 1e-6, 1e-3);
    CHECK(r.cell.g == 0.5e-3);
    CHECK_FALSE(r.clamped);
    r = clamp_conductance(0.0, 1e-6, 1e-3);
    CHECK(r.cell.g == 1e-6);
    CHECK(r.clamped);
    CHECK_THROWS_AS(clamp_conductance(1e-4, 1e-3, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(clamp_conductance(1e-4, 0.0, 1e-3), std::invalid_argument);
}

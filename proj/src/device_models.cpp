#include "rgcsim/device_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rgcsim::device {

const char* to_string(Region r)
{
    switch (r) {
    case Region::Cutoff: return "cutoff";
    case Region::Triode: return "triode";
    case Region::Saturation: return "saturation";
    }
    return "unknown";
}

void validate(const MosParams& p)
{
    if (!(p.beta > 0.0) || !std::isfinite(p.beta))
        throw std::invalid_argument("MosParams: beta must be positive and finite");
    if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda))
        throw std::invalid_argument("MosParams: lambda must be non-negative");
    if (!std::isfinite(p.vt))
        throw std::invalid_argument("MosParams: vt must be finite");
}

MosEval mos_eval(const MosParams& p, double vgs, double vds)
{
    if (!(vds >= 0.0))
        throw std::domain_error("mos_eval: vds must be >= 0 (got " + std::to_string(vds) + ")");

    MosEval e;
    const double vov = vgs - p.vt;
    if (vov <= 0.0) {
        e.region = Region::Cutoff;
    } else if (vds < vov) {
        e.region = Region::Triode;
        e.current = p.beta * (vov * vds - 0.5 * vds * vds);
        e.gm = p.beta * vds;
        e.gds = p.beta * (vov - vds);
    } else {
        e.region = Region::Saturation;
        const double isat = 0.5 * p.beta * vov * vov;
        const double clm = 1.0 + p.lambda * vds;
        e.current = isat * clm;
        e.gm = p.beta * vov * clm;
        e.gds = isat * p.lambda;
    }
    e.ro = e.gds > 0.0 ? 1.0 / e.gds : std::numeric_limits<double>::infinity();
    return e;
}

ClampResult clamp_conductance(double g_raw, double g_min, double g_max)
{
    if (!(g_min > 0.0))
        throw std::invalid_argument("clamp_conductance: g_min must be positive");
    if (!(g_max >= g_min))
        throw std::invalid_argument("clamp_conductance: g_max must be >= g_min");

    ClampResult r;
    r.cell.g_min = g_min;
    r.cell.g_max = g_max;
    r.cell.g = std::min(std::max(g_raw, g_min), g_max);
    r.clamped = r.cell.g != g_raw;
    return r;
}

}  // namespace rgcsim::device

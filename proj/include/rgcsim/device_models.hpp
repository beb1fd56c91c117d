#pragma once

#include <stdexcept>

namespace rgcsim::device {

enum class Polarity { Nmos, Pmos };

enum class Region { Cutoff, Triode, Saturation };

const char* to_string(Region r);

/// First-order square-law MOSFET parameters.
///
/// PMOS devices use the flipped-sign convention: callers pass |Vgs| and |Vds|
/// and `vt` is the threshold magnitude, so one set of formulas serves both
/// polarities.
struct MosParams {
    double beta = 200e-6;   // A/V^2
    double vt = 0.4;        // V
    double lambda = 0.0;    // 1/V
    Polarity polarity = Polarity::Nmos;

    bool operator==(const MosParams&) const = default;
};

/// Throws std::invalid_argument when beta <= 0, lambda < 0 or vt is not finite.
void validate(const MosParams& p);

struct MosEval {
    double current = 0.0;  // A, >= 0 in the flipped-sign convention
    Region region = Region::Cutoff;
    double gm = 0.0;       // dI/dVgs
    double gds = 0.0;      // dI/dVds
    double ro = 0.0;       // 1/gds, +inf when gds == 0
};

/// Evaluates the square-law model at (vgs, vds) with vds >= 0.
///
/// Cutoff for vgs <= vt (no subthreshold conduction). Triode uses the bare
/// beta*((vgs-vt)*vds - vds^2/2) expression; saturation applies the
/// (1 + lambda*vds) factor. With lambda > 0 the current therefore steps by
/// beta/2*(vgs-vt)^2*lambda*vds at the triode/saturation boundary. gm and gds
/// are the exact partial derivatives of whichever branch is active.
MosEval mos_eval(const MosParams& p, double vgs, double vds);

struct MemristorCell {
    double g = 0.0;      // S
    double g_min = 0.0;  // S
    double g_max = 0.0;  // S
};

struct ClampResult {
    MemristorCell cell;
    bool clamped = false;
};

/// Clamps a raw conductance into [g_min, g_max]. Rejects g_min <= 0 and
/// g_max < g_min with std::invalid_argument.
ClampResult clamp_conductance(double g_raw, double g_min, double g_max);

}  // namespace rgcsim::device

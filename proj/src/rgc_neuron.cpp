#include "rgcsim/rgc_neuron.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rgcsim::neuron {

using device::Region;

std::uint32_t dac_max_code(const DacSpec& dac)
{
    return static_cast<std::uint32_t>((std::uint64_t{1} << dac.nbits) - 1);
}

double dac_current(const DacSpec& dac, std::uint32_t code)
{
    if (dac.nbits < 1 || dac.nbits > 24)
        throw std::invalid_argument("DAC nbits must be in [1, 24]");
    if (code > dac_max_code(dac))
        throw std::out_of_range("DAC code " + std::to_string(code) + " exceeds " +
                                std::to_string(dac.nbits) + "-bit range");
    return static_cast<double>(code) * dac.i_unit;
}

RgcParams reference_params() { return RgcParams{}; }

void validate(const RgcParams& p)
{
    auto device = [](const MosParams& m, const char* name) {
        try {
            device::validate(m);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(name) + ": " + e.what());
        }
        if (m.polarity != device::Polarity::Nmos)
            throw std::invalid_argument(std::string(name) + ": the neuron topology uses NMOS devices");
    };
    device(p.m1, "m1");
    device(p.m2, "m2");
    device(p.m3, "m3");
    device(p.m5, "m5");
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0))
            throw std::invalid_argument(std::string(name) + " must be > 0");
    };
    positive(p.ib, "ib");
    positive(p.ib2, "ib2");
    positive(p.ro_b2, "ro_b2");
    positive(p.vdd, "vdd");
    positive(p.r_load, "r_load");
    positive(p.ic, "ic");
    for (const auto* d : {&p.dac, &p.dac_out}) {
        if (d->nbits < 1 || d->nbits > 24)
            throw std::invalid_argument("dac nbits must be in [1, 24]");
        if (!(d->i_unit > 0.0))
            throw std::invalid_argument("dac i_unit must be > 0");
    }
    if (!std::isfinite(p.vc) || !std::isfinite(p.vb3))
        throw std::invalid_argument("vc and vb3 must be finite");
}

namespace {

// Drain-to-source current of an NMOS with its partial derivatives. Handles
// vd < vs by swapping the roles of drain and source.
struct Channel {
    double i = 0.0;
    double d_vg = 0.0;
    double d_vs = 0.0;
    double d_vd = 0.0;
    MosEval eval;
};

Channel channel(const MosParams& m, double vg, double vs, double vd)
{
    Channel c;
    if (vd >= vs) {
        c.eval = device::mos_eval(m, vg - vs, vd - vs);
        c.i = c.eval.current;
        c.d_vg = c.eval.gm;
        c.d_vd = c.eval.gds;
        c.d_vs = -c.eval.gm - c.eval.gds;
    } else {
        c.eval = device::mos_eval(m, vg - vd, vs - vd);
        c.i = -c.eval.current;
        c.d_vg = -c.eval.gm;
        c.d_vs = -c.eval.gds;
        c.d_vd = c.eval.gm + c.eval.gds;
    }
    return c;
}

constexpr double kGminJacobian = 1e-12;

struct Evaluation {
    Eigen::Vector4d f;
    Eigen::Matrix4d jac;
    Channel m1, m2, m3;
    double i_load2 = 0.0;
    double i_load = 0.0;
};

Evaluation evaluate(const RgcParams& p, const Bias& b, double i_dac, double i_dac_out,
                    const Eigen::Vector4d& v)
{
    const double vx = v[0], vg = v[1], vd = v[2], vo = v[3];
    Evaluation e;
    e.m1 = channel(p.m1, vg, vx, vd);
    e.m2 = channel(p.m2, vx, 0.0, vg);
    e.m3 = channel(p.m3, p.vb3, vd, vo);
    const double g_b2 = std::isinf(p.ro_b2) ? 0.0 : 1.0 / p.ro_b2;
    e.i_load2 = p.ib2 + (p.vdd - vg) * g_b2;
    e.i_load = (p.vdd - vo) / p.r_load;

    e.f[0] = b.i_in - p.ib + e.m1.i;
    e.f[1] = e.i_load2 + i_dac - e.m2.i;
    e.f[2] = e.m3.i - e.m1.i;
    e.f[3] = e.i_load - i_dac_out - e.m3.i;

    e.jac.setZero();
    e.jac(0, 0) = e.m1.d_vs;
    e.jac(0, 1) = e.m1.d_vg;
    e.jac(0, 2) = e.m1.d_vd;
    e.jac(1, 0) = -e.m2.d_vg;
    e.jac(1, 1) = -g_b2 - e.m2.d_vd;
    e.jac(2, 0) = -e.m1.d_vs;
    e.jac(2, 1) = -e.m1.d_vg;
    e.jac(2, 2) = e.m3.d_vs - e.m1.d_vd;
    e.jac(2, 3) = e.m3.d_vd;
    e.jac(3, 2) = -e.m3.d_vs;
    e.jac(3, 3) = -1.0 / p.r_load - e.m3.d_vd;

    // Each device keeps a tiny drain-source conductance in the Jacobian so a
    // transiently cut-off device does not make the Newton matrix singular.
    e.jac(0, 0) -= kGminJacobian;
    e.jac(0, 2) += kGminJacobian;
    e.jac(1, 1) -= kGminJacobian;
    e.jac(2, 0) += kGminJacobian;
    e.jac(2, 2) -= 2 * kGminJacobian;
    e.jac(2, 3) += kGminJacobian;
    e.jac(3, 2) += kGminJacobian;
    e.jac(3, 3) -= kGminJacobian;
    return e;
}

double free_norm(const Eigen::Vector4d& f, const std::array<bool, kNodeCount>& free)
{
    double n = 0.0;
    for (std::size_t k = 0; k < kNodeCount; ++k)
        if (free[k])
            n = std::max(n, std::abs(f[static_cast<Eigen::Index>(k)]));
    return n;
}

Eigen::Vector4d initial_guess(const RgcParams& p, const Bias& b, double i_dac, double i_dac_out)
{
    const double i1 = p.ib - b.i_in;
    Eigen::Vector4d v;
    v[0] = p.m2.vt + std::sqrt(2.0 * (p.ib2 + i_dac) / p.m2.beta);
    v[1] = v[0] + p.m1.vt + std::sqrt(2.0 * i1 / p.m1.beta);
    v[2] = p.vb3 - p.m3.vt - std::sqrt(2.0 * i1 / p.m3.beta);
    v[3] = p.vdd - p.r_load * (i1 + i_dac_out);
    return v;
}

}  // namespace

OperatingPoint solve_dc(const RgcParams& p, const Bias& bias, const SolveOptions& opts)
{
    validate(p);
    const double i_dac = dac_current(p.dac, bias.code_in);
    const double i_dac_out = dac_current(p.dac_out, bias.code_out);
    if (!(p.ib - bias.i_in > 0.0))
        throw SolverError(SolverError::Kind::InfeasibleBias,
                          "input current leaves no bias for M1 (cutoff)");

    std::array<bool, kNodeCount> free{};
    Eigen::Vector4d v = initial_guess(p, bias, i_dac, i_dac_out);
    for (std::size_t k = 0; k < kNodeCount; ++k) {
        free[k] = !opts.forced[k].has_value();
        if (!free[k])
            v[static_cast<Eigen::Index>(k)] = *opts.forced[k];
    }
    std::vector<Eigen::Index> idx;
    for (std::size_t k = 0; k < kNodeCount; ++k)
        if (free[k])
            idx.push_back(static_cast<Eigen::Index>(k));
    const auto n = static_cast<Eigen::Index>(idx.size());

    Evaluation ev = evaluate(p, bias, i_dac, i_dac_out, v);
    double norm = free_norm(ev.f, free);
    int it = 0;
    bool converged = n == 0;
    double last_step = std::numeric_limits<double>::infinity();
    while (!converged && it < opts.max_iterations) {
        ++it;
        Eigen::MatrixXd j(n, n);
        Eigen::VectorXd rhs(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            rhs[r] = -ev.f[idx[static_cast<std::size_t>(r)]];
            for (Eigen::Index c = 0; c < n; ++c)
                j(r, c) = ev.jac(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
        }
        const Eigen::VectorXd dx = j.fullPivLu().solve(rhs);
        if (!dx.allFinite())
            break;

        double scale = 1.0;
        Eigen::Vector4d trial = v;
        Evaluation tev;
        double tnorm = 0.0;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            trial = v;
            for (Eigen::Index r = 0; r < n; ++r)
                trial[idx[static_cast<std::size_t>(r)]] += scale * dx[r];
            tev = evaluate(p, bias, i_dac, i_dac_out, trial);
            tnorm = free_norm(tev.f, free);
            if (tnorm <= norm || h == opts.max_halvings)
                break;
            scale *= 0.5;
        }
        last_step = scale * dx.cwiseAbs().maxCoeff();
        v = trial;
        ev = tev;
        norm = tnorm;
        converged = norm <= opts.residual_tol && last_step <= opts.step_tol;
    }
    if (!converged) {
        std::ostringstream os;
        os << "DC solve did not converge after " << it << " iterations (residual " << norm
           << " A, last step " << last_step << " V)";
        throw SolverError(SolverError::Kind::NonConvergence, os.str(), norm);
    }

    OperatingPoint op;
    op.bias = bias;
    op.v_in = v[0];
    op.v_gate1 = v[1];
    op.v_mid = v[2];
    op.v_out = v[3];
    op.i_m1 = ev.m1.i;
    op.i_m2 = ev.m2.i;
    op.i_m3 = ev.m3.i;
    op.i_dac = i_dac;
    op.i_dac_out = i_dac_out;
    op.i_load2 = ev.i_load2;
    op.i_load = ev.i_load;
    op.m1 = ev.m1.eval;
    op.m2 = ev.m2.eval;
    op.m3 = ev.m3.eval;
    for (std::size_t k = 0; k < kNodeCount; ++k) {
        const double f = ev.f[static_cast<Eigen::Index>(k)];
        op.residual[k] = free[k] ? f : 0.0;
        op.forced_current[k] = free[k] ? 0.0 : -f;
    }
    op.iterations = it;

    std::string cut;
    if (op.m1.region == Region::Cutoff)
        cut += " M1";
    if (op.m2.region == Region::Cutoff)
        cut += " M2";
    if (op.m3.region == Region::Cutoff)
        cut += " M3";
    if (!cut.empty())
        throw SolverError(SolverError::Kind::InfeasibleBias, "infeasible bias, cutoff:" + cut, norm);
    return op;
}

OperatingPoint solve_dc(const RgcParams& p, double i_in, std::uint32_t code_in)
{
    return solve_dc(p, Bias{i_in, code_in, 0});
}

double tuned_vds1(const RgcParams& p)
{
    return p.vc + std::sqrt(2.0 * p.ic / p.m5.beta) + p.m5.vt;
}

double tuned_transconductance(const RgcParams& p) { return p.m1.beta * tuned_vds1(p); }

SmallSignalReport small_signal(const RgcParams& p, const OperatingPoint& op)
{
    std::string bad;
    if (op.m2.region != Region::Saturation)
        bad += " M2 (" + std::string(device::to_string(op.m2.region)) + ", needs saturation)";
    if (op.m3.region != Region::Saturation)
        bad += " M3 (" + std::string(device::to_string(op.m3.region)) + ", needs saturation)";
    if (op.m1.region == Region::Cutoff || !(op.m1.gm > 0.0))
        bad += " M1 (cutoff)";
    if (!bad.empty())
        throw PreconditionError("small-signal preconditions violated:" + bad);

    SmallSignalReport r;
    const double ro2 = op.m2.ro;
    const double rpar = std::isinf(ro2) ? p.ro_b2
                        : std::isinf(p.ro_b2) ? ro2
                                              : ro2 * p.ro_b2 / (ro2 + p.ro_b2);
    r.a = op.m2.gm * rpar;
    r.zin = 1.0 / (r.a * op.m1.gm);
    r.rout = op.m3.gm * op.m3.ro * op.m1.ro;
    r.v_ds1_tuned = tuned_vds1(p);
    r.gm_tuned = p.m1.beta * r.v_ds1_tuned;
    return r;
}

double zin_numeric(const RgcParams& p, const Bias& bias, double delta_i)
{
    Bias lo = bias;
    Bias hi = bias;
    lo.i_in -= delta_i;
    hi.i_in += delta_i;
    const double v_hi = solve_dc(p, hi).v_in;
    const double v_lo = solve_dc(p, lo).v_in;
    return (v_hi - v_lo) / (2.0 * delta_i);
}

double gain_numeric(const RgcParams& p, const OperatingPoint& op, double delta_v)
{
    SolveOptions o;
    o.forced[0] = op.v_in + delta_v;
    const double g_hi = solve_dc(p, op.bias, o).v_gate1;
    o.forced[0] = op.v_in - delta_v;
    const double g_lo = solve_dc(p, op.bias, o).v_gate1;
    return -(g_hi - g_lo) / (2.0 * delta_v);
}

double rout_numeric(const RgcParams& p, const OperatingPoint& op, double delta_v)
{
    SolveOptions o;
    o.forced[0] = op.v_in;
    o.forced[3] = op.v_out + delta_v;
    const double i_hi = solve_dc(p, op.bias, o).i_m3;
    o.forced[3] = op.v_out - delta_v;
    const double i_lo = solve_dc(p, op.bias, o).i_m3;
    return 2.0 * delta_v / (i_hi - i_lo);
}

std::vector<double> linear_sweep(double center, double half_span, std::size_t n)
{
    std::vector<double> s(n, center);
    if (n < 2)
        return s;
    for (std::size_t k = 0; k < n; ++k)
        s[k] = center - half_span + 2.0 * half_span * static_cast<double>(k) /
                                        static_cast<double>(n - 1);
    return s;
}

TransferCurve transfer_curve(const RgcParams& p, std::uint32_t code_in, std::uint32_t code_out,
                             const std::vector<double>& i_in_sweep)
{
    TransferCurve tc;
    tc.points.reserve(i_in_sweep.size());
    for (double i : i_in_sweep) {
        TransferPoint pt;
        pt.i_in = i;
        try {
            const auto op = solve_dc(p, Bias{i, code_in, code_out});
            pt.v_out = op.v_out;
            pt.v_in = op.v_in;
            pt.feasible = true;
        } catch (const SolverError& e) {
            pt.error = e.what();
            ++tc.infeasible;
        }
        tc.points.push_back(pt);
    }
    if (i_in_sweep.empty())
        return tc;

    const auto [lo_it, hi_it] = std::minmax_element(i_in_sweep.begin(), i_in_sweep.end());
    const double lo = *lo_it + 0.1 * (*hi_it - *lo_it);
    const double hi = *hi_it - 0.1 * (*hi_it - *lo_it);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, vmin = 0, vmax = 0;
    std::size_t n = 0;
    bool first = true;
    for (const auto& pt : tc.points) {
        if (!pt.feasible)
            continue;
        if (first) {
            vmin = vmax = pt.v_out;
            first = false;
        }
        vmin = std::min(vmin, pt.v_out);
        vmax = std::max(vmax, pt.v_out);
        if (pt.i_in < lo || pt.i_in > hi)
            continue;
        sx += pt.i_in;
        sy += pt.v_out;
        sxx += pt.i_in * pt.i_in;
        sxy += pt.i_in * pt.v_out;
        ++n;
    }
    if (n >= 2) {
        const double dn = static_cast<double>(n);
        const double den = dn * sxx - sx * sx;
        tc.slope = (dn * sxy - sx * sy) / den;
        tc.intercept = (sy - tc.slope * sx) / dn;
        const double swing = vmax - vmin;
        for (const auto& pt : tc.points) {
            if (!pt.feasible || pt.i_in < lo || pt.i_in > hi)
                continue;
            const double dev = std::abs(pt.v_out - (tc.intercept + tc.slope * pt.i_in));
            tc.max_fit_deviation = std::max(tc.max_fit_deviation, swing > 0 ? dev / swing : dev);
        }
    }
    return tc;
}

}  // namespace rgcsim::neuron

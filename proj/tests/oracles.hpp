#pragma once
// Reference computations for the tests. Written independently of the library:
// own square-law formulas, own dense elimination, own bisection.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

// Gaussian elimination with partial pivoting on a dense copy.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k]))
                piv = i;
        if (a[piv][k] == 0.0)
            throw std::runtime_error("oracle: singular matrix");
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            if (f == 0.0)
                continue;
            for (std::size_t j = k; j < n; ++j)
                a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j)
            s -= a[k][j] * x[j];
        x[k] = s / a[k][k];
    }
    return x;
}

// Crossbar with every resistance strictly positive, voltage-driven rows.
// Unknowns: row node (i,j), column node (i,j), neuron input j.
// g is row-major rows x cols.
struct CrossbarResult {
    std::vector<double> column_currents;
    double source_power = 0.0;
    double dissipated = 0.0;
};

inline CrossbarResult crossbar_nodal(const std::vector<double>& g, std::size_t rows, std::size_t cols,
                                     const std::vector<double>& v_row, double r_row, double r_col,
                                     const std::vector<double>& r_neuron)
{
    const std::size_t nr = rows * cols;
    const std::size_t n = 2 * nr + cols;
    auto R = [&](std::size_t i, std::size_t j) { return i * cols + j; };
    auto C = [&](std::size_t i, std::size_t j) { return nr + i * cols + j; };
    auto N = [&](std::size_t j) { return 2 * nr + j; };

    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);
    auto between = [&](std::size_t p, std::size_t q, double y) {
        a[p][p] += y;
        a[q][q] += y;
        a[p][q] -= y;
        a[q][p] -= y;
    };
    auto to_fixed = [&](std::size_t p, double y, double v) {
        a[p][p] += y;
        b[p] += y * v;
    };
    for (std::size_t i = 0; i < rows; ++i) {
        to_fixed(R(i, 0), 1.0 / r_row, v_row[i]);
        for (std::size_t j = 0; j + 1 < cols; ++j)
            between(R(i, j), R(i, j + 1), 1.0 / r_row);
        for (std::size_t j = 0; j < cols; ++j)
            between(R(i, j), C(i, j), g[i * cols + j]);
    }
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i + 1 < rows; ++i)
            between(C(i, j), C(i + 1, j), 1.0 / r_col);
        between(C(rows - 1, j), N(j), 1.0 / r_col);
        to_fixed(N(j), 1.0 / r_neuron[j], 0.0);
    }
    const auto v = dense_solve(a, b);

    CrossbarResult out;
    out.column_currents.resize(cols);
    auto burn = [&](double dv, double y) { out.dissipated += dv * dv * y; };
    for (std::size_t i = 0; i < rows; ++i) {
        const double i_src = (v_row[i] - v[R(i, 0)]) / r_row;
        out.source_power += v_row[i] * i_src;
        burn(v_row[i] - v[R(i, 0)], 1.0 / r_row);
        for (std::size_t j = 0; j + 1 < cols; ++j)
            burn(v[R(i, j)] - v[R(i, j + 1)], 1.0 / r_row);
        for (std::size_t j = 0; j < cols; ++j)
            burn(v[R(i, j)] - v[C(i, j)], g[i * cols + j]);
    }
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i + 1 < rows; ++i)
            burn(v[C(i, j)] - v[C(i + 1, j)], 1.0 / r_col);
        burn(v[C(rows - 1, j)] - v[N(j)], 1.0 / r_col);
        out.column_currents[j] = v[N(j)] / r_neuron[j];
        burn(v[N(j)], 1.0 / r_neuron[j]);
    }
    return out;
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi)
{
    double flo = f(lo);
    for (int k = 0; k < 400 && hi - lo > 0.0; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi)
            break;
        const double fm = f(mid);
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Saturation-only square law, written out here rather than borrowed.
inline double sat_current(double beta, double vt, double lambda, double vgs, double vds)
{
    const double vov = vgs - vt;
    return vov <= 0.0 ? 0.0 : 0.5 * beta * vov * vov * (1.0 + lambda * vds);
}

// Either region; lambda only in saturation.
inline double any_current(double beta, double vt, double lambda, double vgs, double vds)
{
    const double vov = vgs - vt;
    if (vov <= 0.0)
        return 0.0;
    if (vds < vov)
        return beta * (vov * vds - 0.5 * vds * vds);
    return 0.5 * beta * vov * vov * (1.0 + lambda * vds);
}

struct Device {
    double beta, vt, lambda;
};

struct NeuronCase {
    Device m1, m2, m3;
    double ib, ib2, ro_b2, vdd, vb3, r_load;
    double i_dac, i_dac_out, i_in;
};

struct NeuronNodes {
    double v_in, v_gate1, v_mid, v_out;
};

// DC point assuming M2 and M3 saturated (M1 may be in either region). The
// input-node KCL fixes the M1 current; the output follows; the cascode source
// and the M1 gate are 1-D bisections; v_in is bisected on the gate-node KCL.
inline NeuronNodes neuron_bisection(const NeuronCase& c)
{
    const double i1 = c.ib - c.i_in;
    NeuronNodes n{};
    n.v_out = c.vdd - c.r_load * (i1 + c.i_dac_out);
    n.v_mid = bisect(
        [&](double vd) {
            return sat_current(c.m3.beta, c.m3.vt, c.m3.lambda, c.vb3 - vd, n.v_out - vd) - i1;
        },
        -1.0, c.vb3 - c.m3.vt);
    auto gate = [&](double vx) {
        return bisect(
            [&](double vg) {
                return any_current(c.m1.beta, c.m1.vt, c.m1.lambda, vg - vx, n.v_mid - vx) - i1;
            },
            vx + c.m1.vt, c.vdd + 10.0);
    };
    auto h = [&](double vx) {
        const double vg = gate(vx);
        const double load = c.ib2 + (std::isinf(c.ro_b2) ? 0.0 : (c.vdd - vg) / c.ro_b2) + c.i_dac;
        return load - sat_current(c.m2.beta, c.m2.vt, c.m2.lambda, vx, vg);
    };
    n.v_in = bisect(h, c.m2.vt, c.vdd);
    n.v_gate1 = gate(n.v_in);
    return n;
}

}  // namespace oracle

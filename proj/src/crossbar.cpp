#include "rgcsim/crossbar.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <charconv>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>


namespace rgcsim::crossbar {

namespace {

void check_bounds(double g_min, double g_max)
{
    if (!(g_min > 0.0) || !(g_max >= g_min))
        throw std::invalid_argument("conductance bounds require 0 < g_min <= g_max");
}

void check_cell(double g, double g_min, double g_max, std::size_t i, std::size_t j)
{
    if (!(g >= g_min && g <= g_max)) {
        std::ostringstream os;
        os << "conductance at (" << i << ", " << j << ") = " << g << " S outside [" << g_min
           << ", " << g_max << "]";
        throw std::invalid_argument(os.str());
    }
}

void check_excitation(const ConductanceMatrix& g, const Excitation& x)
{
    if (x.values.size() != g.rows())
        throw std::invalid_argument("excitation length " + std::to_string(x.values.size()) +
                                    " does not match " + std::to_string(g.rows()) + " rows");
    for (double v : x.values)
        if (!std::isfinite(v))
            throw std::invalid_argument("excitation values must be finite");
}

}  // namespace

ConductanceMatrix::ConductanceMatrix(std::size_t rows, std::size_t cols, double g_min,
                                     double g_max)
    : ConductanceMatrix(rows, cols, g_min, g_max, std::vector<double>(rows * cols, g_min))
{
}

ConductanceMatrix::ConductanceMatrix(std::size_t rows, std::size_t cols, double g_min,
                                     double g_max, std::vector<double> values)
    : rows_(rows), cols_(cols), g_min_(g_min), g_max_(g_max), g_(std::move(values))
{
    if (rows == 0 || cols == 0)
        throw std::invalid_argument("crossbar dimensions must be >= 1");
    check_bounds(g_min, g_max);
    if (g_.size() != rows * cols)
        throw std::invalid_argument("conductance value count does not match dimensions");
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            check_cell((*this)(i, j), g_min_, g_max_, i, j);
}

void ConductanceMatrix::set(std::size_t i, std::size_t j, double g)
{
    if (i >= rows_ || j >= cols_)
        throw std::out_of_range("conductance index out of range");
    check_cell(g, g_min_, g_max_, i, j);
    g_[i * cols_ + j] = g;
}

ConductanceMatrix parse_csv(const std::string& text, double g_min, double g_max)
{
    std::istringstream in(text);
    std::string line;
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        std::vector<double> row;
        bool numeric = true;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t end = line.find(',', start);
            if (end == std::string::npos)
                end = line.size();
            std::string field = line.substr(start, end - start);
            const auto b = field.find_first_not_of(" \t");
            const auto e = field.find_last_not_of(" \t");
            field = b == std::string::npos ? std::string{} : field.substr(b, e - b + 1);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
                numeric = false;
                break;
            }
            row.push_back(v);
            start = end + 1;
        }
        if (!numeric) {
            if (rows == 0 && values.empty())
                continue;  // header
            throw std::invalid_argument("conductance CSV line " + std::to_string(line_no) +
                                        ": non-numeric field");
        }
        if (cols == 0)
            cols = row.size();
        else if (row.size() != cols)
            throw std::invalid_argument("conductance CSV line " + std::to_string(line_no) +
                                        ": expected " + std::to_string(cols) + " columns");
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
    }
    return ConductanceMatrix(rows, cols, g_min, g_max, std::move(values));
}

ConductanceMatrix load_csv(const std::filesystem::path& path, double g_min, double g_max)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open conductance CSV " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_csv(buf.str(), g_min, g_max);
}

std::string to_csv(const ConductanceMatrix& g)
{
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, g(i, j),
                                         std::chars_format::general, 17);
            (void)ec;
            if (j)
                out += ',';
            out.append(buf, p);
        }
        out += '\n';
    }
    return out;
}

NonIdealSpec NonIdealSpec::zeros(std::size_t cols)
{
    NonIdealSpec s;
    s.r_neuron_in.assign(cols, 0.0);
    s.v_neuron_offset.assign(cols, 0.0);
    return s;
}

NonIdealSpec NonIdealSpec::scaled(double factor) const
{
    NonIdealSpec s = *this;
    s.r_wire_row *= factor;
    s.r_wire_col *= factor;
    for (double& r : s.r_neuron_in)
        r *= factor;
    return s;
}

std::vector<double> output_currents_ideal(const ConductanceMatrix& g, const Excitation& x)
{
    check_excitation(g, x);
    std::vector<double> v = x.values;
    if (x.mode == ExcitationMode::Current) {
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double gsum = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j)
                gsum += g(i, j);
            v[i] = x.values[i] / gsum;
        }
    }
    std::vector<double> out(g.cols(), 0.0);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
            out[j] += g(i, j) * v[i];
    return out;
}

double ideal_read_power(const ConductanceMatrix& g, std::span<const double> row_voltages)
{
    if (row_voltages.size() != g.rows())
        throw std::invalid_argument("row voltage count does not match crossbar rows");
    double p = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        double gsum = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j)
            gsum += g(i, j);
        p += row_voltages[i] * row_voltages[i] * gsum;
    }
    return p;
}

namespace {

// Node handles: >= 0 indexes an unknown voltage, < 0 encodes fixed node -(k+1).
using Node = long;

struct Element {
    Node a;
    Node b;
    double r;            // ohm; 0 means an ideal short carried as a branch current
    long branch = -1;    // MNA branch index for shorts
};

class Network {
public:
    Node add_unknown(std::string name)
    {
        names_.push_back(std::move(name));
        return static_cast<Node>(names_.size() - 1);
    }
    Node add_fixed(double v)
    {
        fixed_.push_back(v);
        return -static_cast<Node>(fixed_.size());
    }
    std::size_t add_element(Node a, Node b, double r)
    {
        Element e{a, b, r, -1};
        if (r == 0.0)
            e.branch = static_cast<long>(n_branches_++);
        elements_.push_back(e);
        return elements_.size() - 1;
    }
    void inject(Node n, double amps) { injections_.emplace_back(n, amps); }

    void solve()
    {
        check_connectivity();
        const std::size_t nv = names_.size();
        const std::size_t n = nv + n_branches_;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(elements_.size() * 4);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

        for (const auto& e : elements_) {
            if (e.r > 0.0) {
                const double gc = 1.0 / e.r;
                stamp_conductance(trip, rhs, e.a, e.b, gc);
            } else {
                const auto k = static_cast<Eigen::Index>(nv + e.branch);
                // Branch current flows a -> b.
                if (e.a >= 0) {
                    trip.emplace_back(e.a, k, 1.0);
                    trip.emplace_back(k, e.a, 1.0);
                } else {
                    rhs[k] -= fixed(e.a);
                }
                if (e.b >= 0) {
                    trip.emplace_back(e.b, k, -1.0);
                    trip.emplace_back(k, e.b, -1.0);
                } else {
                    rhs[k] += fixed(e.b);
                }
            }
        }
        for (auto [node, amps] : injections_)
            if (node >= 0)
                rhs[node] += amps;

        Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        m.setFromTriplets(trip.begin(), trip.end());
        m.makeCompressed();

        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(m);
        if (lu.info() != Eigen::Success)
            throw SingularNetwork("nodal system is numerically singular: " + lu.lastErrorMessage(),
                                  "unknown");
        x_ = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !x_.allFinite())
            throw SingularNetwork("nodal solve failed", "unknown");
    }

    double voltage(Node n) const { return n >= 0 ? x_[n] : fixed(n); }

    /// Current through element a -> b.
    double current(std::size_t idx) const
    {
        const Element& e = elements_[idx];
        if (e.r > 0.0)
            return (voltage(e.a) - voltage(e.b)) / e.r;
        return x_[static_cast<Eigen::Index>(names_.size() + e.branch)];
    }

    double dissipated() const
    {
        double p = 0.0;
        for (const auto& e : elements_)
            if (e.r > 0.0) {
                const double dv = voltage(e.a) - voltage(e.b);
                p += dv * dv / e.r;
            }
        return p;
    }

    std::size_t unknowns() const { return names_.size() + n_branches_; }

private:
    double fixed(Node n) const { return fixed_[static_cast<std::size_t>(-n - 1)]; }

    void stamp_conductance(std::vector<Eigen::Triplet<double>>& trip, Eigen::VectorXd& rhs,
                           Node a, Node b, double gc) const
    {
        if (a >= 0) {
            trip.emplace_back(a, a, gc);
            if (b >= 0)
                trip.emplace_back(a, b, -gc);
            else
                rhs[a] += gc * fixed(b);
        }
        if (b >= 0) {
            trip.emplace_back(b, b, gc);
            if (a >= 0)
                trip.emplace_back(b, a, -gc);
            else
                rhs[b] += gc * fixed(a);
        }
    }

    // Every unknown node needs a conductive path to some fixed potential.
    void check_connectivity() const
    {
        const std::size_t nv = names_.size();
        std::vector<std::vector<Node>> adj(nv);
        std::vector<char> seen(nv, 0);
        std::queue<Node> q;
        for (const auto& e : elements_) {
            if (e.a >= 0 && e.b >= 0) {
                adj[static_cast<std::size_t>(e.a)].push_back(e.b);
                adj[static_cast<std::size_t>(e.b)].push_back(e.a);
            } else if (e.a >= 0 && !seen[static_cast<std::size_t>(e.a)]) {
                seen[static_cast<std::size_t>(e.a)] = 1;
                q.push(e.a);
            } else if (e.b >= 0 && !seen[static_cast<std::size_t>(e.b)]) {
                seen[static_cast<std::size_t>(e.b)] = 1;
                q.push(e.b);
            }
        }
        while (!q.empty()) {
            const Node n = q.front();
            q.pop();
            for (Node m : adj[static_cast<std::size_t>(n)])
                if (!seen[static_cast<std::size_t>(m)]) {
                    seen[static_cast<std::size_t>(m)] = 1;
                    q.push(m);
                }
        }
        for (std::size_t i = 0; i < nv; ++i)
            if (!seen[i])
                throw SingularNetwork("node " + names_[i] + " has no path to a fixed potential",
                                      names_[i]);
    }

    std::vector<std::string> names_;
    std::vector<double> fixed_;
    std::vector<Element> elements_;
    std::vector<std::pair<Node, double>> injections_;
    std::size_t n_branches_ = 0;
    Eigen::VectorXd x_;
};

std::string cell_name(const char* kind, std::size_t i, std::size_t j)
{
    return std::string(kind) + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
}

double spec_value(const std::vector<double>& v, std::size_t j, const char* what)
{
    if (v.empty())
        return 0.0;
    const double r = v[j];
    if (!std::isfinite(r))
        throw std::invalid_argument(std::string(what) + " must be finite");
    return r;
}

}  // namespace

NodalSolution solve_nonideal(const ConductanceMatrix& g, const Excitation& x,
                             const NonIdealSpec& spec)
{
    check_excitation(g, x);
    const std::size_t rows = g.rows();
    const std::size_t cols = g.cols();
    if (!spec.r_neuron_in.empty() && spec.r_neuron_in.size() != cols)
        throw std::invalid_argument("r_neuron_in length does not match columns");
    if (!spec.v_neuron_offset.empty() && spec.v_neuron_offset.size() != cols)
        throw std::invalid_argument("v_neuron_offset length does not match columns");
    if (!(spec.r_wire_row >= 0.0) || !(spec.r_wire_col >= 0.0) ||
        !std::isfinite(spec.r_wire_row) || !std::isfinite(spec.r_wire_col))
        throw std::invalid_argument("wire resistances must be finite and >= 0");
    for (double r : spec.r_neuron_in)
        if (!(r >= 0.0))
            throw std::invalid_argument("r_neuron_in must be >= 0");

    Network net;
    std::vector<Node> driver(rows);
    std::vector<Node> row_node(rows * cols);
    std::vector<Node> col_node(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        driver[i] = x.mode == ExcitationMode::Voltage
                        ? net.add_fixed(x.values[i])
                        : net.add_unknown("driver[" + std::to_string(i) + "]");
        for (std::size_t j = 0; j < cols; ++j) {
            row_node[i * cols + j] = net.add_unknown(cell_name("row", i, j));
            col_node[i * cols + j] = net.add_unknown(cell_name("col", i, j));
        }
    }

    std::vector<std::size_t> access(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        access[i] = net.add_element(driver[i], row_node[i * cols], spec.r_wire_row);
        for (std::size_t j = 0; j + 1 < cols; ++j)
            net.add_element(row_node[i * cols + j], row_node[i * cols + j + 1], spec.r_wire_row);
        for (std::size_t j = 0; j < cols; ++j)
            net.add_element(row_node[i * cols + j], col_node[i * cols + j], 1.0 / g(i, j));
        if (x.mode == ExcitationMode::Current)
            net.inject(driver[i], x.values[i]);
    }

    std::vector<std::size_t> neuron_elem(cols);
    std::vector<double> offsets(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i + 1 < rows; ++i)
            net.add_element(col_node[i * cols + j], col_node[(i + 1) * cols + j], spec.r_wire_col);
        const Node term = net.add_unknown("neuron_in[" + std::to_string(j) + "]");
        net.add_element(col_node[(rows - 1) * cols + j], term, spec.r_wire_col);
        offsets[j] = spec_value(spec.v_neuron_offset, j, "v_neuron_offset");
        const Node ref = net.add_fixed(offsets[j]);
        neuron_elem[j] = net.add_element(term, ref, spec_value(spec.r_neuron_in, j, "r_neuron_in"));
    }

    net.solve();

    NodalSolution sol;
    sol.unknowns = net.unknowns();
    sol.column_currents.resize(cols);
    sol.row_currents.resize(rows);
    sol.row_voltages.resize(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        sol.column_currents[j] = net.current(neuron_elem[j]);
        sol.source_power -= offsets[j] * sol.column_currents[j];
    }
    for (std::size_t i = 0; i < rows; ++i) {
        sol.row_currents[i] = net.current(access[i]);
        sol.row_voltages[i] = net.voltage(driver[i]);
        sol.source_power += sol.row_voltages[i] * sol.row_currents[i];
    }
    sol.dissipated_power = net.dissipated();
    return sol;
}

std::vector<double> output_currents_nonideal(const ConductanceMatrix& g, const Excitation& x,
                                             const NonIdealSpec& spec)
{
    return solve_nonideal(g, x, spec).column_currents;
}

std::vector<double> dot_product_error(const ConductanceMatrix& g, const Excitation& x,
                                      const NonIdealSpec& spec)
{
    const auto ideal = output_currents_ideal(g, x);
    const auto real = output_currents_nonideal(g, x, spec);
    std::vector<double> err(ideal.size());
    for (std::size_t j = 0; j < ideal.size(); ++j) {
        const double d = std::abs(real[j] - ideal[j]);
        err[j] = ideal[j] != 0.0 ? d / std::abs(ideal[j]) : std::abs(real[j]);
    }
    return err;
}

}  // namespace rgcsim::crossbar

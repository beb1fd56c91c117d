#include "rgcsim/energy.hpp"

#include <limits>
#include <stdexcept>

namespace rgcsim::energy {

double digital_baseline(double n_mac, double e_mac, double n_activation, double e_act)
{
    if (n_mac < 0 || e_mac < 0 || n_activation < 0 || e_act < 0)
        throw std::invalid_argument("digital_baseline: inputs must be non-negative");
    return n_mac * e_mac + n_activation * e_act;
}

EnergyReport energy_estimate(const RunRecord& run, const EnergyParams& params)
{
    if (params.t_eval < 0 || params.p_neuron < 0 || params.t_sar_step < 0 || params.p_sar < 0 ||
        !(params.n_inferences >= 1))
        throw std::invalid_argument("energy parameters must be non-negative, n_inferences >= 1");
    EnergyReport r;
    r.t_eval = params.t_eval;
    r.e_neurons = static_cast<double>(run.n_neurons) * params.p_neuron * params.t_eval;
    r.e_crossbar = run.crossbar_power * params.t_eval;
    r.e_sar = static_cast<double>(run.n_calibrated_nodes) * run.nbits * params.t_sar_step *
              params.p_sar / params.n_inferences;
    r.e_total = r.e_crossbar + r.e_neurons + r.e_sar;
    r.e_digital_baseline = digital_baseline(static_cast<double>(run.n_mac), params.e_mac,
                                            static_cast<double>(run.n_activations), params.e_act);
    if (r.e_total > 0)
        r.ratio = r.e_digital_baseline / r.e_total;
    else
        r.ratio = r.e_digital_baseline > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    return r;
}

}  // namespace rgcsim::energy

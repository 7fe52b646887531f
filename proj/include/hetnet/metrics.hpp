#pragma once

// Global objective and the reported figures of merit. Throughputs enter in
// kbit/s; the PF index is taken over those.

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "hetnet/netmodel.hpp"

namespace hetnet {

struct MetricsRecord {
    double pf_index = 0.0;              // sum w_i ln r_i
    double tx_cost = 0.0;               // sum zeta_m P_mz / |Q|
    double op_cost = 0.0;               // sum over active, loaded m of zeta_m C_m
    double objective = 0.0;
    double weighted_throughput = 0.0;   // sum w_i r_i, kbit/s
    double transmit_power_w = 0.0;
    double total_power_w = 0.0;         // transmit + operation power of active stations
    double energy_efficiency = 0.0;     // kbit/s per W
    std::size_t active_stations = 0;
};

/// `throughput_kbps[i]` is client i's rate over the reporting window and
/// `loaded[m]` whether station m served anyone in it.
inline MetricsRecord evaluate(std::span<const Client> clients, std::span<const double> throughput_kbps,
                              const PowerAllocation& alloc, std::span<const BaseStation> stations,
                              std::span<const char> loaded, const ResourceBlockGrid& grid) {
    if (throughput_kbps.size() != clients.size() || loaded.size() != stations.size() ||
        alloc.num_stations() != stations.size()) {
        throw std::invalid_argument("metrics snapshot shapes disagree");
    }
    MetricsRecord r;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const double w = clients[i].weight, t = throughput_kbps[i];
        r.pf_index += t > 0.0 ? w * std::log(t) : -std::numeric_limits<double>::infinity();
        r.weighted_throughput += w * t;
    }
    for (std::size_t m = 0; m < stations.size(); ++m) {
        const auto& st = stations[m];
        const double p = alloc.average_power(m, grid);
        r.transmit_power_w += p;
        r.tx_cost += st.energy_price * p;
        if (!st.active()) continue;
        ++r.active_stations;
        r.total_power_w += st.operation_power_w;
        if (loaded[m]) r.op_cost += st.energy_price * st.operation_power_w;
    }
    r.total_power_w += r.transmit_power_w;
    r.objective = r.pf_index - r.tx_cost - r.op_cost;
    r.energy_efficiency = r.total_power_w > 0.0 ? r.weighted_throughput / r.total_power_w : 0.0;
    return r;
}

}  // namespace hetnet

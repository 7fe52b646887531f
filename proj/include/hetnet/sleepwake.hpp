#pragma once

// Station mode management: the active -> sleep comparison, beaconing from
// sleeping stations, the wakeup estimator, and the wake condition.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hetnet/channel.hpp"
#include "hetnet/netmodel.hpp"

namespace hetnet {

/// One associated client's view of its own and runner-up stations.
struct RetentionReport {
    double weight = 1.0;
    double own_rate = 0.0;
    double runner_up_rate = 0.0;
};

struct SleepDecision {
    bool sleep = false;
    double stay_value = 0.0;   // sum w ln r_own - zeta C
    double leave_value = 0.0;  // sum w ln r_runner_up
    double margin() const noexcept { return leave_value - stay_value; }
};

/// Sleep iff the clients would be better off, net of the operation cost,
/// at their runner-up stations. A client without an alternative blocks it.
inline SleepDecision sleep_decision(std::span<const RetentionReport> reports, double price, double operation_power) {
    SleepDecision d;
    d.stay_value = -price * operation_power;
    for (const auto& r : reports) {
        d.stay_value += r.weight * std::log(r.own_rate);
        d.leave_value += r.runner_up_rate > 0.0 ? r.weight * std::log(r.runner_up_rate)
                                                : -std::numeric_limits<double>::infinity();
    }
    d.sleep = d.leave_value > d.stay_value;
    return d;
}

/// Equal-power beacon row of a sleeping station.
inline std::vector<double> beacon_row(const BaseStation& st, const ResourceBlockGrid& grid) {
    return std::vector<double>(grid.num_blocks(), st.power_budget_w / static_cast<double>(grid.num_freq_chunks));
}

/// Solo rate sum_z H(i, m1, z) of every client when sleeping station m1
/// beacons at equal power against the interference of `alloc`. The beacon
/// itself does not interfere with anyone.
inline std::vector<double> beacon_rates(const GainTensor& gains, std::span<const Client> clients,
                                        const PowerAllocation& alloc, std::span<const BaseStation> stations,
                                        std::size_t m1, const ResourceBlockGrid& grid) {
    const double p = stations[m1].power_budget_w / static_cast<double>(grid.num_freq_chunks);
    std::vector<double> out(clients.size(), 0.0);
    for (std::size_t i = 0; i < clients.size(); ++i) {
        double s = 0.0;
        for (std::size_t z = 0; z < grid.num_blocks(); ++z) {
            const std::size_t f = grid.chunk_of(z);
            double interference = 0.0;
            for (std::size_t l = 0; l < stations.size(); ++l) {
                if (l != m1) interference += gains.static_gain(i, l, f) * alloc(l, z);
            }
            s += shannon_rate(grid.block_bandwidth_hz,
                              gains.static_gain(i, m1, f) * p / (clients[i].noise_w[z] + interference));
        }
        out[i] = s;
    }
    return out;
}

struct WakeReport {
    std::size_t client = 0;
    double weight = 1.0;
    double solo_rate = 0.0;     // r_hat_{i,m1}
    double current_rate = 0.0;  // r_i

    double key() const noexcept {
        return current_rate > 0.0 ? solo_rate / current_rate * weight : std::numeric_limits<double>::infinity();
    }
};

/// Clients whose beacon solo rate beats their current throughput.
inline std::vector<WakeReport> collect_wake_reports(std::span<const Client> clients, std::span<const double> solo,
                                                    std::span<const double> current) {
    std::vector<WakeReport> out;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (solo[i] > current[i]) out.push_back({i, clients[i].weight, solo[i], current[i]});
    }
    return out;
}

struct WakeEstimate {
    std::vector<std::size_t> members;  // client ids in S
    double weight = 0.0;               // w_hat
};

/// Greedy estimate of who would join m1. Sorted by (r_hat / r) * w
/// descending, ties by client id, so the result ignores arrival order.
inline WakeEstimate wakeup_estimator(std::span<const WakeReport> reports) {
    std::vector<WakeReport> sorted(reports.begin(), reports.end());
    std::sort(sorted.begin(), sorted.end(), [](const WakeReport& a, const WakeReport& b) {
        const double ka = a.key(), kb = b.key();
        return ka > kb || (ka == kb && a.client < b.client);
    });
    WakeEstimate e;
    for (const auto& r : sorted) {
        if (r.key() > e.weight + r.weight) {
            e.members.push_back(r.client);
            e.weight += r.weight;
        }
    }
    return e;
}

struct WakeDecision {
    bool wake = false;
    double margin = -std::numeric_limits<double>::infinity();
};

inline WakeDecision wake_decision(const WakeEstimate& est, std::span<const WakeReport> reports, double price,
                                  double operation_power) {
    WakeDecision d;
    if (est.members.empty() || !(est.weight > 0.0)) return d;
    double gain = 0.0;
    for (std::size_t id : est.members) {
        const auto it = std::find_if(reports.begin(), reports.end(), [&](const WakeReport& r) { return r.client == id; });
        if (it == reports.end()) continue;
        const double lost = it->current_rate > 0.0 ? std::log(it->current_rate) : -std::numeric_limits<double>::infinity();
        gain += it->weight * (std::log(it->solo_rate * it->weight / est.weight) - lost);
    }
    d.margin = gain - price * operation_power;
    d.wake = d.margin > 0.0;
    return d;
}

}  // namespace hetnet

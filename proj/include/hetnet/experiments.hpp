#pragma once

// Figure presets, parameter sweeps and a small worker pool for running
// independent configurations.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hetnet/engine.hpp"
#include "hetnet/report.hpp"

namespace hetnet {

enum class SweepAxis { none, price, distance };

inline std::string_view to_string(SweepAxis a) noexcept {
    switch (a) {
        case SweepAxis::none: return "none";
        case SweepAxis::price: return "price";
        case SweepAxis::distance: return "distance";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(std::string_view s) {
    if (s == "none") return SweepAxis::none;
    if (s == "price") return SweepAxis::price;
    if (s == "distance") return SweepAxis::distance;
    throw std::invalid_argument("unknown sweep axis: " + std::string(s));
}

struct PolicySpec {
    std::string label;
    SchedulerPolicy scheduler = SchedulerPolicy::pf_fast;
    PowerPolicy power = PowerPolicy::gradient;
    AssociationPolicy association = AssociationPolicy::proposed;
};

inline PolicySpec policy_of(const SimConfig& c) {
    return {fmt::format("{}/{}/{}", to_string(c.scheduler), to_string(c.power), to_string(c.association)), c.scheduler,
            c.power, c.association};
}

struct Experiment {
    std::string name;
    SimConfig base;
    SweepAxis axis = SweepAxis::none;
    std::vector<double> values;  // sweep points; ignored for SweepAxis::none
    std::vector<PolicySpec> policies;
};

inline const std::vector<std::string_view>& preset_names() {
    static const std::vector<std::string_view> names{"fig-scheduling", "fig-power", "fig-association", "fig-large"};
    return names;
}

inline std::vector<double> distance_sweep() {
    std::vector<double> v;
    for (int d = 100; d <= 1000; d += 100) v.push_back(d);
    return v;
}

inline std::vector<double> assoc_price_sweep() {
    std::vector<double> v;
    for (int k = 1; k <= 12; ++k) v.push_back(0.01 * k);
    return v;
}

inline std::vector<double> large_price_sweep() { return {0.0, 0.05, 0.1, 0.2, 0.3, 0.5}; }

/// Baselines use equal power on every block.
inline std::vector<PolicySpec> large_policies() {
    return {{"proposed", SchedulerPolicy::pf_fast, PowerPolicy::gradient, AssociationPolicy::proposed},
            {"rr-default", SchedulerPolicy::rr, PowerPolicy::equal, AssociationPolicy::nearest},
            {"pf-default", SchedulerPolicy::pf_fast, PowerPolicy::equal, AssociationPolicy::nearest},
            {"pf-son-zhou", SchedulerPolicy::pf_fast, PowerPolicy::equal, AssociationPolicy::son_zhou}};
}

inline Experiment preset(std::string_view name) {
    Experiment e;
    e.name = std::string(name);
    if (name == "fig-scheduling") {
        e.base.scenario = "grid25";
        e.policies = {{"rr", SchedulerPolicy::rr, PowerPolicy::equal, AssociationPolicy::nearest},
                      {"pf-slow", SchedulerPolicy::pf_slow, PowerPolicy::equal, AssociationPolicy::nearest},
                      {"pf-fast", SchedulerPolicy::pf_fast, PowerPolicy::equal, AssociationPolicy::nearest}};
    } else if (name == "fig-power") {
        e.base.scenario = "power-pair";
        e.axis = SweepAxis::distance;
        e.values = distance_sweep();
        e.policies = {{"gradient", SchedulerPolicy::pf_fast, PowerPolicy::gradient, AssociationPolicy::nearest},
                      {"equal", SchedulerPolicy::pf_fast, PowerPolicy::equal, AssociationPolicy::nearest}};
    } else if (name == "fig-association") {
        e.base.scenario = "assoc-pair";
        e.axis = SweepAxis::price;
        e.values = assoc_price_sweep();
        e.policies = {{"proposed", SchedulerPolicy::pf_fast, PowerPolicy::gradient, AssociationPolicy::proposed}};
    } else if (name == "fig-large") {
        e.base.scenario = "large";
        e.axis = SweepAxis::price;
        e.values = large_price_sweep();
        e.policies = large_policies();
    } else {
        throw std::invalid_argument("unknown preset: " + std::string(name));
    }
    e.base.validate();
    return e;
}

inline std::vector<double> default_sweep_values(SweepAxis axis, std::string_view scenario) {
    switch (axis) {
        case SweepAxis::none: return {};
        case SweepAxis::distance: return distance_sweep();
        case SweepAxis::price: return scenario == "large" ? large_price_sweep() : assoc_price_sweep();
    }
    return {};
}

struct RunSpec {
    SimConfig config;
    std::string policy;
    double value = 0.0;
};

inline SimConfig configure(SimConfig c, const PolicySpec& p, SweepAxis axis, double value, std::uint64_t seed) {
    c.scheduler = p.scheduler;
    c.power = p.power;
    c.association = p.association;
    c.seed = seed;
    if (axis == SweepAxis::price) {
        c.price = value;
        c.station_prices.clear();
    } else if (axis == SweepAxis::distance) {
        c.scenario_params.station_distance_m = value;
    }
    c.validate();
    return c;
}

/// One run per (value, policy, seed), in that nesting order.
inline std::vector<RunSpec> expand(const Experiment& e, const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (e.policies.empty()) throw std::invalid_argument("experiment has no policies");
    const std::vector<double> values =
        e.axis == SweepAxis::none ? std::vector<double>{0.0} : e.values;
    if (values.empty()) throw std::invalid_argument("sweep has no values");
    std::vector<RunSpec> out;
    for (double v : values)
        for (const auto& p : e.policies)
            for (std::uint64_t seed : seeds) out.push_back({configure(e.base, p, e.axis, v, seed), p.label, v});
    return out;
}

/// Runs every config on up to `threads` workers. Results keep input order;
/// the first failure is rethrown after all workers stop.
inline std::vector<RunResult> run_all(const std::vector<RunSpec>& specs, std::size_t threads = 1) {
    std::vector<RunResult> results(specs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < specs.size(); k = next++) {
            try {
                results[k] = run(specs[k].config);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = specs.size();
            }
        }
    };
    const std::size_t n = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(specs.size(), 1));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

/// The row reported for a run: its last epoch, or the whole horizon when
/// the run was shorter than one epoch.
inline const MetricsRecord& final_metrics(const RunResult& r) {
    return r.series.empty() ? r.overall : r.series.back().metrics;
}

inline std::vector<SweepRow> sweep_rows(const Experiment& e, const std::vector<RunSpec>& specs,
                                        const std::vector<RunResult>& results) {
    std::vector<SweepRow> rows;
    for (std::size_t k = 0; k < specs.size(); ++k)
        rows.push_back({std::string(to_string(e.axis)), specs[k].value, specs[k].policy, specs[k].config.seed,
                        final_metrics(results[k])});
    return rows;
}

}  // namespace hetnet

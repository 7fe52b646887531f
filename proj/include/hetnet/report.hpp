#pragma once

// CSV output for run results. Numbers are printed with 10 significant
// digits; -inf prints as "-inf".

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hetnet/engine.hpp"

namespace hetnet {

inline constexpr std::string_view kMetricsHeader =
    "epoch,objective,pf_index,tx_cost,op_cost,weighted_throughput,total_power,energy_efficiency,active_station_count";
inline constexpr std::string_view kEventsHeader = "epoch,kind,entity,old,new,margin";
inline constexpr std::string_view kSweepHeader =
    "axis,value,policy,seed,objective,pf_index,tx_cost,op_cost,weighted_throughput,total_power,energy_efficiency,"
    "active_station_count";

inline std::string format_number(double v) { return fmt::format("{:.10g}", v); }

inline std::string metrics_fields(const MetricsRecord& m) {
    return fmt::format("{},{},{},{},{},{},{},{}", format_number(m.objective), format_number(m.pf_index),
                       format_number(m.tx_cost), format_number(m.op_cost), format_number(m.weighted_throughput),
                       format_number(m.total_power_w), format_number(m.energy_efficiency), m.active_stations);
}

inline void write_metrics_csv(std::ostream& os, const std::vector<EpochRow>& series) {
    os << kMetricsHeader << '\n';
    for (const auto& row : series) fmt::print(os, "{},{}\n", row.epoch, metrics_fields(row.metrics));
}

inline void write_events_csv(std::ostream& os, const std::vector<Event>& events) {
    os << kEventsHeader << '\n';
    for (const auto& e : events)
        fmt::print(os, "{},{},{},{},{},{}\n", e.epoch, e.kind, e.entity, e.from, e.to, format_number(e.margin));
}

struct SweepRow {
    std::string axis;
    double value = 0.0;
    std::string policy;
    std::uint64_t seed = 0;
    MetricsRecord metrics;
};

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << kSweepHeader << '\n';
    for (const auto& r : rows)
        fmt::print(os, "{},{},{},{},{}\n", r.axis, format_number(r.value), r.policy, r.seed, metrics_fields(r.metrics));
}

}  // namespace hetnet

#pragma once

// Core domain types: the resource-block grid, stations, clients and the
// per-station power allocation, plus the budget feasibility check.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hetnet/matrix.hpp"

namespace hetnet {

/// Time-frequency grid of one frame. Block z maps to chunk f and slot q as
/// z = q * num_freq_chunks + f, so one slot's chunks are contiguous.
struct ResourceBlockGrid {
    std::size_t num_freq_chunks = 50;
    std::size_t num_slots = 20;
    double block_bandwidth_hz = 180e3;
    double slot_duration_s = 0.5e-3;
    double frame_duration_s = 10e-3;

    std::size_t num_blocks() const noexcept { return num_freq_chunks * num_slots; }

    std::size_t block_index(std::size_t f, std::size_t q) const {
        if (f >= num_freq_chunks || q >= num_slots) {
            throw std::out_of_range("resource block (" + std::to_string(f) + "," +
                                    std::to_string(q) + ") outside grid");
        }
        return q * num_freq_chunks + f;
    }

    std::pair<std::size_t, std::size_t> block_coords(std::size_t z) const {
        if (z >= num_blocks()) throw std::out_of_range("resource block index outside grid");
        return {z % num_freq_chunks, z / num_freq_chunks};
    }

    std::size_t chunk_of(std::size_t z) const noexcept { return z % num_freq_chunks; }
    std::size_t slot_of(std::size_t z) const noexcept { return z / num_freq_chunks; }

    void validate() const {
        if (num_freq_chunks == 0 || num_slots == 0) throw std::invalid_argument("empty grid");
        if (!(block_bandwidth_hz > 0.0)) throw std::invalid_argument("block bandwidth must be positive");
    }
};

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

inline double distance_m(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

enum class StationKind { macro, micro };
enum class Mode { active, sleep };

inline std::string_view to_string(StationKind k) noexcept {
    return k == StationKind::macro ? "macro" : "micro";
}
inline std::string_view to_string(Mode m) noexcept { return m == Mode::active ? "active" : "sleep"; }

inline StationKind parse_station_kind(std::string_view s) {
    if (s == "macro") return StationKind::macro;
    if (s == "micro") return StationKind::micro;
    throw std::invalid_argument("unknown station kind: " + std::string(s));
}

struct StationDefaults {
    double power_budget_w;
    double operation_power_w;
};

// Operation power is the active-minus-sleep draw.
inline constexpr StationDefaults kMacroDefaults{20.0, 55.0};
inline constexpr StationDefaults kMicroDefaults{6.3, 17.0};

inline StationDefaults defaults_for(StationKind k) noexcept {
    return k == StationKind::macro ? kMacroDefaults : kMicroDefaults;
}

struct BaseStation {
    std::size_t id = 0;
    StationKind kind = StationKind::macro;
    Point position;
    double power_budget_w = kMacroDefaults.power_budget_w;
    double operation_power_w = kMacroDefaults.operation_power_w;
    double energy_price = 0.0;
    Mode mode = Mode::active;

    bool active() const noexcept { return mode == Mode::active; }

    static BaseStation make(std::size_t id, StationKind kind, Point pos, double price = 0.0) {
        const auto d = defaults_for(kind);
        return BaseStation{id, kind, pos, d.power_budget_w, d.operation_power_w, price, Mode::active};
    }

    void validate() const {
        if (!(power_budget_w > 0.0)) throw std::invalid_argument("station power budget must be positive");
        if (!(operation_power_w >= 0.0)) throw std::invalid_argument("operation power must be non-negative");
        if (!(energy_price >= 0.0)) throw std::invalid_argument("energy price must be non-negative");
    }
};

inline constexpr double kNoiseMinW = 3.5e-15;
inline constexpr double kNoiseMaxW = 4.5e-15;

struct Client {
    std::size_t id = 0;
    Point position;
    double weight = 1.0;
    std::optional<std::size_t> association;
    std::vector<double> noise_w;  // one entry per resource block

    void validate() const {
        if (!(weight > 0.0)) throw std::invalid_argument("client weight must be positive");
    }
};

/// Transmit power P(m, z) in watts, one row per station.
class PowerAllocation {
public:
    PowerAllocation() = default;
    PowerAllocation(std::size_t stations, std::size_t blocks) : p_(stations, blocks, 0.0) {}

    std::size_t num_stations() const noexcept { return p_.rows(); }
    std::size_t num_blocks() const noexcept { return p_.cols(); }

    double& operator()(std::size_t m, std::size_t z) noexcept { return p_(m, z); }
    double operator()(std::size_t m, std::size_t z) const noexcept { return p_(m, z); }

    std::span<double> row(std::size_t m) noexcept { return p_.row(m); }
    std::span<const double> row(std::size_t m) const noexcept { return p_.row(m); }

    void zero_row(std::size_t m) {
        for (double& v : p_.row(m)) v = 0.0;
    }

    /// Mean transmit power of station m over a frame, i.e. sum_z P(m,z) / |Q|.
    double average_power(std::size_t m, const ResourceBlockGrid& grid) const {
        double s = 0.0;
        for (double v : p_.row(m)) s += v;
        return s / static_cast<double>(grid.num_slots);
    }

    friend bool operator==(const PowerAllocation&, const PowerAllocation&) = default;

private:
    Matrix p_;
};

struct PowerViolation {
    enum class Kind { negative_entry, budget_exceeded, sleeping_station_transmits };
    Kind kind;
    std::size_t station;
    std::size_t index;  // block for negative/sleeping entries, slot for budget
    double value;       // offending power, or slot total
};

struct PowerCheck {
    Matrix slack;  // (station, slot) -> sum_f P - W_m
    std::vector<PowerViolation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

/// Checks non-negativity, the per-slot budget sum_f P(m,(f,q)) <= W_m, and
/// that sleeping stations are silent. Budget comparisons use a relative
/// tolerance of 1e-9 * W_m to absorb rounding in the slot sums.
inline PowerCheck validate_power(const PowerAllocation& alloc, std::span<const BaseStation> stations,
                                 const ResourceBlockGrid& grid) {
    if (alloc.num_stations() != stations.size() || alloc.num_blocks() != grid.num_blocks()) {
        throw std::invalid_argument("power allocation shape does not match scenario");
    }
    PowerCheck out{Matrix(stations.size(), grid.num_slots), {}};
    for (std::size_t m = 0; m < stations.size(); ++m) {
        const auto& st = stations[m];
        for (std::size_t q = 0; q < grid.num_slots; ++q) {
            double sum = 0.0;
            for (std::size_t f = 0; f < grid.num_freq_chunks; ++f) {
                const std::size_t z = grid.block_index(f, q);
                const double p = alloc(m, z);
                if (p < 0.0 || std::isnan(p)) {
                    out.violations.push_back({PowerViolation::Kind::negative_entry, m, z, p});
                }
                if (!st.active() && p != 0.0) {
                    out.violations.push_back({PowerViolation::Kind::sleeping_station_transmits, m, z, p});
                }
                sum += p;
            }
            out.slack(m, q) = sum - st.power_budget_w;
            if (out.slack(m, q) > 1e-9 * st.power_budget_w) {
                out.violations.push_back({PowerViolation::Kind::budget_exceeded, m, q, sum});
            }
        }
    }
    return out;
}

}  // namespace hetnet

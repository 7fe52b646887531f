#pragma once

// The four built-in topologies and a JSON scenario format.

#include <cstdint>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetnet/channel.hpp"
#include "hetnet/netmodel.hpp"

namespace hetnet {

struct Scenario {
    std::string id;
    ResourceBlockGrid grid;
    std::vector<BaseStation> stations;
    std::vector<Client> clients;
    std::uint64_t seed = 1;

    void validate() const {
        grid.validate();
        if (stations.empty()) throw std::invalid_argument("scenario has no stations");
        for (std::size_t m = 0; m < stations.size(); ++m) {
            stations[m].validate();
            if (stations[m].id != m) throw std::invalid_argument("station ids must be 0..M-1 in order");
        }
        for (std::size_t i = 0; i < clients.size(); ++i) {
            clients[i].validate();
            if (clients[i].id != i) throw std::invalid_argument("client ids must be 0..I-1 in order");
            if (clients[i].noise_w.size() != grid.num_blocks()) throw std::invalid_argument("client noise not sampled");
        }
    }
};

struct ScenarioParams {
    double station_distance_m = 500.0;  // power-pair inter-station distance
    double grid25_offset_m = 100.0;     // macro sits this far outside the client grid corner, per axis
    double price = 0.0;                 // energy price applied to every station
};

namespace detail {

inline Client make_client(std::size_t id, Point p, double weight, std::uint64_t seed, const ResourceBlockGrid& grid) {
    Client c;
    c.id = id;
    c.position = p;
    c.weight = weight;
    c.noise_w.resize(grid.num_blocks());
    for (std::size_t z = 0; z < grid.num_blocks(); ++z) c.noise_w[z] = sample_noise(seed, id, z);
    return c;
}

inline Point uniform_point(std::uint64_t seed, std::uint64_t kind, std::size_t index, double lo, double hi) {
    SplitMix64 g(stream_key(seed, {stream_tag::placement, kind, index}));
    const double x = lo + (hi - lo) * g.uniform01();
    const double y = lo + (hi - lo) * g.uniform01();
    return {x, y};
}

}  // namespace detail

inline const std::vector<std::string_view>& scenario_ids() {
    static const std::vector<std::string_view> ids{"grid25", "power-pair", "assoc-pair", "large"};
    return ids;
}

inline Scenario build_scenario(std::string_view id, std::uint64_t seed, const ScenarioParams& params = {},
                               const ResourceBlockGrid& grid = {}) {
    Scenario s;
    s.id = std::string(id);
    s.grid = grid;
    s.seed = seed;
    auto add_station = [&](StationKind k, Point p) {
        s.stations.push_back(BaseStation::make(s.stations.size(), k, p, params.price));
    };
    auto add_client = [&](Point p, double w = 1.0) {
        s.clients.push_back(detail::make_client(s.clients.size(), p, w, seed, grid));
    };

    if (id == "grid25") {
        add_station(StationKind::macro, {-params.grid25_offset_m, -params.grid25_offset_m});
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 5; ++col) add_client({100.0 * col, 100.0 * row});
    } else if (id == "power-pair") {
        const double d = params.station_distance_m;
        if (!(d > 0.0)) throw std::invalid_argument("station distance must be positive");
        add_station(StationKind::macro, {0.0, 0.0});
        add_station(StationKind::macro, {d, 0.0});
        for (std::size_t m = 0; m < 2; ++m) {
            const double x = m == 0 ? 0.0 : d;
            for (double dx : {-50.0, 50.0}) {
                add_client({x + dx, 0.0});
                s.clients.back().association = m;
            }
        }
    } else if (id == "assoc-pair") {
        add_station(StationKind::macro, {0.0, 0.0});
        add_station(StationKind::macro, {500.0, 0.0});
        for (double x : {100.0, 200.0, 300.0, 400.0}) add_client({x, 0.0});
    } else if (id == "large") {
        for (double y : {500.0, 1500.0, 2500.0})
            for (double x : {500.0, 1500.0, 2500.0}) add_station(StationKind::macro, {x, y});
        for (std::size_t k = 0; k < 16; ++k) add_station(StationKind::micro, detail::uniform_point(seed, 1, k, 1000.0, 3000.0));
        for (std::size_t k = 0; k < 81; ++k) {
            const Point p = detail::uniform_point(seed, 2, k, 0.0, 3000.0);
            add_client(p, p.x <= 1000.0 && p.y <= 1000.0 ? 2.0 : 1.0);
        }
    } else {
        throw std::invalid_argument("unknown scenario: " + std::string(id));
    }
    s.validate();
    return s;
}

/// Reads a scenario from JSON:
///
///   { "id": "...", "seed": 7,
///     "grid": { "num_freq_chunks": 50, "num_slots": 20, "block_bandwidth_hz": 180000 },
///     "stations": [ { "kind": "macro", "position": [0, 0],
///                     "power_budget_w": 20, "operation_power_w": 55, "energy_price": 0.0 } ],
///     "clients": [ { "position": [100, 0], "weight": 1 } ] }
///
/// Station fields other than kind and position are optional overrides.
/// Alternatively { "builtin": "large", "seed": 3, "price": 0.05 } names one of
/// the built-in topologies.
inline Scenario parse_scenario(const nlohmann::json& j) {
    const std::uint64_t seed = j.value("seed", std::uint64_t{1});
    ResourceBlockGrid grid;
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        grid.num_freq_chunks = g.value("num_freq_chunks", grid.num_freq_chunks);
        grid.num_slots = g.value("num_slots", grid.num_slots);
        grid.block_bandwidth_hz = g.value("block_bandwidth_hz", grid.block_bandwidth_hz);
    }
    grid.validate();
    if (j.contains("builtin")) {
        ScenarioParams p;
        p.price = j.value("price", 0.0);
        p.station_distance_m = j.value("station_distance_m", p.station_distance_m);
        p.grid25_offset_m = j.value("grid25_offset_m", p.grid25_offset_m);
        return build_scenario(j.at("builtin").get<std::string>(), seed, p, grid);
    }
    auto point = [](const nlohmann::json& a) {
        if (!a.is_array() || a.size() != 2) throw std::invalid_argument("position must be [x, y]");
        return Point{a[0].get<double>(), a[1].get<double>()};
    };
    Scenario s;
    s.id = j.value("id", std::string("custom"));
    s.grid = grid;
    s.seed = seed;
    for (const auto& js : j.at("stations")) {
        auto st = BaseStation::make(s.stations.size(), parse_station_kind(js.at("kind").get<std::string>()),
                                    point(js.at("position")), j.value("price", 0.0));
        st.power_budget_w = js.value("power_budget_w", st.power_budget_w);
        st.operation_power_w = js.value("operation_power_w", st.operation_power_w);
        st.energy_price = js.value("energy_price", st.energy_price);
        s.stations.push_back(st);
    }
    for (const auto& jc : j.at("clients"))
        s.clients.push_back(detail::make_client(s.clients.size(), point(jc.at("position")), jc.value("weight", 1.0),
                                                seed, grid));
    s.validate();
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("malformed scenario file " + path + ": " + e.what());
    }
    return parse_scenario(j);
}

}  // namespace hetnet

#pragma once

// The protocol loop. Per frame every active station schedules its clients;
// every power period stations exchange reports and take a gradient step;
// every association epoch the engine records metrics, then runs client
// estimation, sleep decisions, re-association, and (every few epochs)
// beaconing and wake decisions of sleeping stations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetnet/association.hpp"
#include "hetnet/channel.hpp"
#include "hetnet/metrics.hpp"
#include "hetnet/netmodel.hpp"
#include "hetnet/powerctl.hpp"
#include "hetnet/scenario.hpp"
#include "hetnet/scheduler.hpp"
#include "hetnet/sleepwake.hpp"

namespace hetnet {

enum class SchedulerPolicy { pf_fast, pf_slow, rr };
enum class PowerPolicy { gradient, equal };
enum class AssociationPolicy { proposed, nearest, son_zhou };
enum class Estimator { approximate, exact };

inline std::string_view to_string(SchedulerPolicy p) noexcept {
    switch (p) {
        case SchedulerPolicy::pf_fast: return "pf-fast";
        case SchedulerPolicy::pf_slow: return "pf-slow";
        case SchedulerPolicy::rr: return "rr";
    }
    return "?";
}
inline std::string_view to_string(PowerPolicy p) noexcept { return p == PowerPolicy::gradient ? "gradient" : "equal"; }
inline std::string_view to_string(AssociationPolicy p) noexcept {
    switch (p) {
        case AssociationPolicy::proposed: return "proposed";
        case AssociationPolicy::nearest: return "default";
        case AssociationPolicy::son_zhou: return "son-zhou";
    }
    return "?";
}
inline std::string_view to_string(Estimator e) noexcept { return e == Estimator::approximate ? "ae" : "es"; }

inline SchedulerPolicy parse_scheduler(std::string_view s) {
    if (s == "pf-fast") return SchedulerPolicy::pf_fast;
    if (s == "pf-slow") return SchedulerPolicy::pf_slow;
    if (s == "rr") return SchedulerPolicy::rr;
    throw std::invalid_argument("unknown scheduler: " + std::string(s));
}
inline PowerPolicy parse_power(std::string_view s) {
    if (s == "gradient") return PowerPolicy::gradient;
    if (s == "equal") return PowerPolicy::equal;
    throw std::invalid_argument("unknown power policy: " + std::string(s));
}
inline AssociationPolicy parse_association(std::string_view s) {
    if (s == "proposed") return AssociationPolicy::proposed;
    if (s == "default") return AssociationPolicy::nearest;
    if (s == "son-zhou") return AssociationPolicy::son_zhou;
    throw std::invalid_argument("unknown association policy: " + std::string(s));
}
inline Estimator parse_estimator(std::string_view s) {
    if (s == "ae") return Estimator::approximate;
    if (s == "es") return Estimator::exact;
    throw std::invalid_argument("unknown estimator: " + std::string(s));
}

struct SimConfig {
    std::string scenario = "grid25";
    std::uint64_t seed = 1;
    std::size_t horizon_frames = 2000;
    std::size_t power_period = 10;     // frames
    std::size_t epoch_frames = 100;    // frames per association epoch
    std::size_t beacon_period = 5;     // epochs
    Estimator estimator = Estimator::approximate;
    std::size_t es_frames = 2000;
    SchedulerPolicy scheduler = SchedulerPolicy::pf_fast;
    PowerPolicy power = PowerPolicy::gradient;
    AssociationPolicy association = AssociationPolicy::proposed;
    std::optional<double> price;         // every station; unset keeps the scenario's prices
    std::vector<double> station_prices;  // per-station override when non-empty
    double son_zhou_threshold = 2.0;
    std::size_t son_zhou_rounds = 10;
    double switch_margin = 0.05;         // relative gain needed to leave the current station
    double candidate_threshold = kCandidateRateThreshold;
    std::optional<bool> fast_fading;     // unset: on for grid25 only
    PowerCtlParams power_ctl;
    ChannelParams channel;
    ScenarioParams scenario_params;

    void validate() const {
        if (power_period == 0) throw std::invalid_argument("power period must be at least one frame");
        if (epoch_frames < power_period || epoch_frames % power_period != 0) {
            throw std::invalid_argument("association epoch must be a whole number of power periods");
        }
        if (beacon_period == 0) throw std::invalid_argument("beacon period must be at least one epoch");
        if (price && !(*price >= 0.0)) throw std::invalid_argument("energy price must be non-negative");
        for (double p : station_prices)
            if (!(p >= 0.0)) throw std::invalid_argument("energy price must be non-negative");
        if (!(switch_margin >= 0.0)) throw std::invalid_argument("switch margin must be non-negative");
        if (!(son_zhou_threshold >= 0.0)) throw std::invalid_argument("Son-Zhou threshold must be non-negative");
        power_ctl.validate();
    }

    bool fading_enabled() const { return fast_fading.value_or(scenario == "grid25"); }
};

/// Reads the fields present in `j` over the defaults in `cfg`.
inline SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig cfg = {}) {
    static const std::vector<std::string> known{
        "scenario", "seed", "horizon_frames", "power_period", "epoch_frames", "beacon_period", "estimator",
        "es_frames", "scheduler", "power", "association", "price", "station_prices", "son_zhou_threshold",
        "son_zhou_rounds", "switch_margin", "candidate_threshold_kbps", "fast_fading", "power_step",
        "power_step_normalized", "power_step_decay", "schedule_weighted_cells", "cross_gain", "neighbor_threshold", "shadowing_sigma_db", "doppler_hz", "station_distance_m",
        "grid25_offset_m"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("unknown config key: " + key);
    }
    cfg.scenario = j.value("scenario", cfg.scenario);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.horizon_frames = j.value("horizon_frames", cfg.horizon_frames);
    cfg.power_period = j.value("power_period", cfg.power_period);
    cfg.epoch_frames = j.value("epoch_frames", cfg.epoch_frames);
    cfg.beacon_period = j.value("beacon_period", cfg.beacon_period);
    if (j.contains("estimator")) cfg.estimator = parse_estimator(j.at("estimator").get<std::string>());
    cfg.es_frames = j.value("es_frames", cfg.es_frames);
    if (j.contains("scheduler")) cfg.scheduler = parse_scheduler(j.at("scheduler").get<std::string>());
    if (j.contains("power")) cfg.power = parse_power(j.at("power").get<std::string>());
    if (j.contains("association")) cfg.association = parse_association(j.at("association").get<std::string>());
    if (j.contains("price")) cfg.price = j.at("price").get<double>();
    cfg.station_prices = j.value("station_prices", cfg.station_prices);
    cfg.son_zhou_threshold = j.value("son_zhou_threshold", cfg.son_zhou_threshold);
    cfg.son_zhou_rounds = j.value("son_zhou_rounds", cfg.son_zhou_rounds);
    cfg.switch_margin = j.value("switch_margin", cfg.switch_margin);
    if (j.contains("candidate_threshold_kbps"))
        cfg.candidate_threshold = kbps_to_nats(j.at("candidate_threshold_kbps").get<double>());
    if (j.contains("fast_fading")) cfg.fast_fading = j.at("fast_fading").get<bool>();
    cfg.power_ctl.step = j.value("power_step", cfg.power_ctl.step);
    cfg.power_ctl.normalized = j.value("power_step_normalized", cfg.power_ctl.normalized);
    cfg.power_ctl.neighbor_threshold = j.value("neighbor_threshold", cfg.power_ctl.neighbor_threshold);
    cfg.power_ctl.decay_updates = j.value("power_step_decay", cfg.power_ctl.decay_updates);
    cfg.power_ctl.schedule_weighted = j.value("schedule_weighted_cells", cfg.power_ctl.schedule_weighted);
    if (j.contains("cross_gain")) {
        const auto v = j.at("cross_gain").get<std::string>();
        if (v == "client-mean") cfg.power_ctl.cross_gain = CrossGainSource::client_mean;
        else if (v == "station") cfg.power_ctl.cross_gain = CrossGainSource::station;
        else throw std::invalid_argument("unknown cross_gain source: " + v);
    }
    cfg.channel.shadowing_sigma_db = j.value("shadowing_sigma_db", cfg.channel.shadowing_sigma_db);
    cfg.channel.doppler_hz = j.value("doppler_hz", cfg.channel.doppler_hz);
    cfg.scenario_params.station_distance_m = j.value("station_distance_m", cfg.scenario_params.station_distance_m);
    cfg.scenario_params.grid25_offset_m = j.value("grid25_offset_m", cfg.scenario_params.grid25_offset_m);
    cfg.validate();
    return cfg;
}

struct EpochRow {
    std::size_t epoch = 0;
    MetricsRecord metrics;
};

struct Event {
    std::size_t epoch = 0;
    std::string kind;     // "mode" or "association"
    std::size_t entity = 0;
    std::string from;
    std::string to;
    double margin = 0.0;
};

struct RunResult {
    std::vector<EpochRow> series;
    std::vector<Event> events;
    std::vector<BaseStation> final_stations;
    std::vector<std::optional<std::size_t>> final_association;
    PowerAllocation final_power;
    std::vector<double> mean_throughput_kbps;  // per client over the whole horizon
    MetricsRecord overall;                     // metrics of the whole-horizon throughputs
    std::size_t power_updates = 0;
    std::size_t power_violations = 0;
    std::size_t report_values = 0;             // values exchanged in neighbour reports
    std::vector<std::uint64_t> advertisement_digests;  // per epoch, before and after estimation
};

/// Index of the nearest active station; ties go to the lowest id.
inline std::optional<std::size_t> nearest_active(const Client& c, std::span<const BaseStation> stations) {
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t m = 0; m < stations.size(); ++m) {
        if (!stations[m].active()) continue;
        const double d = distance_m(c.position, stations[m].position);
        if (!best || d < best_d) {
            best = m;
            best_d = d;
        }
    }
    return best;
}

/// Nearest active station for every client. With `keep_preset`, a client
/// that already names an active station stays there.
inline void default_associate(std::vector<Client>& clients, std::span<const BaseStation> stations,
                              bool keep_preset = false) {
    for (auto& c : clients) {
        if (keep_preset && c.association && *c.association < stations.size() && stations[*c.association].active())
            continue;
        c.association = nearest_active(c, stations);
    }
}

/// Son-Zhou score of client i for station m: solo rate times the number of
/// other clients already there plus one, over the operation power.
inline double son_zhou_score(double solo_rate, std::size_t others, double operation_power) {
    return solo_rate * static_cast<double>(others + 1) / std::max(operation_power, 1e-12);
}

struct SonZhouResult {
    std::vector<std::pair<std::size_t, double>> slept;  // station, associated weight when slept
    std::size_t rounds = 0;
};

/// Son-Zhou association. Each client picks the active candidate station with
/// the best score, all clients at once against the same counts; stations
/// whose associated weight is below `threshold` then sleep (keeping the
/// best-loaded one if all would). Repeats until nothing changes or
/// `max_rounds` is reached. Slept stations get a zero power row.
inline SonZhouResult son_zhou_associate(const GainTensor& gains, std::vector<Client>& clients,
                                        std::vector<BaseStation>& stations, PowerAllocation& alloc,
                                        const ResourceBlockGrid& grid, double threshold, std::size_t max_rounds,
                                        double candidate_threshold = kCandidateRateThreshold) {
    const std::size_t I = clients.size(), M = stations.size();
    auto pick_all = [&] {
        const auto rates = compute_link_rates(gains, clients, alloc, grid, ChannelVariant::slow);
        std::vector<std::size_t> count(M, 0);
        for (const auto& c : clients)
            if (c.association && *c.association < M) ++count[*c.association];
        bool moved = false;
        std::vector<std::optional<std::size_t>> next(I);
        for (std::size_t i = 0; i < I; ++i) {
            const auto& c = clients[i];
            double best = -1.0;
            for (std::size_t m : candidate_set(rates, i, stations, candidate_threshold)) {
                const auto h = rates.rates(i, m);
                const double solo = std::accumulate(h.begin(), h.end(), 0.0);
                const std::size_t others = count[m] - (c.association == m ? 1 : 0);
                const double score = son_zhou_score(solo, others, stations[m].operation_power_w);
                if (score > best) {
                    best = score;
                    next[i] = m;
                }
            }
            moved = moved || next[i] != c.association;
        }
        for (std::size_t i = 0; i < I; ++i) clients[i].association = next[i];
        return moved;
    };
    SonZhouResult out;
    bool slept_last = false;
    for (std::size_t round = 0; round < max_rounds; ++round) {
        ++out.rounds;
        const bool moved = pick_all();
        std::vector<double> weight(M, 0.0);
        for (const auto& c : clients)
            if (c.association) weight[*c.association] += c.weight;
        std::vector<std::size_t> below;
        std::optional<std::size_t> heaviest;
        std::size_t active = 0;
        for (std::size_t m = 0; m < M; ++m) {
            if (!stations[m].active()) continue;
            ++active;
            if (weight[m] < threshold) below.push_back(m);
            if (!heaviest || weight[m] > weight[*heaviest]) heaviest = m;
        }
        if (active > 0 && below.size() == active)
            below.erase(std::remove(below.begin(), below.end(), *heaviest), below.end());
        for (std::size_t m : below) {
            stations[m].mode = Mode::sleep;
            alloc.zero_row(m);
            out.slept.emplace_back(m, weight[m]);
        }
        slept_last = !below.empty();
        if (!moved && !slept_last) break;
    }
    if (slept_last) pick_all();
    return out;
}

namespace detail {

inline std::uint64_t fnv_mix(std::uint64_t h, double v) noexcept {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof v);
    for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

class Simulation {
public:
    Simulation(Scenario scenario, SimConfig cfg) : s_(std::move(scenario)), cfg_(std::move(cfg)) {
        cfg_.validate();
        s_.validate();
        const std::size_t M = s_.stations.size();
        if (!cfg_.station_prices.empty()) {
            if (cfg_.station_prices.size() != M) throw std::invalid_argument("station_prices must list every station");
            for (std::size_t m = 0; m < M; ++m) s_.stations[m].energy_price = cfg_.station_prices[m];
        } else if (cfg_.price) {
            for (auto& st : s_.stations) st.energy_price = *cfg_.price;
        }
        ChannelParams ch = cfg_.channel;
        ch.fast_fading = cfg_.fading_enabled();
        gains_ = GainTensor::build(s_.stations, s_.clients, s_.grid, s_.seed, ch);
    }

    const Scenario& scenario() const noexcept { return s_; }
    const GainTensor& gains() const noexcept { return gains_; }

    RunResult run() {
        init();
        const std::size_t H = cfg_.horizon_frames;
        for (std::size_t k = 0; k < H; ++k) {
            frame(k);
            if (cfg_.power == PowerPolicy::gradient && (k + 1) % cfg_.power_period == 0) power_step();
            if ((k + 1) % cfg_.epoch_frames == 0) epoch((k + 1) / cfg_.epoch_frames - 1);
        }
        RunResult& r = result_;
        r.final_stations = s_.stations;
        r.final_association.clear();
        for (const auto& c : s_.clients) r.final_association.push_back(c.association);
        r.final_power = alloc_;
        r.mean_throughput_kbps.assign(s_.clients.size(), 0.0);
        if (H > 0) {
            for (std::size_t i = 0; i < s_.clients.size(); ++i)
                r.mean_throughput_kbps[i] = to_kbps(total_sum_[i] / static_cast<double>(H));
            r.overall = evaluate(s_.clients, r.mean_throughput_kbps, alloc_, s_.stations, ever_loaded_, s_.grid);
        }
        return std::move(result_);
    }

private:
    double to_kbps(double per_frame_rate) const {
        return nats_to_kbps(per_frame_rate / static_cast<double>(s_.grid.num_slots));
    }

    void init() {
        const std::size_t I = s_.clients.size(), M = s_.stations.size();
        result_ = RunResult{};
        for (auto& st : s_.stations) st.mode = Mode::active;
        default_associate(s_.clients, s_.stations, true);
        alloc_ = equal_power(s_.stations, s_.grid);
        window_sum_.assign(I, 0.0);
        total_sum_.assign(I, 0.0);
        current_rate_.assign(I, 0.0);
        window_frames_ = 0;
        ever_loaded_.assign(M, 0);
        window_loaded_.assign(M, 0);
        sched_.assign(M, ScheduleState{});
        power_iter_.assign(M, 0);
        if (cfg_.association == AssociationPolicy::son_zhou) son_zhou_round(0);
        rebuild_members(std::vector<char>(M, 1));
        cell_ = build_cell_model(gains_, s_.clients, s_.stations, s_.grid, nullptr, cfg_.power_ctl.cross_gain);
        refresh_rates();
    }

    // Membership lists and schedule states; `changed[m]` resets station m.
    void rebuild_members(const std::vector<char>& changed) {
        const std::size_t M = s_.stations.size();
        members_.assign(M, {});
        for (const auto& c : s_.clients)
            if (c.association) members_[*c.association].push_back(c.id);
        for (std::size_t m = 0; m < M; ++m) {
            if (changed[m] || sched_[m].num_clients() != members_[m].size())
                sched_[m] = ScheduleState(members_[m].size(), s_.grid.num_blocks());
            if (!members_[m].empty()) window_loaded_[m] = ever_loaded_[m] = 1;
        }
        fresh_.assign(M, 0);
        power_iter_.resize(M, 0);
        for (std::size_t m = 0; m < M; ++m) {
            fresh_[m] = changed[m];
            if (changed[m]) power_iter_[m] = 0;
        }
    }

    void refresh_rates() {
        rates_ = compute_link_rates(gains_, s_.clients, alloc_, s_.grid, ChannelVariant::slow);
        const std::size_t M = s_.stations.size(), Z = s_.grid.num_blocks();
        member_rates_.assign(M, Matrix{});
        member_weights_.assign(M, {});
        for (std::size_t m = 0; m < M; ++m) {
            const auto& mem = members_[m];
            member_rates_[m] = Matrix(mem.size(), Z);
            for (std::size_t j = 0; j < mem.size(); ++j) {
                const auto row = rates_.rates(mem[j], m);
                std::copy(row.begin(), row.end(), member_rates_[m].row(j).begin());
                member_weights_[m].push_back(s_.clients[mem[j]].weight);
            }
            if (fresh_[m] && !mem.empty()) {
                sched_[m].warm_start(member_rates_[m]);
                fresh_[m] = 0;
            }
        }
    }

    // Instantaneous rates of station m's members at frame k.
    Matrix fast_rates(std::size_t m, std::uint64_t k) const {
        const auto& mem = members_[m];
        const std::size_t M = s_.stations.size();
        const auto& g = s_.grid;
        Matrix out(mem.size(), g.num_blocks());
        std::vector<double> gl(M);
        for (std::size_t j = 0; j < mem.size(); ++j) {
            const std::size_t i = mem[j];
            for (std::size_t f = 0; f < g.num_freq_chunks; ++f) {
                for (std::size_t l = 0; l < M; ++l)
                    gl[l] = gains_.gain(i, l, f, k, ChannelVariant::fast);
                for (std::size_t q = 0; q < g.num_slots; ++q) {
                    const std::size_t z = g.block_index(f, q);
                    double interference = 0.0;
                    for (std::size_t l = 0; l < M; ++l)
                        if (l != m) interference += gl[l] * alloc_(l, z);
                    const double signal = gl[m] * alloc_(m, z);
                    out(j, z) = signal > 0.0 ? shannon_rate(g.block_bandwidth_hz,
                                                            signal / (s_.clients[i].noise_w[z] + interference))
                                             : 0.0;
                }
            }
        }
        return out;
    }

    void frame(std::size_t k) {
        const std::size_t Z = s_.grid.num_blocks();
        const bool fading = gains_.has_fast_fading();
        std::vector<std::size_t> assignment;
        std::vector<double> credited;
        for (std::size_t m = 0; m < s_.stations.size(); ++m) {
            const auto& mem = members_[m];
            if (!s_.stations[m].active() || mem.empty()) continue;
            const Matrix& slow = member_rates_[m];
            Matrix fast;
            if (fading) fast = fast_rates(m, k);
            const Matrix& realized = fading ? fast : slow;
            const Matrix& decide = cfg_.scheduler == SchedulerPolicy::pf_fast ? realized : slow;
            const std::size_t n = mem.size();
            assignment.assign(Z, kNoClient);
            credited.assign(n, 0.0);
            if (cfg_.scheduler == SchedulerPolicy::rr) {
                const std::size_t j = rr_pick(n, k);
                for (std::size_t z = 0; z < Z; ++z) {
                    assignment[z] = j;
                    credited[j] += realized(j, z);
                }
            } else {
                const auto& w = member_weights_[m];
                const auto r = sched_[m].throughput();
                std::vector<double> scale(n);
                for (std::size_t j = 0; j < n; ++j) scale[j] = w[j] / std::max(r[j], kColdStartEpsilon);
                for (std::size_t z = 0; z < Z; ++z) {
                    std::size_t best = 0;
                    double best_val = -1.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double v = scale[j] * decide(j, z);
                        if (v > best_val) {
                            best_val = v;
                            best = j;
                        }
                    }
                    assignment[z] = best;
                    credited[best] += realized(best, z);
                }
            }
            sched_[m].record_frame(assignment, credited);
            for (std::size_t j = 0; j < n; ++j) {
                window_sum_[mem[j]] += credited[j];
                total_sum_[mem[j]] += credited[j];
            }
        }
        ++window_frames_;
    }

    void power_step() {
        const std::size_t M = s_.stations.size();
        const PowerAllocation snapshot = alloc_;
        if (cfg_.power_ctl.schedule_weighted) {
            for (std::size_t m = 0; m < M; ++m)
                weight_cell_by_schedule(cell_, gains_, s_.clients, m, members_[m], sched_[m].fractions(),
                                        cfg_.power_ctl.cross_gain == CrossGainSource::client_mean);
        }
        for (std::size_t m = 0; m < M; ++m) {
            if (!s_.stations[m].active() || !(cell_.weight[m] > 0.0)) continue;
            std::vector<NeighborReport> reports;
            for (std::size_t o : prune_neighbors(cell_, m, cfg_.power_ctl.neighbor_threshold)) {
                if (!s_.stations[o].active() || !(cell_.weight[o] > 0.0)) continue;
                reports.push_back(make_report(cell_, snapshot, o, m));
                result_.report_values += reports.back().value_count();
            }
            const auto g = gradient_row(cell_, snapshot, m, reports);
            const auto row = power_update(snapshot.row(m), g.value, cfg_.power_ctl, s_.stations[m].power_budget_w, s_.grid,
                                          ++power_iter_[m]);
            std::copy(row.begin(), row.end(), alloc_.row(m).begin());
        }
        ++result_.power_updates;
        result_.power_violations += validate_power(alloc_, s_.stations, s_.grid).violations.size();
        refresh_rates();
    }

    std::vector<CellAdvertisement> advertisements() const {
        std::vector<CellAdvertisement> ads(s_.stations.size());
        for (std::size_t m = 0; m < s_.stations.size(); ++m) {
            if (!s_.stations[m].active()) {
                ads[m].station = m;
                continue;
            }
            ads[m] = make_advertisement(m, member_weights_[m], sched_[m].fractions(), member_rates_[m]);
        }
        return ads;
    }

    static std::uint64_t digest(const std::vector<CellAdvertisement>& ads) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& a : ads) {
            h = detail::fnv_mix(h, a.weight);
            for (double v : a.hbar) h = detail::fnv_mix(h, v);
        }
        return h;
    }

    void epoch(std::size_t e) {
        const std::size_t I = s_.clients.size(), M = s_.stations.size();
        std::vector<double> kbps(I, 0.0);
        for (std::size_t i = 0; i < I; ++i) {
            current_rate_[i] = window_frames_ > 0 ? window_sum_[i] / static_cast<double>(window_frames_) : 0.0;
            kbps[i] = to_kbps(current_rate_[i]);
        }
        result_.series.push_back({e, evaluate(s_.clients, kbps, alloc_, s_.stations, window_loaded_, s_.grid)});
        std::fill(window_sum_.begin(), window_sum_.end(), 0.0);
        window_frames_ = 0;
        for (std::size_t m = 0; m < M; ++m) window_loaded_[m] = members_[m].empty() ? 0 : 1;

        std::vector<std::optional<std::size_t>> before;
        for (const auto& c : s_.clients) before.push_back(c.association);
        const std::vector<Mode> modes_before = [&] {
            std::vector<Mode> v;
            for (const auto& st : s_.stations) v.push_back(st.mode);
            return v;
        }();

        if (cfg_.association == AssociationPolicy::proposed) proposed_round(e);
        else if (cfg_.association == AssociationPolicy::son_zhou) son_zhou_round(e);

        std::vector<char> changed(M, 0);
        for (std::size_t i = 0; i < I; ++i) {
            const auto& now = s_.clients[i].association;
            if (now == before[i]) continue;
            if (before[i]) changed[*before[i]] = 1;
            if (now) changed[*now] = 1;
            result_.events.push_back({e, "association", i, before[i] ? std::to_string(*before[i]) : "none",
                                      now ? std::to_string(*now) : "none", 0.0});
        }
        for (std::size_t m = 0; m < M; ++m)
            if (s_.stations[m].mode != modes_before[m]) changed[m] = 1;
        if (std::any_of(changed.begin(), changed.end(), [](char c) { return c != 0; })) {
            rebuild_members(changed);
        }
        const CellModel previous = cell_;
        cell_ = build_cell_model(gains_, s_.clients, s_.stations, s_.grid, &previous, cfg_.power_ctl.cross_gain);
        refresh_rates();
    }

    void set_mode(std::size_t e, std::size_t m, Mode to, double margin) {
        auto& st = s_.stations[m];
        result_.events.push_back({e, "mode", m, std::string(to_string(st.mode)), std::string(to_string(to)), margin});
        st.mode = to;
        if (to == Mode::sleep) {
            alloc_.zero_row(m);
        } else {
            const auto row = beacon_row(st, s_.grid);
            std::copy(row.begin(), row.end(), alloc_.row(m).begin());
        }
    }

    void proposed_round(std::size_t e) {
        const std::size_t I = s_.clients.size(), M = s_.stations.size();
        const auto ads = advertisements();
        result_.advertisement_digests.push_back(digest(ads));

        // Estimates and choices, all against the same snapshot.
        std::vector<std::optional<AssociationReport>> choice(I);
        for (std::size_t i = 0; i < I; ++i) {
            const auto& c = s_.clients[i];
            std::vector<StationEstimate> est;
            for (std::size_t m : candidate_set(rates_, i, s_.stations, cfg_.candidate_threshold)) {
                double r;
                if (c.association == m) {
                    r = current_rate_[i];
                } else if (cfg_.estimator == Estimator::approximate) {
                    r = approximate_estimate(c.weight, rates_.rates(i, m), ads[m]).rate;
                } else {
                    r = exact_estimate(c.weight, rates_.rates(i, m), member_weights_[m], member_rates_[m], cfg_.es_frames);
                }
                est.push_back({m, r});
            }
            if (est.empty()) continue;
            auto rep = choose_station(i, est);
            // Stay unless the best alternative is clearly better.
            if (c.association && rep.station != *c.association) {
                const auto cur = std::find_if(est.begin(), est.end(),
                                              [&](const StationEstimate& x) { return x.station == *c.association; });
                if (cur != est.end() && rep.own_rate <= (1.0 + cfg_.switch_margin) * cur->rate) {
                    rep.runner_up = rep.station;
                    rep.runner_up_rate = rep.own_rate;
                    rep.station = cur->station;
                    rep.own_rate = cur->rate;
                    for (const auto& x : est) {
                        if (x.station == rep.station) continue;
                        if (x.rate > rep.runner_up_rate || (x.rate == rep.runner_up_rate && x.station < *rep.runner_up)) {
                            rep.runner_up = x.station;
                            rep.runner_up_rate = x.rate;
                        }
                    }
                }
            }
            choice[i] = rep;
        }
        result_.advertisement_digests.push_back(digest(ads));

        // Sleep decisions, strongest margin first.
        struct Pending {
            std::size_t station;
            SleepDecision d;
        };
        std::vector<Pending> pending;
        for (std::size_t m = 0; m < M; ++m) {
            if (!s_.stations[m].active()) continue;
            std::vector<RetentionReport> reps;
            for (std::size_t i = 0; i < I; ++i)
                if (choice[i] && choice[i]->station == m)
                    reps.push_back({s_.clients[i].weight, choice[i]->own_rate, choice[i]->runner_up_rate});
            const auto d = sleep_decision(reps, s_.stations[m].energy_price, s_.stations[m].operation_power_w);
            if (d.sleep) pending.push_back({m, d});
        }
        std::stable_sort(pending.begin(), pending.end(),
                         [](const Pending& a, const Pending& b) { return a.d.margin() > b.d.margin(); });
        std::vector<char> slept(M, 0), locked(M, 0);
        std::size_t active = 0;
        for (const auto& st : s_.stations) active += st.active() ? 1 : 0;
        for (const auto& p : pending) {
            const std::size_t m0 = p.station;
            if (locked[m0] || active <= 1) continue;
            bool ok = true;
            for (std::size_t i = 0; i < I && ok; ++i) {
                if (!choice[i] || choice[i]->station != m0) continue;
                const auto alt = choice[i]->runner_up;
                ok = alt && *alt != m0 && s_.stations[*alt].active() && !slept[*alt];
            }
            if (!ok) continue;
            slept[m0] = 1;
            --active;
            for (std::size_t i = 0; i < I; ++i) {
                if (!choice[i] || choice[i]->station != m0) continue;
                const std::size_t alt = *choice[i]->runner_up;
                choice[i]->station = alt;
                choice[i]->own_rate = choice[i]->runner_up_rate;
                locked[alt] = 1;
            }
            set_mode(e, m0, Mode::sleep, p.d.margin());
        }

        for (std::size_t i = 0; i < I; ++i) {
            auto& c = s_.clients[i];
            if (choice[i]) c.association = choice[i]->station;
            else c.association.reset();
        }

        if ((e + 1) % cfg_.beacon_period != 0) return;
        std::vector<std::size_t> waking;
        for (std::size_t m1 = 0; m1 < M; ++m1) {
            if (s_.stations[m1].active() || slept[m1]) continue;
            const auto solo = beacon_rates(gains_, s_.clients, alloc_, s_.stations, m1, s_.grid);
            const auto reports = collect_wake_reports(s_.clients, solo, current_rate_);
            const auto est = wakeup_estimator(reports);
            const auto d = wake_decision(est, reports, s_.stations[m1].energy_price, s_.stations[m1].operation_power_w);
            if (d.wake) set_mode(e, m1, Mode::active, d.margin);
        }
    }

    void son_zhou_round(std::size_t e) {
        const auto r = son_zhou_associate(gains_, s_.clients, s_.stations, alloc_, s_.grid, cfg_.son_zhou_threshold,
                                          cfg_.son_zhou_rounds, cfg_.candidate_threshold);
        for (const auto& [m, weight] : r.slept)
            result_.events.push_back({e, "mode", m, "active", "sleep", cfg_.son_zhou_threshold - weight});
    }

    Scenario s_;
    SimConfig cfg_;
    GainTensor gains_;
    PowerAllocation alloc_;
    CellModel cell_;
    LinkRates rates_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<Matrix> member_rates_;
    std::vector<std::vector<double>> member_weights_;
    std::vector<ScheduleState> sched_;
    std::vector<char> fresh_;
    std::vector<std::size_t> power_iter_;
    std::vector<double> window_sum_, total_sum_, current_rate_;
    std::size_t window_frames_ = 0;
    std::vector<char> ever_loaded_, window_loaded_;
    RunResult result_;
};

/// The configured scenario: a built-in id, or a path to a JSON scenario
/// file (anything ending in ".json"). The run's prices replace any station
/// prices in the file.
inline Scenario make_scenario(const SimConfig& cfg) {
    const std::string& id = cfg.scenario;
    if (id.size() > 5 && id.compare(id.size() - 5, 5, ".json") == 0) return load_scenario(id);
    ScenarioParams p = cfg.scenario_params;
    p.price = cfg.price.value_or(0.0);
    return build_scenario(id, cfg.seed, p);
}

/// Builds the configured scenario and runs it.
inline RunResult run(const SimConfig& cfg) {
    cfg.validate();
    return Simulation(make_scenario(cfg), cfg).run();
}

}  // namespace hetnet

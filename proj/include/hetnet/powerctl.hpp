#pragma once

// Distributed power control. Each station treats its cell as a single
// representative link (mean client gain and noise, station-to-station gains
// for interference) and climbs the gradient of
//
//   U(P) = sum_m w^m ln( sum_z B ln(1 + SINR_mz(P)) ) - sum_{m,z} zeta_m P_mz / |Q|
//
// using reports exchanged with nearby stations. B only adds the constant
// w^m ln B to U, so it drops out of the gradient and of the reports.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "hetnet/channel.hpp"
#include "hetnet/matrix.hpp"
#include "hetnet/netmodel.hpp"

namespace hetnet {

inline constexpr double kDenominatorFloor = 1e-30;  // W
inline constexpr double kLogRateFloor = 1e-12;

/// Per-cell quantities seen by power control.
struct CellModel {
    ResourceBlockGrid grid;
    std::vector<double> weight;   // w^m, 0 for a cell without clients
    std::vector<double> price;    // zeta_m
    std::vector<double> budget;   // W_m
    std::vector<char> active;
    Matrix own_gain;              // G_{m,m,z}
    Matrix noise;                 // N_{m,z}
    std::vector<double> cross;    // G_{m,l,f}, gain from station l into cell m

    std::size_t num_stations() const noexcept { return weight.size(); }

    double cross_gain(std::size_t m, std::size_t l, std::size_t z) const noexcept {
        return cross[(m * num_stations() + l) * grid.num_freq_chunks + grid.chunk_of(z)];
    }

    /// A model with `stations` empty cells; callers fill in the entries.
    static CellModel empty(std::size_t stations, const ResourceBlockGrid& grid) {
        CellModel c;
        c.grid = grid;
        c.weight.assign(stations, 0.0);
        c.price.assign(stations, 0.0);
        c.budget.assign(stations, 1.0);
        c.active.assign(stations, 1);
        c.own_gain = Matrix(stations, grid.num_blocks(), 0.0);
        c.noise = Matrix(stations, grid.num_blocks(), kNoiseMinW);
        c.cross.assign(stations * stations * grid.num_freq_chunks, 0.0);
        return c;
    }

    void set_cross_gain(std::size_t m, std::size_t l, std::size_t f, double g) {
        cross[(m * num_stations() + l) * grid.num_freq_chunks + f] = g;
    }
};

/// Where the cross-cell gain G_{m,l,z} comes from: the mean gain from l to
/// m's clients, or the station-to-station gain between m and l.
enum class CrossGainSource { client_mean, station };

/// Builds the cell model from the scenario. Own gain, noise and (by
/// default) cross gains are arithmetic means over the clients currently
/// associated with each station; a cell without clients keeps the means
/// from `previous` (when given) and gets weight 0.
inline CellModel build_cell_model(const GainTensor& gains, std::span<const Client> clients,
                                  std::span<const BaseStation> stations, const ResourceBlockGrid& grid,
                                  const CellModel* previous = nullptr,
                                  CrossGainSource source = CrossGainSource::client_mean) {
    const std::size_t M = stations.size();
    CellModel c = CellModel::empty(M, grid);
    std::vector<std::size_t> count(M, 0);
    for (const auto& cl : clients) {
        if (!cl.association) continue;
        const std::size_t m = *cl.association;
        ++count[m];
        c.weight[m] += cl.weight;
    }
    for (std::size_t m = 0; m < M; ++m) {
        c.price[m] = stations[m].energy_price;
        c.budget[m] = stations[m].power_budget_w;
        c.active[m] = stations[m].active() ? 1 : 0;
        for (std::size_t l = 0; l < M; ++l) {
            if (l == m) continue;
            for (std::size_t f = 0; f < grid.num_freq_chunks; ++f) c.set_cross_gain(m, l, f, gains.station_gain(m, l, f));
        }
        if (count[m] == 0 && previous && previous->num_stations() == M) {
            for (std::size_t z = 0; z < grid.num_blocks(); ++z) {
                c.own_gain(m, z) = previous->own_gain(m, z);
                c.noise(m, z) = previous->noise(m, z);
            }
            if (source == CrossGainSource::client_mean) {
                const std::size_t base = m * M * grid.num_freq_chunks;
                std::copy_n(previous->cross.begin() + static_cast<std::ptrdiff_t>(base), M * grid.num_freq_chunks,
                            c.cross.begin() + static_cast<std::ptrdiff_t>(base));
            }
        }
    }
    if (source == CrossGainSource::client_mean) {
        std::vector<double> xsum(M * M * grid.num_freq_chunks, 0.0);
        for (std::size_t i = 0; i < clients.size(); ++i) {
            if (!clients[i].association) continue;
            const std::size_t m = *clients[i].association;
            for (std::size_t l = 0; l < M; ++l) {
                if (l == m) continue;
                for (std::size_t f = 0; f < grid.num_freq_chunks; ++f)
                    xsum[(m * M + l) * grid.num_freq_chunks + f] += gains.static_gain(i, l, f);
            }
        }
        for (std::size_t m = 0; m < M; ++m) {
            if (count[m] == 0) continue;
            for (std::size_t l = 0; l < M; ++l) {
                if (l == m) continue;
                for (std::size_t f = 0; f < grid.num_freq_chunks; ++f)
                    c.set_cross_gain(m, l, f, xsum[(m * M + l) * grid.num_freq_chunks + f] / static_cast<double>(count[m]));
            }
        }
    }
    Matrix gsum(M, grid.num_blocks(), 0.0), nsum(M, grid.num_blocks(), 0.0);
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (!clients[i].association) continue;
        const std::size_t m = *clients[i].association;
        for (std::size_t z = 0; z < grid.num_blocks(); ++z) {
            gsum(m, z) += gains.static_gain(i, m, grid.chunk_of(z));
            nsum(m, z) += clients[i].noise_w[z];
        }
    }
    for (std::size_t m = 0; m < M; ++m) {
        if (count[m] == 0) continue;
        const double n = static_cast<double>(count[m]);
        for (std::size_t z = 0; z < grid.num_blocks(); ++z) {
            c.own_gain(m, z) = gsum(m, z) / n;
            c.noise(m, z) = nsum(m, z) / n;
        }
    }
    return c;
}

/// Re-weights station m's cell means by its scheduler's service fractions:
/// on block z each member counts in proportion to phi(j, z), so the model
/// describes the link actually served there. Cross gains are weighted per
/// chunk unless `weight_cross` is off. Blocks nobody was served on keep
/// their plain means.
inline void weight_cell_by_schedule(CellModel& c, const GainTensor& gains, std::span<const Client> clients,
                                    std::size_t m, std::span<const std::size_t> members, const Matrix& fractions,
                                    bool weight_cross = true) {
    const auto& grid = c.grid;
    const std::size_t M = c.num_stations(), F = grid.num_freq_chunks;
    if (members.empty() || fractions.rows() != members.size() || fractions.cols() != grid.num_blocks()) return;
    std::vector<double> chunk_weight(F, 0.0);
    std::vector<double> xsum(M * F, 0.0);
    for (std::size_t z = 0; z < grid.num_blocks(); ++z) {
        const std::size_t f = grid.chunk_of(z);
        double tot = 0.0, g = 0.0, n = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j) {
            const double phi = fractions(j, z);
            if (!(phi > 0.0)) continue;
            const std::size_t i = members[j];
            tot += phi;
            g += phi * gains.static_gain(i, m, f);
            n += phi * clients[i].noise_w[z];
            for (std::size_t l = 0; l < M; ++l)
                if (l != m) xsum[l * F + f] += phi * gains.static_gain(i, l, f);
        }
        if (!(tot > 0.0)) continue;
        c.own_gain(m, z) = g / tot;
        c.noise(m, z) = n / tot;
        chunk_weight[f] += tot;
    }
    for (std::size_t f = 0; f < F && weight_cross; ++f) {
        if (!(chunk_weight[f] > 0.0)) continue;
        for (std::size_t l = 0; l < M; ++l)
            if (l != m) c.set_cross_gain(m, l, f, xsum[l * F + f] / chunk_weight[f]);
    }
}

inline double cell_interference_plus_noise(const CellModel& c, const PowerAllocation& alloc, std::size_t m,
                                           std::size_t z) {
    double d = c.noise(m, z);
    for (std::size_t l = 0; l < c.num_stations(); ++l) {
        if (l != m) d += c.cross_gain(m, l, z) * alloc(l, z);
    }
    return d;
}

/// Representative-link SINR of cell m on block z.
inline double cell_sinr(const CellModel& c, const PowerAllocation& alloc, std::size_t m, std::size_t z) {
    return c.own_gain(m, z) * alloc(m, z) / cell_interference_plus_noise(c, alloc, m, z);
}

/// sum_z ln(1 + SINR_mz), i.e. the cell rate divided by B.
inline double cell_log_rate(const CellModel& c, const PowerAllocation& alloc, std::size_t m) {
    double s = 0.0;
    for (std::size_t z = 0; z < c.grid.num_blocks(); ++z) s += std::log1p(cell_sinr(c, alloc, m, z));
    return s;
}

inline double utility(const CellModel& c, const PowerAllocation& alloc) {
    const double B = c.grid.block_bandwidth_hz;
    const double Q = static_cast<double>(c.grid.num_slots);
    double u = 0.0;
    for (std::size_t m = 0; m < c.num_stations(); ++m) {
        if (c.active[m] && c.weight[m] > 0.0) {
            const double s = cell_log_rate(c, alloc, m);
            if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
            u += c.weight[m] * std::log(B * s);
        }
        for (double p : alloc.row(m)) u -= c.price[m] * p / Q;
    }
    return u;
}

/// What station o tells station m. All per-block vectors have |Z| entries.
struct NeighborReport {
    std::size_t from = 0;
    double weight = 0.0;                     // w^o
    std::vector<double> gain_to_receiver;    // G_{o,m,z}
    std::vector<double> interference_noise;  // N_{o,z} + sum_{l != o} G_{o,l,z} P_{l,z}
    std::vector<double> signal;              // G_{o,o,z} P_{o,z}
    double total_log_rate = 0.0;             // sum_y ln(1 + SINR_{o,y})

    std::size_t value_count() const noexcept {
        return 2 + gain_to_receiver.size() + interference_noise.size() + signal.size();
    }
};

inline NeighborReport make_report(const CellModel& c, const PowerAllocation& alloc, std::size_t from,
                                  std::size_t to) {
    const std::size_t Z = c.grid.num_blocks();
    NeighborReport r;
    r.from = from;
    r.weight = c.active[from] ? c.weight[from] : 0.0;
    r.gain_to_receiver.resize(Z);
    r.interference_noise.resize(Z);
    r.signal.resize(Z);
    for (std::size_t z = 0; z < Z; ++z) {
        r.gain_to_receiver[z] = c.cross_gain(from, to, z);
        r.interference_noise[z] = cell_interference_plus_noise(c, alloc, from, z);
        r.signal[z] = c.own_gain(from, z) * alloc(from, z);
        r.total_log_rate += std::log1p(r.signal[z] / r.interference_noise[z]);
    }
    return r;
}

/// Stations o != m whose gain from m reaches `threshold` on some chunk.
inline std::vector<std::size_t> prune_neighbors(const CellModel& c, std::size_t m, double threshold) {
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o < c.num_stations(); ++o) {
        if (o == m) continue;
        double best = 0.0;
        for (std::size_t f = 0; f < c.grid.num_freq_chunks; ++f)
            best = std::max(best, c.cross[(o * c.num_stations() + m) * c.grid.num_freq_chunks + f]);
        if (best >= threshold) out.push_back(o);
    }
    return out;
}

struct GradientRow {
    std::vector<double> value;                // dU/dP_{m,z} for every block
    std::vector<std::size_t> starved_cells;   // cells whose log-rate was floored
};

/// dU/dP_{m,z} for all blocks of m from m's own state and its neighbours'
/// reports. Cells missing from `reports` are treated as pruned.
inline GradientRow gradient_row(const CellModel& c, const PowerAllocation& alloc, std::size_t m,
                                std::span<const NeighborReport> reports) {
    const std::size_t Z = c.grid.num_blocks();
    const double Q = static_cast<double>(c.grid.num_slots);
    GradientRow g;
    g.value.assign(Z, -c.price[m] / Q);

    if (c.weight[m] > 0.0) {
        double s = cell_log_rate(c, alloc, m);
        if (!(s > kLogRateFloor)) {
            g.starved_cells.push_back(m);
            s = kLogRateFloor;
        }
        const double coef = c.weight[m] / s;
        for (std::size_t z = 0; z < Z; ++z) {
            const double d = cell_interference_plus_noise(c, alloc, m, z) + c.own_gain(m, z) * alloc(m, z);
            if (d < kDenominatorFloor) continue;
            g.value[z] += coef * c.own_gain(m, z) / d;
        }
    }

    for (const auto& r : reports) {
        if (r.from == m || !(r.weight > 0.0)) continue;
        double s = r.total_log_rate;
        if (!(s > kLogRateFloor)) {
            g.starved_cells.push_back(r.from);
            s = kLogRateFloor;
        }
        const double coef = r.weight / s;
        for (std::size_t z = 0; z < Z; ++z) {
            const double inn = r.interference_noise[z];
            if (inn < kDenominatorFloor) continue;
            const double gm = r.gain_to_receiver[z];
            g.value[z] += coef * (gm / (inn + r.signal[z]) - gm / inn);
        }
    }
    return g;
}

/// Gradient for station m with neighbours pruned at `threshold`.
inline GradientRow gradient_row(const CellModel& c, const PowerAllocation& alloc, std::size_t m,
                                double threshold = 0.0) {
    std::vector<NeighborReport> reports;
    for (std::size_t o : prune_neighbors(c, m, threshold)) {
        if (c.active[o] && c.weight[o] > 0.0) reports.push_back(make_report(c, alloc, o, m));
    }
    return gradient_row(c, alloc, m, reports);
}

inline double grad(const CellModel& c, const PowerAllocation& alloc, std::size_t m, std::size_t z,
                   double threshold = 0.0) {
    return gradient_row(c, alloc, m, threshold).value.at(z);
}

struct PowerCtlParams {
    /// Step size. In normalized mode the largest per-block move is
    /// step * W_m / |F|; otherwise the move is step * dU/dP.
    double step = 0.1;
    bool normalized = true;
    double decay_updates = 0.0;  // update n uses step / sqrt(1 + (n-1)/decay); 0 keeps the step fixed
    CrossGainSource cross_gain = CrossGainSource::client_mean;
    bool schedule_weighted = true;  // cell means weighted by service fractions
    double neighbor_threshold = loss_db_to_gain(path_loss_db(1.5));
    std::size_t update_period = 10;  // frames

    void validate() const {
        if (!(step > 0.0)) throw std::invalid_argument("power-control step must be positive");
        if (!(decay_updates >= 0.0)) throw std::invalid_argument("power-step decay must be non-negative");
        if (!(neighbor_threshold >= 0.0)) throw std::invalid_argument("neighbour threshold must be non-negative");
        if (update_period == 0) throw std::invalid_argument("power update period must be at least one frame");
    }
};

/// Projected update of one station's row: P' = [P + delta]^+ and, per slot,
/// a rescale onto the budget when the slot total exceeds W_m. `iteration`
/// counts updates from 1 and only matters with a decaying step.
inline std::vector<double> power_update(std::span<const double> row, std::span<const double> gradient,
                                        const PowerCtlParams& params, double budget, const ResourceBlockGrid& grid,
                                        std::size_t iteration = 1) {
    const std::size_t Z = grid.num_blocks();
    if (row.size() != Z || gradient.size() != Z) throw std::invalid_argument("power row size mismatch");
    double step = params.step;
    if (params.decay_updates > 0.0)
        step /= std::sqrt(1.0 + static_cast<double>(std::max<std::size_t>(iteration, 1) - 1) / params.decay_updates);
    double scale = step;
    if (params.normalized) {
        // Largest move among blocks that can move: a block at zero power with
        // negative gradient stays put and does not set the scale.
        double gmax = 0.0;
        for (std::size_t z = 0; z < Z; ++z)
            if (row[z] > 0.0 || gradient[z] > 0.0) gmax = std::max(gmax, std::abs(gradient[z]));
        scale = gmax > 0.0 ? step * budget / static_cast<double>(grid.num_freq_chunks) / gmax : 0.0;
    }
    std::vector<double> out(Z);
    for (std::size_t z = 0; z < Z; ++z) out[z] = std::max(row[z] + scale * gradient[z], 0.0);
    for (std::size_t q = 0; q < grid.num_slots; ++q) {
        double sum = 0.0;
        for (std::size_t f = 0; f < grid.num_freq_chunks; ++f) sum += out[grid.block_index(f, q)];
        if (sum > budget) {
            const double k = budget / sum;
            for (std::size_t f = 0; f < grid.num_freq_chunks; ++f) out[grid.block_index(f, q)] *= k;
        }
    }
    return out;
}

/// Every active station spreads W_m evenly over the chunks of each slot.
inline PowerAllocation equal_power(std::span<const BaseStation> stations, const ResourceBlockGrid& grid) {
    PowerAllocation a(stations.size(), grid.num_blocks());
    for (std::size_t m = 0; m < stations.size(); ++m) {
        if (!stations[m].active()) continue;
        const double p = stations[m].power_budget_w / static_cast<double>(grid.num_freq_chunks);
        for (double& v : a.row(m)) v = p;
    }
    return a;
}

}  // namespace hetnet

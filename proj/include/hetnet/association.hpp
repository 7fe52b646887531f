#pragma once

// Client-side station selection. A client estimates the throughput it would
// get from each candidate station, either by replaying the station's PF
// scheduler with itself added (exact) or from the station's advertised
// per-block averages (approximate, linear after a sort), then picks the best.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hetnet/channel.hpp"
#include "hetnet/matrix.hpp"
#include "hetnet/netmodel.hpp"
#include "hetnet/scheduler.hpp"

namespace hetnet {

/// What station m broadcasts: its total client weight and, per block, the
/// throughput its scheduler currently delivers there.
struct CellAdvertisement {
    std::size_t station = 0;
    double weight = 0.0;          // w^m
    std::vector<double> hbar;     // sum_j phi_{j,m,z} H_{j,m,z}

    std::size_t value_count() const noexcept { return hbar.size() + 1; }
    double total_rate() const noexcept { return std::accumulate(hbar.begin(), hbar.end(), 0.0); }
};

/// Builds the advertisement of a station from its members' weights, their
/// scheduling fractions (rows of `fractions`) and rates (rows of `rates`).
inline CellAdvertisement make_advertisement(std::size_t station, std::span<const double> weights,
                                            const Matrix& fractions, const Matrix& rates) {
    if (fractions.rows() != weights.size() || rates.rows() != weights.size() ||
        fractions.cols() != rates.cols()) {
        throw std::invalid_argument("advertisement inputs disagree in shape");
    }
    CellAdvertisement ad;
    ad.station = station;
    ad.weight = std::accumulate(weights.begin(), weights.end(), 0.0);
    ad.hbar.assign(rates.cols(), 0.0);
    for (std::size_t j = 0; j < weights.size(); ++j)
        for (std::size_t z = 0; z < rates.cols(); ++z) ad.hbar[z] += fractions(j, z) * rates(j, z);
    return ad;
}

struct AssociationReport {
    std::size_t client = 0;
    std::size_t station = 0;
    double own_rate = 0.0;                  // r_hat for the chosen station
    std::optional<std::size_t> runner_up;
    double runner_up_rate = 0.0;            // 0 when there is no other candidate
};

/// Default per-block rate a station must reach on some block to be a candidate.
inline const double kCandidateRateThreshold = kbps_to_nats(1.0);

/// Active stations whose best block rate for client i reaches `threshold`.
inline std::vector<std::size_t> candidate_set(const LinkRates& rates, std::size_t client,
                                              std::span<const BaseStation> stations,
                                              double threshold = kCandidateRateThreshold) {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < stations.size(); ++m) {
        if (!stations[m].active()) continue;
        const auto h = rates.rates(client, m);
        const double best = h.empty() ? 0.0 : *std::max_element(h.begin(), h.end());
        if (best >= threshold && best > 0.0) out.push_back(m);
    }
    return out;
}

/// Replays online PF on the cell with the client appended after the
/// incumbents; returns the client's throughput after `frames` frames.
inline double exact_estimate(double weight, std::span<const double> own_rates, std::span<const double> incumbent_weights,
                             const Matrix& incumbent_rates, std::uint64_t frames = 2000) {
    const std::size_t n = incumbent_weights.size();
    const std::size_t Z = own_rates.size();
    if (incumbent_rates.rows() != n || (n > 0 && incumbent_rates.cols() != Z)) {
        throw std::invalid_argument("incumbent rates do not match the cell");
    }
    std::vector<double> w(incumbent_weights.begin(), incumbent_weights.end());
    w.push_back(weight);
    Matrix H(n + 1, Z);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t z = 0; z < Z; ++z) H(j, z) = incumbent_rates(j, z);
    for (std::size_t z = 0; z < Z; ++z) H(n, z) = own_rates[z];
    return simulate_pf(w, H, frames).throughput()[n];
}

struct ApproximateEstimate {
    double rate = 0.0;
    std::vector<double> fractions;   // phi_hat per block, in the caller's block order
    std::size_t operations = 0;      // loop steps after the sort
};

namespace detail {

// a/b with 0/anything = 0 and positive/0 = +inf.
inline double guarded_ratio(double num, double den) noexcept {
    if (num == 0.0) return 0.0;
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    return num / den;
}

}  // namespace detail

/// Approximate estimator. `others_weight` is w^m_{-i}; `ad.hbar` must
/// exclude the client itself.
inline ApproximateEstimate approximate_estimate(double weight, std::span<const double> own_rates,
                                                double others_weight, std::span<const double> hbar) {
    const std::size_t Z = own_rates.size();
    if (hbar.size() != Z) throw std::invalid_argument("advertisement size does not match the grid");
    ApproximateEstimate out;
    out.fractions.assign(Z, 0.0);

    std::vector<std::size_t> order(Z);
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t z) { return detail::guarded_ratio(hbar[z], own_rates[z]); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

    double rhat = 0.0;
    double rbar = std::accumulate(hbar.begin(), hbar.end(), 0.0);
    for (std::size_t z : order) {
        ++out.operations;
        const double h = own_rates[z], hb = hbar[z];
        const double lhs = detail::guarded_ratio(weight * h, rhat + h);
        const double rhs = detail::guarded_ratio(others_weight * hb, rbar - hb);
        if (lhs > rhs) {
            out.fractions[z] = 1.0;
            rhat += h;
            rbar -= hb;
            continue;
        }
        const double lhs2 = detail::guarded_ratio(weight * h, rhat);
        const double rhs2 = detail::guarded_ratio(others_weight * hb, rbar);
        if (lhs2 < rhs2) break;
        const double den = (others_weight + weight) * h * hb;
        double phi = den > 0.0 ? (rbar * weight * h - rhat * others_weight * hb) / den : 0.0;
        phi = std::clamp(phi, 0.0, 1.0);
        out.fractions[z] = phi;
        rhat += phi * h;
        rbar -= phi * hb;
        break;
    }
    out.rate = rhat;
    return out;
}

inline ApproximateEstimate approximate_estimate(double weight, std::span<const double> own_rates,
                                                const CellAdvertisement& ad) {
    return approximate_estimate(weight, own_rates, ad.weight, ad.hbar);
}

struct StationEstimate {
    std::size_t station = 0;
    double rate = 0.0;
};

/// Argmax of the estimates (ties to the lowest station id) plus the runner-up.
inline AssociationReport choose_station(std::size_t client, std::span<const StationEstimate> estimates) {
    if (estimates.empty()) throw std::invalid_argument("client has no candidate station");
    auto better = [](const StationEstimate& a, const StationEstimate& b) {
        return a.rate > b.rate || (a.rate == b.rate && a.station < b.station);
    };
    const StationEstimate* best = &estimates[0];
    for (const auto& e : estimates)
        if (better(e, *best)) best = &e;
    AssociationReport r;
    r.client = client;
    r.station = best->station;
    r.own_rate = best->rate;
    const StationEstimate* second = nullptr;
    for (const auto& e : estimates) {
        if (&e == best) continue;
        if (!second || better(e, *second)) second = &e;
    }
    if (second) {
        r.runner_up = second->station;
        r.runner_up_rate = second->rate;
    }
    return r;
}

}  // namespace hetnet

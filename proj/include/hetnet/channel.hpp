#pragma once

// Channel generation: distance path loss, per-chunk log-normal shadowing,
// Doppler-correlated Rayleigh fading, and the SINR / Shannon-rate layer on
// top of the resulting gains.
//
// Rates are carried in nats/s internally; conversion to kbit/s happens only
// at the reporting boundary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "hetnet/netmodel.hpp"

namespace hetnet {

/// SplitMix64 as a UniformRandomBitGenerator. Cheap to construct, which
/// makes it suitable for keyed per-link streams.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Derives an independent stream seed from a master seed and an index tuple.
inline std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept {
    SplitMix64 g(seed);
    std::uint64_t h = g();
    for (std::uint64_t p : parts) {
        SplitMix64 step(h ^ (p + 0x632be59bd9b4e019ULL));
        h = step();
    }
    return h;
}

namespace stream_tag {
inline constexpr std::uint64_t client_shadowing = 1;
inline constexpr std::uint64_t station_shadowing = 2;
inline constexpr std::uint64_t fast_fading = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t placement = 5;
}  // namespace stream_tag

inline constexpr double kMinDistanceKm = 1e-3;  // 1 m clamp

/// Path loss in dB for distance in km, without shadowing or fading.
inline double path_loss_db(double d_km) noexcept {
    if (!(d_km >= kMinDistanceKm)) d_km = kMinDistanceKm;
    return 128.1 + 37.6 * std::log10(d_km);
}

inline double loss_db_to_gain(double loss_db) noexcept { return std::pow(10.0, -loss_db / 10.0); }

/// Zero-mean Gaussian shadowing in dB, keyed on (client, station, chunk).
/// Station-to-station links use their own keyed stream, symmetric in the pair.
class Shadowing {
public:
    explicit Shadowing(std::uint64_t seed, double sigma_db = 8.0) : seed_(seed), sigma_db_(sigma_db) {}

    double client_link_db(std::size_t client, std::size_t station, std::size_t chunk) const {
        return draw(stream_key(seed_, {stream_tag::client_shadowing, client, station, chunk}));
    }

    double station_link_db(std::size_t a, std::size_t b, std::size_t chunk) const {
        const auto lo = std::min(a, b), hi = std::max(a, b);
        return draw(stream_key(seed_, {stream_tag::station_shadowing, lo, hi, chunk}));
    }

    double sigma_db() const noexcept { return sigma_db_; }

private:
    double draw(std::uint64_t key) const {
        SplitMix64 g(key);
        std::normal_distribution<double> n(0.0, sigma_db_);
        return n(g);
    }

    std::uint64_t seed_;
    double sigma_db_;
};

/// Rayleigh fast fading with a Clarke/Jakes Doppler spectrum, generated by
/// the Zheng-Xiao sum-of-sinusoids model. Each (client, station, chunk) link
/// owns an independent set of path angles and phases; the envelope is
/// evaluated at t = frame * frame_duration and held for the whole frame.
class RayleighFading {
public:
    RayleighFading(std::uint64_t seed, double doppler_hz = 5.0, double frame_duration_s = 10e-3,
                   int paths = 8)
        : seed_(seed), doppler_hz_(doppler_hz), frame_duration_s_(frame_duration_s), paths_(paths) {
        if (paths_ <= 0) throw std::invalid_argument("fading needs at least one path");
    }

    /// |Y|^2 for one link at one frame; unit mean power.
    double power_factor(std::size_t client, std::size_t station, std::size_t chunk,
                        std::uint64_t frame) const {
        SplitMix64 g(stream_key(seed_, {stream_tag::fast_fading, client, station, chunk}));
        constexpr double two_pi = 2.0 * std::numbers::pi;
        auto angle = [&] { return two_pi * g.uniform01() - std::numbers::pi; };
        const double theta = angle();
        const double phi = angle();
        const double wd_t = two_pi * doppler_hz_ * frame_duration_s_ * static_cast<double>(frame);
        const double m = static_cast<double>(paths_);
        double xc = 0.0, xs = 0.0;
        for (int n = 1; n <= paths_; ++n) {
            const double psi = angle();
            const double alpha = (two_pi * n - std::numbers::pi + theta) / (4.0 * m);
            xc += std::cos(psi) * std::cos(wd_t * std::cos(alpha) + phi);
            xs += std::sin(psi) * std::cos(wd_t * std::sin(alpha) + phi);
        }
        const double scale = 2.0 / m;
        return scale * (xc * xc + xs * xs);
    }

    double doppler_hz() const noexcept { return doppler_hz_; }

private:
    std::uint64_t seed_;
    double doppler_hz_;
    double frame_duration_s_;
    int paths_;
};

/// Thermal noise for one (client, block), uniform in [3.5, 4.5] x 1e-15 W.
inline double sample_noise(std::uint64_t seed, std::size_t client, std::size_t block) {
    SplitMix64 g(stream_key(seed, {stream_tag::noise, client, block}));
    return kNoiseMinW + (kNoiseMaxW - kNoiseMinW) * g.uniform01();
}

enum class ChannelVariant { slow, fast };

struct ChannelParams {
    double shadowing_sigma_db = 8.0;
    double doppler_hz = 5.0;
    int fading_paths = 8;
    bool fast_fading = true;
};

/// Channel gains G(i, m, z) = static(i, m, chunk(z)) * fast(i, m, chunk(z), frame),
/// plus the station-to-station gains used by power control.
class GainTensor {
public:
    GainTensor() = default;

    static GainTensor build(std::span<const BaseStation> stations, std::span<const Client> clients,
                            const ResourceBlockGrid& grid, std::uint64_t seed,
                            const ChannelParams& params = {}) {
        GainTensor t;
        t.clients_ = clients.size();
        t.stations_ = stations.size();
        t.chunks_ = grid.num_freq_chunks;
        t.static_.assign(t.clients_ * t.stations_ * t.chunks_, 0.0);
        t.station_.assign(t.stations_ * t.stations_ * t.chunks_, 0.0);
        const Shadowing shadow(seed, params.shadowing_sigma_db);
        for (std::size_t i = 0; i < t.clients_; ++i) {
            for (std::size_t m = 0; m < t.stations_; ++m) {
                const double pl = path_loss_db(distance_m(clients[i].position, stations[m].position) / 1000.0);
                for (std::size_t f = 0; f < t.chunks_; ++f) {
                    t.static_[t.link(i, m, f)] = loss_db_to_gain(pl + shadow.client_link_db(i, m, f));
                }
            }
        }
        for (std::size_t m = 0; m < t.stations_; ++m) {
            for (std::size_t l = 0; l < t.stations_; ++l) {
                if (l == m) continue;
                const double pl = path_loss_db(distance_m(stations[m].position, stations[l].position) / 1000.0);
                for (std::size_t f = 0; f < t.chunks_; ++f) {
                    t.station_[(m * t.stations_ + l) * t.chunks_ + f] =
                        loss_db_to_gain(pl + shadow.station_link_db(m, l, f));
                }
            }
        }
        if (params.fast_fading) {
            t.fading_.emplace(seed, params.doppler_hz, grid.frame_duration_s, params.fading_paths);
        }
        return t;
    }

    std::size_t num_clients() const noexcept { return clients_; }
    std::size_t num_stations() const noexcept { return stations_; }
    std::size_t num_chunks() const noexcept { return chunks_; }
    bool has_fast_fading() const noexcept { return fading_.has_value(); }

    double static_gain(std::size_t i, std::size_t m, std::size_t f) const {
        check(i, m, f);
        return static_[link(i, m, f)];
    }

    /// Gain between two stations on a chunk; zero on the diagonal.
    double station_gain(std::size_t m, std::size_t l, std::size_t f) const {
        if (m >= stations_ || l >= stations_ || f >= chunks_) throw std::out_of_range("unknown station link");
        return station_[(m * stations_ + l) * chunks_ + f];
    }

    double fast_factor(std::size_t i, std::size_t m, std::size_t f, std::uint64_t frame) const {
        check(i, m, f);
        return fading_ ? fading_->power_factor(i, m, f, frame) : 1.0;
    }

    double gain(std::size_t i, std::size_t m, std::size_t f, std::uint64_t frame, ChannelVariant v) const {
        const double g = static_gain(i, m, f);
        return v == ChannelVariant::slow ? g : g * fast_factor(i, m, f, frame);
    }

    /// Overrides one static gain; used to build hand-crafted test channels.
    void set_static_gain(std::size_t i, std::size_t m, std::size_t f, double g) {
        check(i, m, f);
        static_[link(i, m, f)] = g;
    }

    void set_station_gain(std::size_t m, std::size_t l, std::size_t f, double g) {
        if (m >= stations_ || l >= stations_ || f >= chunks_) throw std::out_of_range("unknown station link");
        station_[(m * stations_ + l) * chunks_ + f] = g;
    }

    /// A tensor of the given shape with every static gain set to `g`.
    static GainTensor uniform(std::size_t clients, std::size_t stations, std::size_t chunks, double g) {
        GainTensor t;
        t.clients_ = clients;
        t.stations_ = stations;
        t.chunks_ = chunks;
        t.static_.assign(clients * stations * chunks, g);
        t.station_.assign(stations * stations * chunks, 0.0);
        return t;
    }

    void write_csv(std::ostream& os) const {
        os << "client,station,chunk,static_gain\n";
        os.precision(17);
        for (std::size_t i = 0; i < clients_; ++i)
            for (std::size_t m = 0; m < stations_; ++m)
                for (std::size_t f = 0; f < chunks_; ++f)
                    os << i << ',' << m << ',' << f << ',' << static_[link(i, m, f)] << '\n';
    }

    friend bool operator==(const GainTensor& a, const GainTensor& b) {
        return a.clients_ == b.clients_ && a.stations_ == b.stations_ && a.chunks_ == b.chunks_ &&
               a.static_ == b.static_ && a.station_ == b.station_;
    }

private:
    std::size_t link(std::size_t i, std::size_t m, std::size_t f) const noexcept {
        return (i * stations_ + m) * chunks_ + f;
    }
    void check(std::size_t i, std::size_t m, std::size_t f) const {
        if (i >= clients_ || m >= stations_ || f >= chunks_) throw std::out_of_range("unknown client link");
    }

    std::size_t clients_ = 0;
    std::size_t stations_ = 0;
    std::size_t chunks_ = 0;
    std::vector<double> static_;
    std::vector<double> station_;
    std::optional<RayleighFading> fading_;
};

/// Shannon rate B * ln(1 + sinr) in nats/s.
inline double shannon_rate(double bandwidth_hz, double sinr) noexcept {
    return bandwidth_hz * std::log1p(sinr);
}

inline double nats_to_kbps(double nats_per_s) noexcept {
    return nats_per_s / (std::numbers::ln2 * 1000.0);
}
inline double kbps_to_nats(double kbps) noexcept { return kbps * std::numbers::ln2 * 1000.0; }

/// Decomposed SINR of client i served by station m on block z.
struct SinrTerms {
    double signal = 0.0;
    double noise = 0.0;
    std::vector<double> interference;  // per station; zero for the server

    double total_interference() const noexcept {
        double s = 0.0;
        for (double v : interference) s += v;
        return s;
    }
    double sinr() const noexcept { return signal / (noise + total_interference()); }
};

inline SinrTerms sinr_terms(const GainTensor& gains, const Client& client, std::size_t i, std::size_t m,
                            std::size_t z, const PowerAllocation& alloc, const ResourceBlockGrid& grid,
                            ChannelVariant variant = ChannelVariant::slow, std::uint64_t frame = 0) {
    const std::size_t f = grid.chunk_of(z);
    SinrTerms t;
    t.noise = client.noise_w.at(z);
    t.signal = gains.gain(i, m, f, frame, variant) * alloc(m, z);
    t.interference.assign(gains.num_stations(), 0.0);
    for (std::size_t l = 0; l < gains.num_stations(); ++l) {
        if (l == m || alloc(l, z) == 0.0) continue;
        t.interference[l] = gains.gain(i, l, f, frame, variant) * alloc(l, z);
    }
    return t;
}

inline double sinr(const GainTensor& gains, const Client& client, std::size_t i, std::size_t m, std::size_t z,
                   const PowerAllocation& alloc, const ResourceBlockGrid& grid,
                   ChannelVariant variant = ChannelVariant::slow, std::uint64_t frame = 0) {
    return sinr_terms(gains, client, i, m, z, alloc, grid, variant, frame).sinr();
}

/// Rates H(i, m, z) for every client, station and block under one power
/// allocation. Computed from the total received power per (client, block) so
/// the cost is O(I * M * Z).
class LinkRates {
public:
    LinkRates() = default;
    LinkRates(std::size_t clients, std::size_t stations, std::size_t blocks, ChannelVariant v)
        : clients_(clients), stations_(stations), blocks_(blocks), variant_(v),
          h_(clients * stations * blocks, 0.0) {}

    double operator()(std::size_t i, std::size_t m, std::size_t z) const noexcept {
        return h_[(i * stations_ + m) * blocks_ + z];
    }
    double& operator()(std::size_t i, std::size_t m, std::size_t z) noexcept {
        return h_[(i * stations_ + m) * blocks_ + z];
    }

    std::span<const double> rates(std::size_t i, std::size_t m) const noexcept {
        return {h_.data() + (i * stations_ + m) * blocks_, blocks_};
    }

    std::size_t num_clients() const noexcept { return clients_; }
    std::size_t num_stations() const noexcept { return stations_; }
    std::size_t num_blocks() const noexcept { return blocks_; }
    ChannelVariant variant() const noexcept { return variant_; }

private:
    std::size_t clients_ = 0;
    std::size_t stations_ = 0;
    std::size_t blocks_ = 0;
    ChannelVariant variant_ = ChannelVariant::slow;
    std::vector<double> h_;
};

inline LinkRates compute_link_rates(const GainTensor& gains, std::span<const Client> clients,
                                    const PowerAllocation& alloc, const ResourceBlockGrid& grid,
                                    ChannelVariant variant = ChannelVariant::slow, std::uint64_t frame = 0) {
    const std::size_t I = clients.size(), M = gains.num_stations(), Z = grid.num_blocks();
    LinkRates out(I, M, Z, variant);
    std::vector<double> g(M), s(M), prefix(M + 1), suffix(M + 1);
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t f = 0; f < grid.num_freq_chunks; ++f) {
            for (std::size_t m = 0; m < M; ++m) g[m] = gains.gain(i, m, f, frame, variant);
            for (std::size_t q = 0; q < grid.num_slots; ++q) {
                const std::size_t z = grid.block_index(f, q);
                // Interference excluding m as prefix + suffix sums, which avoids
                // the cancellation of (total - own) when m dominates.
                prefix[0] = 0.0;
                for (std::size_t m = 0; m < M; ++m) {
                    s[m] = g[m] * alloc(m, z);
                    prefix[m + 1] = prefix[m] + s[m];
                }
                suffix[M] = 0.0;
                for (std::size_t m = M; m-- > 0;) suffix[m] = suffix[m + 1] + s[m];
                const double noise = clients[i].noise_w[z];
                for (std::size_t m = 0; m < M; ++m) {
                    if (s[m] == 0.0) continue;
                    out(i, m, z) = shannon_rate(grid.block_bandwidth_hz, s[m] / (noise + prefix[m] + suffix[m + 1]));
                }
            }
        }
    }
    return out;
}

}  // namespace hetnet

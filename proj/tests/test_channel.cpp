#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hetnet/channel.hpp"

using namespace hetnet;

TEST(PathLoss, KnownDistances) {
    EXPECT_NEAR(path_loss_db(1.0), 128.1, 1e-12);
    EXPECT_NEAR(path_loss_db(0.1), 90.5, 1e-12);
    EXPECT_NEAR(path_loss_db(0.05), 79.18, 0.005);
    EXPECT_DOUBLE_EQ(path_loss_db(0.0), path_loss_db(kMinDistanceKm));
    EXPECT_DOUBLE_EQ(path_loss_db(-3.0), path_loss_db(kMinDistanceKm));
    EXPECT_TRUE(std::isfinite(path_loss_db(0.0)));
}

TEST(Shadowing, MomentsAndDeterminism) {
    const Shadowing sh(42);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v = sh.client_link_db(static_cast<std::size_t>(k) / 50, k % 7, k % 50);
        s += v;
        s2 += v * v;
    }
    const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.1);
    EXPECT_NEAR(sd, 8.0, 0.1);
    EXPECT_EQ(sh.client_link_db(3, 1, 9), Shadowing(42).client_link_db(3, 1, 9));
    EXPECT_NE(sh.client_link_db(3, 1, 9), Shadowing(43).client_link_db(3, 1, 9));
    EXPECT_EQ(sh.station_link_db(2, 5, 1), sh.station_link_db(5, 2, 1));
}

TEST(Fading, UnitMeanPower) {
    const RayleighFading rf(7);
    double s = 0.0;
    int n = 0;
    for (std::size_t link = 0; link < 400; ++link)
        for (std::uint64_t frame = 0; frame < 500; frame += 2) {
            s += rf.power_factor(link, 0, link % 50, frame);
            ++n;
        }
    EXPECT_NEAR(s / n, 1.0, 0.02);
}

TEST(Fading, CorrelationDecaysWithLag) {
    const RayleighFading rf(9);
    auto corr = [&](std::uint64_t lag) {
        double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
        int n = 0;
        for (std::size_t link = 0; link < 300; ++link)
            for (std::uint64_t t = 0; t < 200; t += 5) {
                const double x = rf.power_factor(link, 1, 0, t), y = rf.power_factor(link, 1, 0, t + lag);
                sx += x; sy += y; sxy += x * y; sxx += x * x; syy += y * y;
                ++n;
            }
        const double cov = sxy / n - sx / n * sy / n;
        return cov / std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
    };
    EXPECT_NEAR(corr(0), 1.0, 1e-12);
    EXPECT_GT(corr(1), corr(10));
    EXPECT_GT(corr(1), 0.9);
}

TEST(Noise, WithinRange) {
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t z = 0; z < 100; ++z) {
            const double n = sample_noise(1, i, z);
            EXPECT_GE(n, kNoiseMinW);
            EXPECT_LE(n, kNoiseMaxW);
        }
}

namespace {

struct Tiny {
    ResourceBlockGrid grid{4, 2};
    std::vector<BaseStation> stations{BaseStation::make(0, StationKind::macro, {0, 0}),
                                      BaseStation::make(1, StationKind::micro, {300, 0})};
    std::vector<Client> clients;
    Tiny() {
        for (std::size_t i = 0; i < 3; ++i) {
            Client c;
            c.id = i;
            c.position = {50.0 + 100.0 * static_cast<double>(i), 20.0};
            c.noise_w.assign(grid.num_blocks(), 4e-15);
            clients.push_back(c);
        }
    }
};

}  // namespace

TEST(GainTensor, GainCompositionAndDeterminism) {
    Tiny t;
    const auto a = GainTensor::build(t.stations, t.clients, t.grid, 5);
    const auto b = GainTensor::build(t.stations, t.clients, t.grid, 5);
    EXPECT_TRUE(a == b);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t m = 0; m < 2; ++m)
            for (std::size_t f = 0; f < 4; ++f) {
                EXPECT_GT(a.static_gain(i, m, f), 0.0);
                EXPECT_EQ(a.gain(i, m, f, 17, ChannelVariant::slow), a.static_gain(i, m, f));
                EXPECT_DOUBLE_EQ(a.gain(i, m, f, 17, ChannelVariant::fast),
                                 a.static_gain(i, m, f) * a.fast_factor(i, m, f, 17));
            }
    EXPECT_THROW(a.static_gain(3, 0, 0), std::out_of_range);
    EXPECT_THROW(a.gain(0, 2, 0, 0, ChannelVariant::slow), std::out_of_range);
    EXPECT_EQ(a.station_gain(1, 1, 0), 0.0);
    EXPECT_GT(a.station_gain(0, 1, 2), 0.0);
}

TEST(GainTensor, NoShadowingGivesPathLossGain) {
    Tiny t;
    t.clients[0].position = {100, 0};
    ChannelParams p;
    p.shadowing_sigma_db = 0.0;
    p.fast_fading = false;
    const auto g = GainTensor::build(t.stations, t.clients, t.grid, 1, p);
    EXPECT_NEAR(g.static_gain(0, 0, 0) / 8.91e-10, 1.0, 1e-3);
    EXPECT_EQ(g.fast_factor(0, 0, 0, 3), 1.0);
}

TEST(GainTensor, CsvDump) {
    const auto g = GainTensor::uniform(1, 1, 2, 1e-9);
    std::ostringstream os;
    g.write_csv(os);
    const std::string out = os.str();
    EXPECT_EQ(out.substr(0, out.find('\n')), "client,station,chunk,static_gain");
    EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 3);
}

TEST(Sinr, ArithmeticAndInterference) {
    const ResourceBlockGrid grid{1, 1};
    auto g = GainTensor::uniform(1, 2, 1, 1e-12);
    Client c;
    c.noise_w = {4e-15};
    PowerAllocation a(2, 1);
    a(0, 0) = 2.0;
    EXPECT_NEAR(sinr(g, c, 0, 0, 0, a, grid), 500.0, 1e-9);
    const double before = sinr(g, c, 0, 0, 0, a, grid);
    a(1, 0) = 0.001;
    const auto terms = sinr_terms(g, c, 0, 0, 0, a, grid);
    EXPECT_LT(terms.sinr(), before);
    EXPECT_NEAR(terms.sinr(), terms.signal / (terms.noise + terms.interference[1]), 1e-12 * terms.sinr());
    EXPECT_EQ(terms.interference[0], 0.0);
    a(0, 0) = 0.0;
    EXPECT_EQ(sinr(g, c, 0, 0, 0, a, grid), 0.0);
}

TEST(Shannon, RatesAndConversion) {
    EXPECT_EQ(shannon_rate(180e3, 0.0), 0.0);
    EXPECT_NEAR(shannon_rate(180e3, 1.0), 124766.0, 1.0);
    EXPECT_NEAR(nats_to_kbps(shannon_rate(180e3, 1.0)), 180.0, 1e-9);
    const double a = shannon_rate(1, 1), b = shannon_rate(1, 2), c = shannon_rate(1, 3);
    EXPECT_LT(a, b);
    EXPECT_LT(b, c);
    EXPECT_GT(b - a, c - b);
    for (double k : {0.5, 180.0, 12345.678}) EXPECT_NEAR(nats_to_kbps(kbps_to_nats(k)), k, 1e-12 * k);
}

TEST(LinkRates, MatchesPerLinkSinr) {
    Tiny t;
    const auto g = GainTensor::build(t.stations, t.clients, t.grid, 3);
    PowerAllocation a(2, t.grid.num_blocks());
    for (std::size_t z = 0; z < t.grid.num_blocks(); ++z) {
        a(0, z) = 1.0 + static_cast<double>(z);
        a(1, z) = z % 3 == 0 ? 0.0 : 0.3;
    }
    for (auto v : {ChannelVariant::slow, ChannelVariant::fast}) {
        const auto r = compute_link_rates(g, t.clients, a, t.grid, v, 11);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t m = 0; m < 2; ++m)
                for (std::size_t z = 0; z < t.grid.num_blocks(); ++z) {
                    const double want = shannon_rate(t.grid.block_bandwidth_hz,
                                                     sinr(g, t.clients[i], i, m, z, a, t.grid, v, 11));
                    EXPECT_NEAR(r(i, m, z), want, 1e-9 * want);
                    EXPECT_EQ(r(i, m, z) == 0.0, a(m, z) == 0.0);
                }
    }
}

#include <gtest/gtest.h>

#include <set>

#include "hetnet/netmodel.hpp"

using namespace hetnet;

TEST(Grid, BlockIndexBasics) {
    const ResourceBlockGrid g;
    EXPECT_EQ(g.num_blocks(), 1000u);
    EXPECT_EQ(g.block_index(0, 0), 0u);
    EXPECT_NE(g.block_index(0, 1), g.block_index(1, 0));
    EXPECT_EQ(g.block_index(49, 19), 999u);
    EXPECT_THROW(g.block_index(50, 0), std::out_of_range);
    EXPECT_THROW(g.block_index(0, 20), std::out_of_range);
    EXPECT_THROW(g.block_coords(1000), std::out_of_range);
}

TEST(Grid, Bijection) {
    const ResourceBlockGrid g;
    std::set<std::size_t> seen;
    std::size_t max_z = 0;
    for (std::size_t q = 0; q < g.num_slots; ++q) {
        for (std::size_t f = 0; f < g.num_freq_chunks; ++f) {
            const auto z = g.block_index(f, q);
            seen.insert(z);
            max_z = std::max(max_z, z);
            const auto [f2, q2] = g.block_coords(z);
            EXPECT_EQ(f2, f);
            EXPECT_EQ(q2, q);
            EXPECT_EQ(g.chunk_of(z), f);
            EXPECT_EQ(g.slot_of(z), q);
        }
    }
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(max_z, 999u);
    for (std::size_t z = 0; z < g.num_blocks(); ++z) {
        const auto [f, q] = g.block_coords(z);
        EXPECT_EQ(g.block_index(f, q), z);
    }
}

TEST(Station, DefaultsAndValidation) {
    const auto macro = BaseStation::make(0, StationKind::macro, {0, 0});
    const auto micro = BaseStation::make(1, StationKind::micro, {1, 1}, 0.5);
    EXPECT_DOUBLE_EQ(macro.power_budget_w, 20.0);
    EXPECT_DOUBLE_EQ(macro.operation_power_w, 55.0);
    EXPECT_DOUBLE_EQ(micro.power_budget_w, 6.3);
    EXPECT_DOUBLE_EQ(micro.operation_power_w, 17.0);
    EXPECT_DOUBLE_EQ(micro.energy_price, 0.5);
    EXPECT_TRUE(macro.active());
    auto bad = macro;
    bad.power_budget_w = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = macro;
    bad.energy_price = -1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    EXPECT_EQ(parse_station_kind("micro"), StationKind::micro);
    EXPECT_THROW(parse_station_kind("pico"), std::invalid_argument);
}

TEST(ValidatePower, ZeroAllocationIsFeasible) {
    const ResourceBlockGrid g;
    std::vector<BaseStation> st{BaseStation::make(0, StationKind::macro, {0, 0})};
    const PowerAllocation a(1, g.num_blocks());
    const auto r = validate_power(a, st, g);
    EXPECT_TRUE(r.ok());
    EXPECT_DOUBLE_EQ(r.slack(0, 0), -20.0);
}

TEST(ValidatePower, UniformMacroSlotHasZeroSlack) {
    const ResourceBlockGrid g;
    std::vector<BaseStation> st{BaseStation::make(0, StationKind::macro, {0, 0})};
    PowerAllocation a(1, g.num_blocks());
    for (std::size_t f = 0; f < g.num_freq_chunks; ++f) a(0, g.block_index(f, 3)) = 20.0 / 50.0;
    const auto r = validate_power(a, st, g);
    EXPECT_TRUE(r.ok());
    EXPECT_NEAR(r.slack(0, 3), 0.0, 1e-12);
}

TEST(ValidatePower, ReportsNegativeEntryAndOverBudget) {
    const ResourceBlockGrid g;
    std::vector<BaseStation> st{BaseStation::make(0, StationKind::macro, {0, 0}),
                                BaseStation::make(1, StationKind::micro, {0, 0})};
    PowerAllocation a(2, g.num_blocks());
    a(1, 17) = -0.1;
    for (std::size_t f = 0; f < g.num_freq_chunks; ++f) a(0, g.block_index(f, 2)) = 0.5;
    const auto r = validate_power(a, st, g);
    ASSERT_EQ(r.violations.size(), 2u);
    bool neg = false, over = false;
    for (const auto& v : r.violations) {
        if (v.kind == PowerViolation::Kind::negative_entry) {
            neg = true;
            EXPECT_EQ(v.station, 1u);
            EXPECT_EQ(v.index, 17u);
        }
        if (v.kind == PowerViolation::Kind::budget_exceeded) {
            over = true;
            EXPECT_EQ(v.station, 0u);
            EXPECT_EQ(v.index, 2u);
            EXPECT_DOUBLE_EQ(v.value, 25.0);
        }
    }
    EXPECT_TRUE(neg && over);
}

TEST(ValidatePower, SleepingStationMustBeSilent) {
    const ResourceBlockGrid g;
    std::vector<BaseStation> st{BaseStation::make(0, StationKind::micro, {0, 0})};
    st[0].mode = Mode::sleep;
    PowerAllocation a(1, g.num_blocks());
    a(0, 5) = 0.01;
    const auto r = validate_power(a, st, g);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].kind, PowerViolation::Kind::sleeping_station_transmits);
    const PowerAllocation wrong(2, g.num_blocks());
    EXPECT_THROW(validate_power(wrong, st, g), std::invalid_argument);
}

TEST(PowerAllocation, AveragePowerDividesBySlots) {
    const ResourceBlockGrid g;
    PowerAllocation a(1, g.num_blocks());
    for (double& v : a.row(0)) v = 0.4;
    EXPECT_NEAR(a.average_power(0, g), 20.0, 1e-9);
}

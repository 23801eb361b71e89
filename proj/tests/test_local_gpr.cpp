#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "byzfed/errors.hpp"
#include "byzfed/harness/toy.hpp"
#include "byzfed/local_gpr.hpp"
#include "oracles.hpp"

using namespace byzfed;

namespace {

const Hyperparams kUnit{1.0, 1.0, {0.01}};

AgentState one_point(double z, double y, double noise = 0.01) {
    AgentState s(0, noise, 1);
    s.ingest({{z}, y, 1});
    return s;
}

} // namespace

TEST(LocalGpr, QueryAtStoredPoint) {
    const auto s = one_point(0.3, 2.0);
    const std::vector<double> q{0.3};
    const auto p = local_predict(s, q, kUnit);
    EXPECT_DOUBLE_EQ(p.mean, 2.0 / 1.01);
    EXPECT_NEAR(p.variance, 0.01 / 1.01, 1e-16);
    EXPECT_EQ(p.provenance, Provenance::local_honest);
}

TEST(LocalGpr, ClosedFormAtUnitDistance) {
    const auto s = one_point(0.0, 2.0);
    const std::vector<double> q{1.0};
    const auto p = local_predict(s, q, kUnit);
    EXPECT_NEAR(p.mean, 1.2010508113121454, 1e-14);
    EXPECT_NEAR(p.variance, 0.6357629295332254, 1e-14);
}

TEST(LocalGpr, EmptyStateIsAnError) {
    AgentState s(3, 0.01, 1);
    const std::vector<double> q{0.0};
    EXPECT_THROW(local_predict(s, q, kUnit), state_error);
    EXPECT_THROW(nearest(s, q), state_error);
}

TEST(LocalGpr, IngestValidation) {
    AgentState s(0, 0.01, 2);
    EXPECT_THROW(s.ingest({{1.0}, 0.0, 1}), std::invalid_argument);
    s.ingest({{1.0, 2.0}, 0.0, 1});
    EXPECT_THROW(s.ingest({{1.0, 2.0}, 0.0, 1}), std::invalid_argument);
    const auto grown = ingest(s, {{0.0, 0.0}, 1.0, 5});
    EXPECT_EQ(grown.size(), 2u);
    EXPECT_EQ(s.size(), 1u);
    EXPECT_THROW(AgentState(0, 0.0, 1), std::invalid_argument);
}

TEST(LocalGpr, NearestTieGoesToEarliestArrival) {
    AgentState s(0, 0.01, 1);
    s.ingest({{0.4}, 1.0, 1});
    s.ingest({{0.6}, 2.0, 2});
    s.ingest({{0.4}, 3.0, 3});
    const std::vector<double> q{0.5};
    const auto nn = nearest(s, q);
    EXPECT_EQ(nn.point->t, 1u);
    EXPECT_NEAR(nn.distance, 0.1, 1e-15);
}

TEST(LocalGpr, SinglePointMatchesFullGpr) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Hyperparams hp{0.5 + std::abs(u(rng)), 0.2 + std::abs(u(rng)), {}};
        const double noise = 0.01 + 0.1 * std::abs(u(rng));
        AgentState s(0, noise, 2);
        s.ingest({{u(rng), u(rng)}, u(rng), 1});
        const std::vector<double> q{u(rng), u(rng)};
        const auto nn = local_predict(s, q, hp);
        const auto full = full_gpr_predict(s.points(), q, hp, noise);
        EXPECT_NEAR(nn.mean, full.mean, 1e-12 * (1 + std::abs(full.mean)));
        EXPECT_NEAR(nn.variance, full.variance, 1e-12);
    }
}

TEST(LocalGpr, FullGprInterpolatesWithSmallNoise) {
    AgentState s(0, 1e-6, 1);
    for (int k = 0; k < 20; ++k) {
        const double z = k / 19.0;
        s.ingest({{z}, std::sin(6 * z), static_cast<std::uint64_t>(k + 1)});
    }
    const Hyperparams hp{1.0, 0.2, {}};
    for (const auto& p : s.points()) {
        const auto pr = full_gpr_predict(s.points(), p.z, hp, 1e-6);
        EXPECT_NEAR(pr.mean, p.y, 1e-3);
        EXPECT_LT(pr.variance, 1e-5);
    }
    EXPECT_THROW(full_gpr_predict(s.points(), s.points()[0].z, hp, 1e-6, 5), std::invalid_argument);
}

// Exact linear-scan equivalence, including heavy ties from a coarse lattice.
TEST(LocalGprProperty, NearestMatchesBruteForce) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> lattice(0, 20);
    std::uniform_int_distribution<int> size(1, 60);
    std::uniform_int_distribution<int> dim(1, 3);
    for (int trial = 0; trial < 2000; ++trial) {
        const int d = dim(rng);
        AgentState s(0, 0.01, static_cast<std::size_t>(d));
        std::vector<TrainingPoint> copy;
        const int m = size(rng);
        for (int k = 0; k < m; ++k) {
            TrainingPoint p{std::vector<double>(d), static_cast<double>(k), static_cast<std::uint64_t>(k + 1)};
            for (auto& x : p.z) x = lattice(rng) * 0.05;
            copy.push_back(p);
            s.ingest(p);
        }
        std::vector<double> q(d);
        for (auto& x : q) x = lattice(rng) * 0.05 + 0.025 * (trial % 2);
        const auto nn = nearest(s, q);
        EXPECT_EQ(nn.point->t, copy[oracle::nearest_index(copy, q)].t);
    }
}

TEST(LocalGprProperty, VarianceSandwich) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const Hyperparams hp{0.2 + 3 * u(rng), 0.02 + u(rng), {}};
        const double ev = 0.001 + u(rng);
        AgentState s(0, ev, 1);
        for (int k = 0; k < 5; ++k) {
            s.ingest({{u(rng)}, u(rng), static_cast<std::uint64_t>(k + 1)});
        }
        const std::vector<double> q{u(rng)};
        const double d = nearest(s, q).distance;
        const auto p = local_predict(s, q, hp);
        const double kd = kappa(d, hp);
        EXPECT_GE(p.variance, hp.sigma_f2 * ev / (hp.sigma_f2 + ev) * (1 - 1e-14));
        EXPECT_LE(p.variance, (hp.sigma_f2 - kd * kd / (hp.sigma_f2 + ev)) * (1 + 1e-14));
    }
}

TEST(LocalGprProperty, MeanLinearInTarget) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const double z = u(rng);
        const double y = 10 * u(rng);
        const std::vector<double> q{u(rng)};
        const auto a = local_predict(one_point(z, y), q, kUnit);
        const auto b = local_predict(one_point(z, 2 * y), q, kUnit);
        EXPECT_DOUBLE_EQ(b.mean, 2 * a.mean);
        EXPECT_EQ(b.variance, a.variance);
    }
}

TEST(Dispersion, Examples) {
    const auto grid = uniform_grid_1d(1001);
    AgentState s(0, 0.01, 1);
    s.ingest({{0.0}, 0.0, 1});
    EXPECT_DOUBLE_EQ(dispersion(s, grid), 1.0);
    s.ingest({{0.5}, 0.0, 2});
    s.ingest({{1.0}, 0.0, 3});
    EXPECT_NEAR(dispersion(s, grid), 0.25, 1e-12);

    const auto small = uniform_grid_1d(5);
    AgentState full(1, 0.01, 1);
    for (std::size_t k = 0; k < small.size(); ++k) {
        full.ingest({small[k], 0.0, k + 1});
    }
    EXPECT_EQ(dispersion(full, small), 0.0);
}

TEST(DispersionProperty, TrackerMatchesBruteForceAndNeverIncreases) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto grid = uniform_grid_1d(400);
    for (int trial = 0; trial < 10; ++trial) {
        AgentState s(0, 0.01, 1);
        DispersionTracker tracker(grid);
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 80; ++k) {
            const std::vector<double> z{u(rng)};
            s.ingest({z, 0.0, static_cast<std::uint64_t>(k + 1)});
            tracker.observe(z);
            const double d = dispersion(s, grid);
            EXPECT_EQ(tracker.value(), d);
            EXPECT_LE(d, prev);
            prev = d;
        }
    }
}

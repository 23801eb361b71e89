#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "byzfed/byzfed.hpp"

using namespace byzfed;

TEST(Toy, TargetValues) {
    EXPECT_NEAR(toy_eta(0.0), 4.2397127693021015, 1e-15);
    EXPECT_NEAR(toy_eta(0.5), 1.4963882314209403, 1e-15);
    EXPECT_NEAR(toy_eta(0.5, 0.2) - toy_eta(0.5), 5 * 0.25 * 0.2, 1e-14);
}

// The configured sup-norm and Lipschitz constants must really bound the toy target on [0, 1].
TEST(Toy, DefaultConstantsBoundTheTarget) {
    const SimConfig cfg;
    double sup = 0;
    double lip = 0;
    const int m = 200000;
    for (int k = 0; k <= m; ++k) {
        const double z = static_cast<double>(k) / m;
        sup = std::max(sup, std::abs(toy_eta(z)));
        if (k > 0) {
            lip = std::max(lip, std::abs(toy_eta(z) - toy_eta(z - 1.0 / m)) * m);
        }
    }
    EXPECT_LE(sup, cfg.eta_sup);
    EXPECT_LE(lip, cfg.lip_eta);
    EXPECT_GT(sup, 0.99 * cfg.eta_sup);
}

TEST(Toy, StreamShapeAndConservation) {
    const std::vector<double> noise(8, 0.01);
    const auto s = generate_toy_stream(800, 8, noise, 9);
    ASSERT_EQ(s.size(), 8u);
    std::size_t total = 0;
    for (const auto& agent : s) {
        ASSERT_EQ(agent.size(), 100u);
        total += agent.size();
        for (std::size_t k = 0; k < agent.size(); ++k) {
            EXPECT_EQ(agent[k].t, k + 1);
            EXPECT_GE(agent[k].z[0], 0.0);
            EXPECT_LT(agent[k].z[0], 1.0);
        }
    }
    EXPECT_EQ(total, 800u);
    EXPECT_THROW(generate_toy_stream(801, 8, noise, 9), std::invalid_argument);
    const auto again = generate_toy_stream(800, 8, noise, 9);
    EXPECT_EQ(again[3][50].y, s[3][50].y);
}

TEST(Toy, ObservationNoiseHasConfiguredVariance) {
    const std::vector<double> noise{0.01, 0.25};
    const auto s = generate_toy_stream(200000, 2, noise, 10);
    for (std::size_t a = 0; a < 2; ++a) {
        double sq = 0;
        for (const auto& p : s[a]) {
            const double e = p.y - toy_eta(p.z[0]);
            sq += e * e;
        }
        EXPECT_NEAR(sq / static_cast<double>(s[a].size()), noise[a], 0.03 * noise[a]);
    }
}

TEST(Toy, Grid) {
    const auto g = uniform_grid_1d(5, 0, 1);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g.front()[0], 0.0);
    EXPECT_EQ(g.back()[0], 1.0);
    EXPECT_EQ(g[2][0], 0.5);
}

TEST(Parallel, VisitsEveryIndexOnceAndRethrows) {
    for (std::size_t workers : {1u, 2u, 3u, 8u}) {
        std::vector<int> hits(101, 0);
        parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
        EXPECT_EQ(std::accumulate(hits.begin(), hits.end(), 0), 101);
        EXPECT_EQ(*std::min_element(hits.begin(), hits.end()), 1);
    }
    EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) {
                     if (i == 7) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

TEST(Csv, ParsesAndReportsErrors) {
    std::istringstream ok("\xEF\xBB\xBFx, y\r\n1.5,2\r\n\r\n-3,4e-1\r\n");
    const auto t = parse_csv(ok, "ok.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"x", "y"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[1][1], 0.4);

    std::istringstream ragged("x,y\n1,2\n3\n");
    try {
        parse_csv(ragged, "r.csv");
        FAIL();
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("r.csv:3"), std::string::npos);
    }
    std::istringstream text("x,y\n1,abc\n");
    EXPECT_THROW(parse_csv(text, "t.csv"), format_error);
    std::istringstream empty("");
    EXPECT_THROW(parse_csv(empty, "e.csv"), format_error);
}

TEST(Csv, LoadSplitsAndStandardises) {
    CsvTable t;
    t.header = {"a", "y"};
    for (int k = 0; k < 23; ++k) {
        t.rows.push_back({static_cast<double>(k), 2.0 * k + 1});
    }
    const auto d = load_csv(t, 4, "y", 3, 5);
    EXPECT_EQ(d.input_dim, 1u);
    EXPECT_EQ(d.test_inputs.size(), 5u);
    EXPECT_EQ(d.rows_dropped, 2u);
    double sum = 0;
    double sq = 0;
    std::size_t count = 0;
    for (const auto& s : d.streams) {
        EXPECT_EQ(s.size(), 4u);
        for (const auto& p : s) {
            EXPECT_NEAR(d.transform.mean + d.transform.scale * p.y, 2.0 * p.z[0] + 1, 1e-12);
            sum += p.y;
            sq += p.y * p.y;
            ++count;
        }
    }
    EXPECT_NEAR(sum / count, 0.0, 1e-12);
    EXPECT_NEAR(sq / count, 1.0, 1e-12);
    EXPECT_THROW(load_csv(t, 4, "z", 3, 5), config_error);
    EXPECT_THROW(load_csv(t, 40, "y", 3, 5), config_error);
}

TEST(Config, Defaults) {
    const auto cfg = parse_config_string("[network]\nseed = 3\n");
    EXPECT_EQ(cfg.n, 40u);
    EXPECT_EQ(cfg.alpha, 0.0);
    EXPECT_EQ(cfg.hp.noise_var_per_agent, std::vector<double>(40, 0.01));
    EXPECT_EQ(cfg.attack.kind, AttackKind::none);
    EXPECT_EQ(cfg.fusion_rule, FusionRule::variance_compare);
    EXPECT_FALSE(cfg.gamma_d.has_value());
    EXPECT_EQ(cfg.test_count, 120u);
    EXPECT_EQ(cfg.grid_resolution, 10000u);
}

TEST(Config, Valid) {
    const auto cfg = parse_config_string(R"(
[network]
agents = 8
alpha = 0.125
beta = 0.125
aggregator = median
seed = 42
[kernel]
sigma_f2 = 25
length_scale = 0.2
noise_var = 0.5
[attack]
kind = same-value
value = -3
byzantine_ids = 6
[fusion]
rule = theta-rule
gamma_d = 0.05
[data]
training_points = 80
test_inputs = 0.1, 0.2
[output]
format = json
)");
    EXPECT_EQ(cfg.n, 8u);
    EXPECT_EQ(cfg.aggregator, Aggregator::median);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.hp.sigma_f2, 25.0);
    EXPECT_EQ(cfg.hp.noise_var_per_agent, std::vector<double>(8, 0.5));
    EXPECT_EQ(cfg.attack.kind, AttackKind::same_value);
    EXPECT_EQ(cfg.attack.value, -3.0);
    EXPECT_EQ(*cfg.byzantine_ids, std::vector<AgentId>{6});
    EXPECT_EQ(cfg.fusion_rule, FusionRule::theta_rule);
    EXPECT_EQ(*cfg.gamma_d, 0.05);
    EXPECT_EQ(cfg.test_inputs, (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(cfg.format, OutputFormat::json);
}

TEST(Config, Rejections) {
    EXPECT_THROW(parse_config_string("[network]\nagents = 8\nbeta = 0.25\n"), config_error);
    EXPECT_THROW(parse_config_string("[network]\nseeds = 3\n"), config_error);
    EXPECT_THROW(parse_config_string("[netwrk]\nagents = 8\n"), config_error);
    EXPECT_THROW(parse_config_string("[network]\nagents = eight\n"), config_error);
    EXPECT_THROW(parse_config_string("[network]\nagents = 7\n"), config_error);  // 10000 % 7
    EXPECT_THROW(parse_config_string("[attack]\nkind = flood\n"), config_error);
    EXPECT_THROW(parse_config_string("[network]\nagents=8\nalpha=0.125\nbeta=0.125\n[attack]\nbyzantine_ids=1,2\n"),
                 config_error);
    EXPECT_THROW(parse_config_string("[kernel]\nnoise_var = 0.1\nnoise_var_per_agent = 0.1\n"), config_error);
    EXPECT_THROW(parse_config_string("[data]\nsource = csv\n"), config_error);
}

namespace {

SimConfig small_config() {
    SimConfig cfg;
    cfg.n = 8;
    cfg.alpha = 0.125;
    cfg.beta = 0.125;
    cfg.hp = Hyperparams{1.0, 0.1, std::vector<double>(8, 0.01)};
    cfg.attack.kind = AttackKind::gaussian;
    cfg.training_points = 400;
    cfg.test_count = 20;
    cfg.grid_resolution = 200;
    return cfg;
}

std::string csv_stream(const RunArtifact& run) {
    std::string out;
    for (const auto& m : run.rounds) {
        out += results_csv_row(m) + "\n";
    }
    return out;
}

} // namespace

TEST(Simulation, RunsAndReports) {
    const auto run = run_scenario(small_config());
    EXPECT_EQ(run.summary.rounds_run, 50u);
    EXPECT_EQ(run.rounds.size(), 50u);
    EXPECT_EQ(run.summary.byzantine_ids.size(), 1u);
    EXPECT_EQ(run.summary.grid_size, 220u);
    ASSERT_TRUE(run.summary.bounds.has_value());
    EXPECT_EQ(run.summary.bounds->cloud_checks, 50u * 20u);
    EXPECT_EQ(run.summary.bounds->fused_checks, 50u * 20u * 7u);
    for (std::size_t k = 1; k < run.rounds.size(); ++k) {
        EXPECT_LE(run.rounds[k].d_max, run.rounds[k - 1].d_max);
    }
    const auto& f = run.rounds.back();
    EXPECT_EQ(f.mse_local.size(), 7u);
    EXPECT_GE(f.kept_min, 8u - 4u);
    EXPECT_LE(f.kept_min, 8u - 2u);
}

TEST(Simulation, SameSeedSameStreamAcrossWorkerCounts) {
    auto a = small_config();
    auto b = small_config();
    b.workers = 3;
    EXPECT_EQ(csv_stream(run_scenario(a)), csv_stream(run_scenario(b)));
    b.seed = 2;
    EXPECT_NE(csv_stream(run_scenario(a)), csv_stream(run_scenario(b)));
}

TEST(Simulation, SingleAgentCloudEqualsLocal) {
    SimConfig cfg;
    cfg.n = 1;
    cfg.hp = Hyperparams{1.0, 0.1, {0.01}};
    cfg.training_points = 60;
    cfg.test_count = 15;
    cfg.grid_resolution = 100;
    const auto run = run_scenario(cfg);
    for (const auto& m : run.rounds) {
        EXPECT_EQ(m.mse_cloud, m.mse_local_mean);
        EXPECT_EQ(m.avg_var_cloud, m.avg_var_local);
        EXPECT_EQ(m.mse_fused_mean, m.mse_local_mean);
        EXPECT_EQ(m.fused_selection_rate, 0.0);
    }
}

TEST(Simulation, EvalEveryAndRoundLimit) {
    auto cfg = small_config();
    cfg.rounds = 20;
    cfg.eval_every = 7;
    const auto run = run_scenario(cfg);
    ASSERT_EQ(run.rounds.size(), 3u);
    EXPECT_EQ(run.rounds[0].t, 7u);
    EXPECT_EQ(run.rounds[1].t, 14u);
    EXPECT_EQ(run.rounds[2].t, 20u);
    EXPECT_EQ(run.rounds[2].round, 3u);

    Simulation sim(cfg);
    for (int k = 0; k < 20; ++k) sim.run_round(false);
    EXPECT_THROW(sim.run_round(), state_error);
}

TEST(Simulation, CsvSource) {
    SimConfig cfg;
    cfg.n = 4;
    cfg.hp = Hyperparams{1.0, 0.5, std::vector<double>(4, 0.05)};
    cfg.source = DataSource::csv;
    cfg.csv_path = BYZFED_SCENARIO_DIR "/../tests/data/tiny.csv";
    cfg.test_count = 10;
    const auto run = run_scenario(cfg);
    EXPECT_EQ(run.summary.rounds_run, 13u);
    EXPECT_EQ(run.summary.rows_dropped, 2u);
    EXPECT_TRUE(run.summary.target_transform.has_value());
    EXPECT_FALSE(run.summary.bounds.has_value());
    EXPECT_LT(run.rounds.back().mse_cloud, 1.0);
}

TEST(Simulation, MimicOfByzantineTargetRejected) {
    auto cfg = small_config();
    cfg.attack.kind = AttackKind::mimic;
    cfg.byzantine_ids = std::vector<AgentId>{3};
    cfg.attack.mimic_target = 3;
    EXPECT_THROW(Simulation{cfg}, config_error);
}

TEST(Report, CsvRowFormat) {
    RoundMetrics m;
    m.round = 2;
    m.t = 5;
    m.mse_cloud = 0.1;
    m.kept_min = 6;
    const auto row = results_csv_row(m);
    EXPECT_EQ(row, "2,5,0.10000000000000001,0,0,0,0,0,6,nan");
    EXPECT_EQ(std::count(results_csv_header.begin(), results_csv_header.end(), ','), 9);
}

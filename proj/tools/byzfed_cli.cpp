// Command-line front end: simulate, attack-sweep, verify-bounds.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "byzfed/byzfed.hpp"

namespace {

using namespace byzfed;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
    std::optional<std::size_t> workers;
};

SimConfig load_config(const CommonOptions& opts) {
    std::ifstream in(opts.config_path);
    if (!in) {
        throw config_error("cannot open config '" + opts.config_path + "'");
    }
    SimConfig cfg = parse_config(in, opts.config_path);
    if (opts.seed) {
        cfg.seed = *opts.seed;
    }
    if (opts.out_dir) {
        cfg.out_dir = *opts.out_dir;
    }
    if (opts.format) {
        cfg.format = *opts.format == "json" ? OutputFormat::json : OutputFormat::csv;
    }
    if (opts.workers) {
        cfg.workers = *opts.workers;
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "Scenario file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "Override [network] seed");
    cmd->add_option("--out", opts.out_dir, "Override [output] dir");
    cmd->add_option("--format", opts.format, "Results format")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--workers", opts.workers, "Worker threads per round")->check(CLI::PositiveNumber);
}

int run_simulate(const CommonOptions& opts) {
    const SimConfig cfg = load_config(opts);
    ResultsWriter writer(cfg);
    const RunArtifact run = run_scenario(cfg, [&](const RoundOutcome& o) { writer.on_round(o); });
    writer.finish(run.summary);
    const auto& f = *run.summary.final_metrics;
    fmt::print("rounds={} mse_cloud={:.6g} mse_local={:.6g} mse_fused={:.6g} d_max={:.4g}\n", run.summary.rounds_run,
               f.mse_cloud, f.mse_local_mean, f.mse_fused_mean, f.d_max);
    if (run.summary.bounds) {
        fmt::print("bound violation rate={:.4g} (variance sandwich held on {} checks)\n",
                   run.summary.bounds->empirical_violation_rate(), run.summary.bounds->variance_checks);
    }
    return 0;
}

int run_attack_sweep(const CommonOptions& opts, const std::vector<double>& alphas, const std::vector<double>& betas) {
    const SimConfig base = load_config(opts);
    std::filesystem::create_directories(base.out_dir);

    nlohmann::json rows = nlohmann::json::array();
    std::ofstream csv;
    const auto out_path = std::filesystem::path(base.out_dir) /
                          (base.format == OutputFormat::csv ? "sweep.csv" : "sweep.json");
    if (base.format == OutputFormat::csv) {
        csv.open(out_path, std::ios::binary);
        csv << "alpha,beta,mse_cloud,mse_local_mean,mse_fused_mean,avg_var_cloud,kept_count,mse_standard_poe\n";
    }

    for (double alpha : alphas) {
        std::vector<double> beta_values = betas.empty() ? std::vector<double>{alpha} : betas;
        for (double beta : beta_values) {
            if (beta < alpha) {
                continue;
            }
            SimConfig cfg = base;
            cfg.alpha = alpha;
            cfg.beta = beta;
            cfg.eval_every = SIZE_MAX;
            cfg.byzantine_ids.reset();
            cfg.validate();
            const auto resilient = *run_scenario(cfg).summary.final_metrics;

            SimConfig standard = cfg;
            standard.aggregator = Aggregator::standard_poe;
            const auto attacked = *run_scenario(standard).summary.final_metrics;

            if (base.format == OutputFormat::csv) {
                csv << fmt::format("{},{},{},{},{},{},{},{}\n", format_number(alpha), format_number(beta),
                                   format_number(resilient.mse_cloud), format_number(resilient.mse_local_mean),
                                   format_number(resilient.mse_fused_mean), format_number(resilient.avg_var_cloud),
                                   resilient.kept_min, format_number(attacked.mse_cloud));
            } else {
                rows.push_back({{"alpha", alpha},
                                {"beta", beta},
                                {"resilient", to_json(resilient)},
                                {"mse_standard_poe", attacked.mse_cloud}});
            }
            fmt::print("alpha={:.4g} beta={:.4g} mse_resilient={:.6g} mse_standard_poe={:.6g}\n", alpha, beta,
                       resilient.mse_cloud, attacked.mse_cloud);
        }
    }
    if (base.format == OutputFormat::json) {
        std::ofstream(out_path, std::ios::binary) << rows.dump(1) << '\n';
    }
    return 0;
}

int run_verify_bounds(const CommonOptions& opts, std::size_t trials) {
    const SimConfig base = load_config(opts);
    if (base.source != DataSource::toy) {
        throw config_error("verify-bounds needs the synthetic data source (the true function must be known)");
    }
    if (base.aggregator != Aggregator::resilient_poe) {
        throw config_error("verify-bounds applies to the resilient-poe aggregator only");
    }
    BoundReport total;
    nlohmann::json per_trial = nlohmann::json::array();
    for (std::size_t k = 0; k < trials; ++k) {
        SimConfig cfg = base;
        cfg.seed = base.seed + k;
        cfg.eval_every = SIZE_MAX;
        cfg.verify = true;
        const auto run = run_scenario(cfg);
        total.merge(*run.summary.bounds);
        per_trial.push_back({{"seed", cfg.seed}, {"bounds", to_json(*run.summary.bounds)}});
    }
    std::filesystem::create_directories(base.out_dir);
    nlohmann::json out = {{"trials", trials}, {"delta", base.delta}, {"total", to_json(total)}};
    if (base.format == OutputFormat::json) {
        out["per_trial"] = per_trial;
        std::ofstream(std::filesystem::path(base.out_dir) / "bounds.json", std::ios::binary) << out.dump(2) << '\n';
    } else {
        std::ofstream csv(std::filesystem::path(base.out_dir) / "bounds.csv", std::ios::binary);
        csv << "seed,theta,delta_term,var_lo,var_hi,cloud_violation_rate,fused_violation_rate\n";
        for (const auto& t : per_trial) {
            const auto& b = t["bounds"];
            csv << fmt::format("{},{},{},{},{},{},{}\n", t["seed"].get<std::uint64_t>(),
                               format_number(b["theta"].get<double>()), format_number(b["delta_term"].get<double>()),
                               format_number(b["var_lo"].get<double>()), format_number(b["var_hi"].get<double>()),
                               format_number(b["cloud_violation_rate"].get<double>()),
                               format_number(b["fused_violation_rate"].get<double>()));
        }
    }
    fmt::print("trials={} cloud_violation_rate={:.4g} fused_violation_rate={:.4g} delta={} variance_checks={} "
               "(all within bounds)\n",
               trials, total.cloud_violation_rate(), total.fused_violation_rate(), base.delta,
               total.variance_checks);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Byzantine-resilient federated online GP regression simulator"};
    app.require_subcommand(1);

    CommonOptions sim_opts;
    auto* simulate = app.add_subcommand("simulate", "Run one scenario and write the results stream");
    add_common(simulate, sim_opts);

    CommonOptions sweep_opts;
    std::vector<double> alphas;
    std::vector<double> betas;
    auto* sweep = app.add_subcommand("attack-sweep", "Final-round MSE over a grid of Byzantine/trim fractions");
    add_common(sweep, sweep_opts);
    sweep->add_option("--alphas", alphas, "Byzantine fractions")->required()->delimiter(',');
    sweep->add_option("--betas", betas, "Trim fractions (default: beta = alpha)")->delimiter(',');

    CommonOptions verify_opts;
    std::size_t trials = 100;
    auto* verify = app.add_subcommand("verify-bounds", "Monte Carlo check of the error and variance bounds");
    add_common(verify, verify_opts);
    verify->add_option("--trials", trials, "Independent seeds")->required()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*simulate) {
            return run_simulate(sim_opts);
        }
        if (*sweep) {
            return run_attack_sweep(sweep_opts, alphas, betas);
        }
        return run_verify_bounds(verify_opts, trials);
    } catch (const verification_failure& e) {
        std::cerr << "verification failed: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

#pragma once

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>

#include "byzfed/harness/config.hpp"
#include "byzfed/harness/simulation.hpp"

namespace byzfed {

/// Results CSV column order is part of the file format.
inline constexpr std::string_view results_csv_header =
    "round,t,mse_cloud,mse_local_mean,mse_fused_mean,avg_var_cloud,avg_var_fused,d_max,kept_count,"
    "bound_violation_rate";

inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    return fmt::format("{:.17g}", v);
}

/// One results row. kept_count is the smallest kept set over the round's test points.
inline std::string results_csv_row(const RoundMetrics& m) {
    return fmt::format("{},{},{},{},{},{},{},{},{},{}", m.round, m.t, format_number(m.mse_cloud),
                       format_number(m.mse_local_mean), format_number(m.mse_fused_mean),
                       format_number(m.avg_var_cloud), format_number(m.avg_var_fused), format_number(m.d_max),
                       m.kept_min, m.bounds ? format_number(m.bounds->empirical_violation_rate()) : "nan");
}

inline nlohmann::json to_json(const BoundReport& b) {
    return {{"theta", b.theta},
            {"delta_term", b.delta_term},
            {"var_lo", b.var_lo},
            {"var_hi", b.var_hi},
            {"cloud_checks", b.cloud_checks},
            {"cloud_violations", b.cloud_violations},
            {"fused_checks", b.fused_checks},
            {"fused_violations", b.fused_violations},
            {"variance_checks", b.variance_checks},
            {"cloud_violation_rate", b.cloud_violation_rate()},
            {"fused_violation_rate", b.fused_violation_rate()},
            {"empirical_violation_rate", b.empirical_violation_rate()}};
}

inline nlohmann::json to_json(const RoundMetrics& m) {
    nlohmann::json j = {{"round", m.round},
                        {"t", m.t},
                        {"mse_cloud", m.mse_cloud},
                        {"mse_local_mean", m.mse_local_mean},
                        {"mse_fused_mean", m.mse_fused_mean},
                        {"avg_var_local", m.avg_var_local},
                        {"avg_var_cloud", m.avg_var_cloud},
                        {"avg_var_fused", m.avg_var_fused},
                        {"d_max", m.d_max},
                        {"kept_count", m.kept_min},
                        {"kept_mean", m.kept_mean},
                        {"fused_selection_rate", m.fused_selection_rate}};
    j["bound_violation_rate"] = m.bounds ? nlohmann::json(m.bounds->empirical_violation_rate()) : nlohmann::json();
    return j;
}

inline nlohmann::json to_json(const TrimReport& r) {
    return {{"kept", r.kept},
            {"trimmed_mean_high", r.trimmed_mean_high},
            {"trimmed_mean_low", r.trimmed_mean_low},
            {"trimmed_var_high", r.trimmed_var_high},
            {"trimmed_var_low", r.trimmed_var_low}};
}

inline nlohmann::json config_json(const SimConfig& cfg) {
    nlohmann::json j;
    j["agents"] = cfg.n;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["aggregator"] = to_string(cfg.aggregator);
    j["seed"] = cfg.seed;
    j["sigma_f2"] = cfg.hp.sigma_f2;
    j["length_scale"] = cfg.hp.length_scale;
    j["noise_var_per_agent"] = cfg.hp.noise_var_per_agent;
    j["attack"] = {{"kind", to_string(cfg.attack.kind)}, {"attack_variance", cfg.attack.attack_variance}};
    j["fusion_rule"] = to_string(cfg.fusion_rule);
    j["gamma_d"] = cfg.gamma_d ? nlohmann::json(*cfg.gamma_d) : nlohmann::json("auto");
    j["bounds"] = {{"lip_eta", cfg.lip_eta}, {"eta_sup", cfg.eta_sup}, {"delta", cfg.delta}};
    j["data_source"] = cfg.source == DataSource::toy ? "toy" : "csv";
    if (cfg.source == DataSource::toy) {
        j["training_points"] = cfg.training_points;
        j["perturbation"] = cfg.perturbation;
    } else {
        j["path"] = cfg.csv_path;
        j["target_column"] = cfg.target_column;
    }
    j["grid_resolution"] = cfg.grid_resolution;
    return j;
}

inline nlohmann::json summary_json(const SimConfig& cfg, const RunSummary& s) {
    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["rounds_run"] = s.rounds_run;
    j["byzantine_ids"] = s.byzantine_ids;
    j["dispersion_grid_points"] = s.grid_size;
    if (s.final_metrics) {
        j["final"] = to_json(*s.final_metrics);
    }
    j["bounds"] = s.bounds ? to_json(*s.bounds) : nlohmann::json();
    if (s.target_transform) {
        j["target_transform"] = {{"mean", s.target_transform->mean}, {"scale", s.target_transform->scale}};
        j["rows_dropped"] = s.rows_dropped;
    }
    return j;
}

/// Writes results.{csv,json}, summary.json and (detailed verbosity) details.jsonl under cfg.out_dir.
class ResultsWriter {
public:
    explicit ResultsWriter(const SimConfig& cfg) : cfg_(cfg), dir_(cfg.out_dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) {
            throw config_error("cannot create output directory '" + dir_.string() + "': " + ec.message());
        }
        const auto results_path = dir_ / (cfg.format == OutputFormat::csv ? "results.csv" : "results.json");
        results_ = open(results_path);
        if (cfg.format == OutputFormat::csv) {
            results_ << results_csv_header << '\n';
        }
        if (cfg.verbosity == Verbosity::detailed) {
            details_ = open(dir_ / "details.jsonl");
        }
    }

    void on_round(const RoundOutcome& outcome) {
        if (outcome.metrics) {
            if (cfg_.format == OutputFormat::csv) {
                results_ << results_csv_row(*outcome.metrics) << '\n';
            } else {
                rows_.push_back(to_json(*outcome.metrics));
            }
        }
        if (outcome.detail && details_.is_open()) {
            const auto& d = *outcome.detail;
            for (std::size_t p = 0; p < d.cloud.size(); ++p) {
                nlohmann::json row = {{"t", outcome.t},
                                      {"point", p},
                                      {"cloud_mean", d.cloud[p].mean},
                                      {"cloud_var", d.cloud[p].variance},
                                      {"trim", to_json(d.trims[p])}};
                std::vector<int> flags;
                for (const auto& agent : d.selected) {
                    flags.push_back(agent[p]);
                }
                row["fused_selected"] = flags;
                details_ << row.dump() << '\n';
            }
        }
    }

    void finish(const RunSummary& summary) {
        if (cfg_.format == OutputFormat::json) {
            results_ << rows_.dump(1) << '\n';
        }
        auto out = open(dir_ / "summary.json");
        out << summary_json(cfg_, summary).dump(2) << '\n';
        results_.flush();
        if (!results_) {
            throw config_error("failed writing results under '" + dir_.string() + "'");
        }
    }

private:
    static std::ofstream open(const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) {
            throw config_error("cannot open '" + p.string() + "' for writing");
        }
        return f;
    }

    const SimConfig& cfg_;
    std::filesystem::path dir_;
    std::ofstream results_;
    std::ofstream details_;
    nlohmann::json rows_ = nlohmann::json::array();
};

} // namespace byzfed

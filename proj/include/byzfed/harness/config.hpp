#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "byzfed/aggregation.hpp"
#include "byzfed/attacks.hpp"
#include "byzfed/errors.hpp"
#include "byzfed/fusion.hpp"
#include "byzfed/kernel.hpp"

namespace byzfed {

enum class DataSource { toy, csv };
enum class OutputFormat { csv, json };
enum class Verbosity { summary, detailed };

/// Complete description of one simulation run.
struct SimConfig {
    // [network]
    std::size_t n = 40;
    double alpha = 0.0;
    double beta = 0.0;
    Aggregator aggregator = Aggregator::resilient_poe;
    std::size_t rounds = 0;  // 0: run the whole stream
    std::uint64_t seed = 1;
    std::size_t workers = 1;

    // [kernel]
    Hyperparams hp{1.0, 0.1, {}};

    // [attack]
    AttackSpec attack;
    std::optional<std::vector<AgentId>> byzantine_ids;  // explicit list, else seeded choice

    // [fusion]
    FusionRule fusion_rule = FusionRule::variance_compare;
    std::optional<double> gamma_d;  // pinned; otherwise refreshed from the measured d_max

    // [bounds]
    double lip_eta = 46.5;
    double eta_sup = 5.22;
    double delta = 0.05;
    bool verify = true;

    // [data]
    DataSource source = DataSource::toy;
    std::size_t training_points = 10000;
    double perturbation = 0.0;
    std::string csv_path;
    std::string target_column = "y";
    std::size_t test_count = 120;
    std::optional<std::uint64_t> test_seed;
    std::vector<double> test_inputs;  // explicit 1-D test inputs (toy only)
    std::size_t grid_resolution = 10000;

    // [output]
    std::string out_dir = "results";
    OutputFormat format = OutputFormat::csv;
    Verbosity verbosity = Verbosity::summary;
    std::size_t eval_every = 1;

    [[nodiscard]] TrimPolicy policy() const { return TrimPolicy(n, alpha, beta); }

    /// Checks everything that does not need the data itself.
    void validate() const {
        try {
            (void)policy();
            hp.validate();
        } catch (const std::invalid_argument& e) {
            throw config_error(e.what());
        }
        if (beta > 0.0 && n < 4) {
            throw config_error("trimming needs at least 4 agents");
        }
        if (hp.noise_var_per_agent.size() != n) {
            throw config_error("need exactly one noise variance per agent (" + std::to_string(n) + ")");
        }
        if (byzantine_ids) {
            if (byzantine_ids->size() != policy().byzantine_count()) {
                throw config_error("byzantine_ids lists " + std::to_string(byzantine_ids->size()) +
                                   " agents but alpha * n = " + std::to_string(policy().byzantine_count()));
            }
            std::set<AgentId> unique(byzantine_ids->begin(), byzantine_ids->end());
            if (unique.size() != byzantine_ids->size() || (!unique.empty() && *unique.rbegin() >= n)) {
                throw config_error("byzantine_ids must be distinct agent ids below " + std::to_string(n));
            }
        }
        if (attack.kind == AttackKind::mimic && attack.mimic_target >= n) {
            throw config_error("mimic target is not an agent");
        }
        if (eval_every == 0) {
            throw config_error("eval_every must be at least 1");
        }
        if (!(delta > 0.0 && delta < 1.0) || !(eta_sup > 0.0) || !(lip_eta >= 0.0)) {
            throw config_error("bounds need 0 < delta < 1, eta_sup > 0, lip_eta >= 0");
        }
        if (gamma_d && !(*gamma_d >= 0.0)) {
            throw config_error("gamma_d must be non-negative");
        }
        if (source == DataSource::toy) {
            if (training_points % n != 0) {
                throw config_error("agents (" + std::to_string(n) + ") must divide training_points (" +
                                   std::to_string(training_points) + ")");
            }
            if (rounds > training_points / n) {
                throw config_error("rounds exceeds the per-agent stream length");
            }
            if (grid_resolution < 2) {
                throw config_error("grid_resolution must be at least 2");
            }
        } else if (csv_path.empty()) {
            throw config_error("csv data source needs [data] path");
        }
        if (test_inputs.empty() && test_count == 0) {
            throw config_error("need at least one test point");
        }
    }
};

namespace detail {

inline double parse_double(const std::string& key, std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        throw config_error("key '" + key + "': '" + std::string(s) + "' is not a finite number");
    }
    return v;
}

inline std::uint64_t parse_unsigned(const std::string& key, std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw config_error("key '" + key + "': '" + std::string(s) + "' is not a non-negative integer");
    }
    return v;
}

inline bool parse_bool(const std::string& key, std::string_view s) {
    if (s == "true" || s == "1" || s == "yes") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no") {
        return false;
    }
    throw config_error("key '" + key + "': expected true/false, got '" + std::string(s) + "'");
}

inline std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> items;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        auto item = s.substr(start, comma == s.npos ? s.npos : comma - start);
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a != item.npos) {
            items.push_back(item.substr(a, b - a + 1));
        }
        if (comma == s.npos) {
            break;
        }
        start = comma + 1;
    }
    return items;
}

inline std::vector<double> parse_double_list(const std::string& key, std::string_view s) {
    std::vector<double> out;
    for (auto item : split_list(s)) {
        out.push_back(parse_double(key, item));
    }
    return out;
}

inline Aggregator parse_aggregator(std::string_view s) {
    for (auto a : {Aggregator::resilient_poe, Aggregator::standard_poe, Aggregator::median, Aggregator::average}) {
        if (s == to_string(a)) {
            return a;
        }
    }
    throw config_error("unknown aggregator '" + std::string(s) + "'");
}

} // namespace detail

/// Parse the INI-style scenario file. Unknown sections or keys are errors.
inline SimConfig parse_config(std::istream& in, const std::string& source_name = "<config>") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw config_error(source_name + ": " + e.what());
    }

    SimConfig cfg;
    std::optional<double> noise_var;
    std::vector<double> noise_list;

    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) {
            throw config_error(source_name + ": key '" + section + "' outside of any section");
        }
        for (const auto& [key, node] : body) {
            const std::string name = section + "." + key;
            const std::string value = node.get_value<std::string>();
            const auto bad_key = [&] { throw config_error(source_name + ": unknown key '" + name + "'"); };

            if (section == "network") {
                if (key == "agents") cfg.n = detail::parse_unsigned(name, value);
                else if (key == "alpha") cfg.alpha = detail::parse_double(name, value);
                else if (key == "beta") cfg.beta = detail::parse_double(name, value);
                else if (key == "aggregator") cfg.aggregator = detail::parse_aggregator(value);
                else if (key == "rounds") cfg.rounds = detail::parse_unsigned(name, value);
                else if (key == "seed") cfg.seed = detail::parse_unsigned(name, value);
                else if (key == "workers") cfg.workers = detail::parse_unsigned(name, value);
                else bad_key();
            } else if (section == "kernel") {
                if (key == "sigma_f2") cfg.hp.sigma_f2 = detail::parse_double(name, value);
                else if (key == "length_scale") cfg.hp.length_scale = detail::parse_double(name, value);
                else if (key == "noise_var") noise_var = detail::parse_double(name, value);
                else if (key == "noise_var_per_agent") noise_list = detail::parse_double_list(name, value);
                else bad_key();
            } else if (section == "attack") {
                if (key == "kind") {
                    const auto k = parse_attack_kind(value);
                    if (!k) {
                        throw config_error(source_name + ": unknown attack kind '" + value + "'");
                    }
                    cfg.attack.kind = *k;
                } else if (key == "value") cfg.attack.value = detail::parse_double(name, value);
                else if (key == "variance_value") cfg.attack.variance_value = detail::parse_double(name, value);
                else if (key == "gaussian_var") cfg.attack.gaussian_var = detail::parse_double(name, value);
                else if (key == "alte_z") cfg.attack.alte_z = detail::parse_double(name, value);
                else if (key == "mimic_target") cfg.attack.mimic_target = detail::parse_unsigned(name, value);
                else if (key == "flip_scale") cfg.attack.flip_scale = detail::parse_double(name, value);
                else if (key == "attack_variance") cfg.attack.attack_variance = detail::parse_bool(name, value);
                else if (key == "byzantine_ids") {
                    std::vector<AgentId> ids;
                    for (auto item : detail::split_list(value)) {
                        ids.push_back(detail::parse_unsigned(name, item));
                    }
                    cfg.byzantine_ids = std::move(ids);
                } else bad_key();
            } else if (section == "fusion") {
                if (key == "rule") {
                    const auto r = parse_fusion_rule(value);
                    if (!r) {
                        throw config_error(source_name + ": unknown fusion rule '" + value + "'");
                    }
                    cfg.fusion_rule = *r;
                } else if (key == "gamma_d") {
                    if (value == "auto") cfg.gamma_d.reset();
                    else cfg.gamma_d = detail::parse_double(name, value);
                } else bad_key();
            } else if (section == "bounds") {
                if (key == "lip_eta") cfg.lip_eta = detail::parse_double(name, value);
                else if (key == "eta_sup") cfg.eta_sup = detail::parse_double(name, value);
                else if (key == "delta") cfg.delta = detail::parse_double(name, value);
                else if (key == "verify") cfg.verify = detail::parse_bool(name, value);
                else bad_key();
            } else if (section == "data") {
                if (key == "source") {
                    if (value == "toy") cfg.source = DataSource::toy;
                    else if (value == "csv") cfg.source = DataSource::csv;
                    else throw config_error(source_name + ": unknown data source '" + value + "'");
                } else if (key == "training_points") cfg.training_points = detail::parse_unsigned(name, value);
                else if (key == "perturbation") cfg.perturbation = detail::parse_double(name, value);
                else if (key == "path") cfg.csv_path = value;
                else if (key == "target_column") cfg.target_column = value;
                else if (key == "test_points") cfg.test_count = detail::parse_unsigned(name, value);
                else if (key == "test_seed") cfg.test_seed = detail::parse_unsigned(name, value);
                else if (key == "test_inputs") cfg.test_inputs = detail::parse_double_list(name, value);
                else if (key == "grid_resolution") cfg.grid_resolution = detail::parse_unsigned(name, value);
                else bad_key();
            } else if (section == "output") {
                if (key == "dir") cfg.out_dir = value;
                else if (key == "format") {
                    if (value == "csv") cfg.format = OutputFormat::csv;
                    else if (value == "json") cfg.format = OutputFormat::json;
                    else throw config_error(source_name + ": unknown output format '" + value + "'");
                } else if (key == "verbosity") {
                    if (value == "summary") cfg.verbosity = Verbosity::summary;
                    else if (value == "detailed") cfg.verbosity = Verbosity::detailed;
                    else throw config_error(source_name + ": unknown verbosity '" + value + "'");
                } else if (key == "eval_every") cfg.eval_every = detail::parse_unsigned(name, value);
                else bad_key();
            } else {
                throw config_error(source_name + ": unknown section [" + section + "]");
            }
        }
    }

    if (!noise_list.empty()) {
        if (noise_var) {
            throw config_error(source_name + ": give either kernel.noise_var or kernel.noise_var_per_agent, not both");
        }
        cfg.hp.noise_var_per_agent = std::move(noise_list);
    } else {
        cfg.hp.noise_var_per_agent.assign(cfg.n, noise_var.value_or(0.01));
    }
    if (cfg.byzantine_ids) {
        std::sort(cfg.byzantine_ids->begin(), cfg.byzantine_ids->end());
    }
    cfg.validate();
    return cfg;
}

inline SimConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "<string>");
}

} // namespace byzfed

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "byzfed/aggregation.hpp"
#include "byzfed/attacks.hpp"
#include "byzfed/bounds.hpp"
#include "byzfed/errors.hpp"
#include "byzfed/fusion.hpp"
#include "byzfed/harness/config.hpp"
#include "byzfed/harness/dataset.hpp"
#include "byzfed/harness/parallel.hpp"
#include "byzfed/harness/toy.hpp"
#include "byzfed/kernel.hpp"
#include "byzfed/local_gpr.hpp"

namespace byzfed {

struct RoundMetrics {
    std::uint64_t round = 0;  // 1-based index of the evaluated round
    std::uint64_t t = 0;      // observations per agent so far
    double mse_cloud = 0.0;
    std::vector<double> mse_local;  // per benign agent, ascending id
    std::vector<double> mse_fused;
    double mse_local_mean = 0.0;
    double mse_fused_mean = 0.0;
    double avg_var_local = 0.0;
    double avg_var_cloud = 0.0;
    double avg_var_fused = 0.0;
    double d_max = 0.0;
    std::size_t kept_min = 0;
    double kept_mean = 0.0;
    double fused_selection_rate = 0.0;  // fraction of (benign agent, point) pairs that took the cloud value
    std::optional<BoundReport> bounds;
};

/// Per-point audit trail of one evaluated round.
struct RoundDetail {
    std::vector<Prediction> cloud;
    std::vector<TrimReport> trims;
    std::vector<std::vector<std::uint8_t>> selected;  // [benign agent][point]
};

struct RoundOutcome {
    std::uint64_t t = 0;
    std::optional<RoundMetrics> metrics;
    std::optional<RoundDetail> detail;
};

namespace detail {

inline double mean_of(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) {
        s.add(x);
    }
    return xs.empty() ? 0.0 : s.value() / static_cast<double>(xs.size());
}

inline double ceil_to(double x, double step) { return std::ceil(x / step) * step; }

} // namespace detail

/// Owns every agent, the test set and the cloud; advances the protocol one round at a time.
class Simulation {
public:
    explicit Simulation(SimConfig cfg) : cfg_(std::move(cfg)), policy_(cfg_.policy()), kernel_(cfg_.hp) {
        cfg_.validate();
        load_data();

        byzantine_ = cfg_.byzantine_ids ? *cfg_.byzantine_ids
                                        : choose_byzantine_ids(cfg_.n, policy_.byzantine_count(), cfg_.seed);
        attack_ = cfg_.attack;
        attack_.byzantine_ids = byzantine_;
        for (AgentId id = 0; id < cfg_.n; ++id) {
            if (!attack_.is_byzantine(id)) {
                benign_.push_back(id);
            }
        }
        if (benign_.empty()) {
            throw config_error("no benign agents");
        }
        if (attack_.kind == AttackKind::mimic && attack_.is_byzantine(attack_.mimic_target)) {
            throw config_error("mimic target " + std::to_string(attack_.mimic_target) + " is Byzantine");
        }
        noise_ = benign_noise_range(cfg_.hp, benign_);
        bound_params_.emplace(cfg_.lip_eta, cfg_.eta_sup, cfg_.gamma_d.value_or(0.0), cfg_.delta, cfg_.hp, noise_);

        agents_.reserve(cfg_.n);
        trackers_.reserve(cfg_.n);
        for (AgentId id = 0; id < cfg_.n; ++id) {
            agents_.emplace_back(id, cfg_.hp.noise_var(id), input_dim_);
            trackers_.emplace_back(grid_);
        }
        total_rounds_ = cfg_.rounds == 0 ? stream_length_ : cfg_.rounds;
        if (total_rounds_ == 0 || total_rounds_ > stream_length_) {
            throw config_error("rounds must be between 1 and the per-agent stream length " +
                               std::to_string(stream_length_));
        }
    }

    // Trackers view grid_, so the object is pinned once built.
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    [[nodiscard]] const SimConfig& config() const { return cfg_; }
    [[nodiscard]] const TrimPolicy& policy() const { return policy_; }
    [[nodiscard]] std::span<const AgentId> byzantine_ids() const { return byzantine_; }
    [[nodiscard]] std::span<const AgentId> benign_ids() const { return benign_; }
    [[nodiscard]] std::span<const Input> test_inputs() const { return test_inputs_; }
    [[nodiscard]] std::span<const double> truth() const { return truth_; }
    [[nodiscard]] std::span<const AgentState> agents() const { return agents_; }
    [[nodiscard]] const Streams& streams() const { return streams_; }
    [[nodiscard]] std::size_t grid_size() const { return grid_.size(); }
    [[nodiscard]] const NoiseRange& noise_range() const { return noise_; }
    [[nodiscard]] const std::optional<TargetTransform>& target_transform() const { return transform_; }
    [[nodiscard]] std::size_t rows_dropped() const { return rows_dropped_; }
    [[nodiscard]] std::uint64_t time() const { return t_; }
    [[nodiscard]] std::size_t total_rounds() const { return total_rounds_; }
    [[nodiscard]] bool done() const { return t_ >= total_rounds_; }

    /// Bound verification only makes sense against the noiseless target under the
    /// resilient rule.
    [[nodiscard]] bool verifies_bounds() const {
        return cfg_.verify && cfg_.source == DataSource::toy && cfg_.aggregator == Aggregator::resilient_poe;
    }

    /// Ingest observation t+1 at every agent, then (if `evaluate`) run local prediction,
    /// attacks, cloud aggregation, fusion and metrics for this round.
    RoundOutcome run_round(bool evaluate = true) {
        if (done()) {
            throw state_error("simulation already ran all " + std::to_string(total_rounds_) + " rounds");
        }
        const std::size_t workers = cfg_.workers;
        parallel_for(agents_.size(), workers, [&](std::size_t i) {
            const TrainingPoint& p = streams_[i][t_];
            agents_[i].ingest(p);
            trackers_[i].observe(p.z);
        });
        ++t_;

        RoundOutcome outcome;
        outcome.t = t_;
        if (evaluate) {
            ++evaluated_;
            evaluate_round(outcome);
        }
        return outcome;
    }

private:
    void load_data() {
        const std::uint64_t data_seed = substream_seed(cfg_.seed, 0xDA7AULL, 0);
        const std::uint64_t test_seed = cfg_.test_seed.value_or(substream_seed(cfg_.seed, 0x7E57ULL, 0));
        if (cfg_.source == DataSource::toy) {
            input_dim_ = 1;
            streams_ = generate_toy_stream(cfg_.training_points, cfg_.n, cfg_.hp.noise_var_per_agent, data_seed,
                                           cfg_.perturbation);
            if (!cfg_.test_inputs.empty()) {
                for (double z : cfg_.test_inputs) {
                    test_inputs_.push_back({z});
                }
            } else {
                std::mt19937_64 rng(test_seed);
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                for (std::size_t k = 0; k < cfg_.test_count; ++k) {
                    test_inputs_.push_back({unit(rng)});
                }
            }
            for (const auto& z : test_inputs_) {
                truth_.push_back(toy_eta(z[0], cfg_.perturbation));
            }
            // Test inputs join the grid so every queried point is covered by the measured dispersion.
            grid_ = uniform_grid_1d(cfg_.grid_resolution);
            grid_.insert(grid_.end(), test_inputs_.begin(), test_inputs_.end());
        } else {
            auto data = load_csv(cfg_.csv_path, cfg_.n, cfg_.target_column, data_seed, cfg_.test_count);
            input_dim_ = data.input_dim;
            streams_ = std::move(data.streams);
            test_inputs_ = std::move(data.test_inputs);
            truth_ = std::move(data.test_targets);
            transform_ = data.transform;
            rows_dropped_ = data.rows_dropped;
            grid_ = test_inputs_;
        }
        stream_length_ = streams_.front().size();
    }

    void evaluate_round(RoundOutcome& outcome) {
        const std::size_t n = cfg_.n;
        const std::size_t points = test_inputs_.size();
        const std::size_t workers = cfg_.workers;

        // Agent-side local GPR.
        std::vector<std::vector<Prediction>> local(n, std::vector<Prediction>(points));
        std::vector<double> dispersion(n);
        parallel_for(n, workers, [&](std::size_t i) {
            for (std::size_t p = 0; p < points; ++p) {
                local[i][p] = local_predict(agents_[i], test_inputs_[p], kernel_);
            }
            dispersion[i] = trackers_[i].value();
        });
        const double d_max = *std::max_element(dispersion.begin(), dispersion.end());

        // What the cloud receives.
        std::vector<std::vector<AgentPrediction>> benign_honest(points);
        for (std::size_t p = 0; p < points; ++p) {
            benign_honest[p].reserve(benign_.size());
            for (AgentId id : benign_) {
                benign_honest[p].push_back({id, local[id][p]});
            }
        }
        std::vector<std::vector<Prediction>> sent = local;
        parallel_for(byzantine_.size(), workers, [&](std::size_t b) {
            const AgentId id = byzantine_[b];
            std::mt19937_64 rng(substream_seed(cfg_.seed, id, t_));
            for (std::size_t p = 0; p < points; ++p) {
                sent[id][p] = apply_attack(attack_, local[id][p], AttackContext{benign_honest[p], &rng});
            }
        });

        // Cloud aggregation, one test point at a time.
        std::vector<Prediction> cloud(points);
        std::vector<TrimReport> trims(points);
        parallel_for(points, workers, [&](std::size_t p) {
            std::vector<AgentPrediction> reports;
            reports.reserve(n);
            for (AgentId id = 0; id < n; ++id) {
                reports.push_back({id, sent[id][p]});
            }
            try {
                switch (cfg_.aggregator) {
                case Aggregator::resilient_poe: {
                    auto agg = resilient_poe(reports, policy_);
                    cloud[p] = agg.prediction;
                    trims[p] = std::move(agg.trim);
                    break;
                }
                case Aggregator::standard_poe:
                    cloud[p] = poe_aggregate(reports);
                    break;
                case Aggregator::median:
                    cloud[p] = baseline_aggregate(reports, BaselineRule::median);
                    break;
                case Aggregator::average:
                    cloud[p] = baseline_aggregate(reports, BaselineRule::average);
                    break;
                }
            } catch (const integrity_error& e) {
                throw integrity_error("round " + std::to_string(t_) + ", test point " + std::to_string(p) + ": " +
                                      e.what());
            }
            if (cfg_.aggregator != Aggregator::resilient_poe) {
                trims[p].kept.resize(n);
                for (AgentId id = 0; id < n; ++id) {
                    trims[p].kept[id] = id;
                }
            }
        });

        // Agent-side fusion (benign agents only).
        if (!cfg_.gamma_d) {
            bound_params_->set_gamma_d(detail::ceil_to(d_max, 1e-3));
        }
        const std::size_t nb = benign_.size();
        std::vector<std::vector<Prediction>> fused(nb, std::vector<Prediction>(points));
        std::vector<std::vector<std::uint8_t>> selected(nb, std::vector<std::uint8_t>(points, 0));
        parallel_for(nb, workers, [&](std::size_t k) {
            const AgentId id = benign_[k];
            ThetaRuleTerms terms{};
            if (cfg_.fusion_rule == FusionRule::theta_rule) {
                terms = theta_rule_terms(*bound_params_, cfg_.hp, policy_.beta(), cfg_.hp.noise_var(id), dispersion[id]);
            }
            for (std::size_t p = 0; p < points; ++p) {
                const bool take = in_fused_set(cfg_.fusion_rule, local[id][p], cloud[p], terms);
                selected[k][p] = take ? 1 : 0;
                fused[k][p] = fuse(local[id][p], cloud[p], take);
            }
        });

        // Metrics, reduced in fixed order.
        RoundMetrics m;
        m.round = evaluated_;
        m.t = t_;
        m.d_max = d_max;
        const auto sq_err = [&](const std::vector<Prediction>& preds) {
            CompensatedSum s;
            for (std::size_t p = 0; p < points; ++p) {
                const double e = preds[p].mean - truth_[p];
                s.add(e * e);
            }
            return s.value() / static_cast<double>(points);
        };
        const auto avg_var = [&](const std::vector<Prediction>& preds, CompensatedSum& acc) {
            for (const auto& pr : preds) {
                acc.add(pr.variance);
            }
        };
        m.mse_cloud = sq_err(cloud);
        CompensatedSum var_local;
        CompensatedSum var_fused;
        CompensatedSum var_cloud;
        avg_var(cloud, var_cloud);
        std::size_t taken = 0;
        for (std::size_t k = 0; k < nb; ++k) {
            m.mse_local.push_back(sq_err(local[benign_[k]]));
            m.mse_fused.push_back(sq_err(fused[k]));
            avg_var(local[benign_[k]], var_local);
            avg_var(fused[k], var_fused);
            taken += static_cast<std::size_t>(std::count(selected[k].begin(), selected[k].end(), std::uint8_t{1}));
        }
        m.mse_local_mean = detail::mean_of(m.mse_local);
        m.mse_fused_mean = detail::mean_of(m.mse_fused);
        const double pairs = static_cast<double>(nb * points);
        m.avg_var_local = var_local.value() / pairs;
        m.avg_var_fused = var_fused.value() / pairs;
        m.avg_var_cloud = var_cloud.value() / static_cast<double>(points);
        m.fused_selection_rate = static_cast<double>(taken) / pairs;
        m.kept_min = std::numeric_limits<std::size_t>::max();
        CompensatedSum kept_sum;
        for (const auto& tr : trims) {
            m.kept_min = std::min(m.kept_min, tr.kept.size());
            kept_sum.add(static_cast<double>(tr.kept.size()));
        }
        m.kept_mean = kept_sum.value() / static_cast<double>(points);

        if (verifies_bounds()) {
            RoundArtifacts artifacts{t_, truth_, cloud, fused, d_max};
            m.bounds = verify_round(artifacts, policy_, *bound_params_, cfg_.hp);
        }

        outcome.metrics = std::move(m);
        if (cfg_.verbosity == Verbosity::detailed) {
            outcome.detail = RoundDetail{std::move(cloud), std::move(trims), std::move(selected)};
        }
    }

    SimConfig cfg_;
    TrimPolicy policy_;
    SquaredExponential kernel_;
    AttackSpec attack_;
    std::vector<AgentId> byzantine_;
    std::vector<AgentId> benign_;
    NoiseRange noise_;
    std::optional<BoundParams> bound_params_;

    std::size_t input_dim_ = 1;
    Streams streams_;
    std::size_t stream_length_ = 0;
    std::vector<Input> test_inputs_;
    std::vector<double> truth_;
    std::vector<Input> grid_;
    std::optional<TargetTransform> transform_;
    std::size_t rows_dropped_ = 0;

    std::vector<AgentState> agents_;
    std::vector<DispersionTracker> trackers_;
    std::size_t total_rounds_ = 0;
    std::uint64_t t_ = 0;
    std::uint64_t evaluated_ = 0;
};

struct RunSummary {
    std::size_t rounds_run = 0;
    std::vector<AgentId> byzantine_ids;
    std::size_t grid_size = 0;
    std::optional<RoundMetrics> final_metrics;
    std::optional<BoundReport> bounds;  // counts accumulated over every evaluated round
    std::optional<TargetTransform> target_transform;
    std::size_t rows_dropped = 0;
};

struct RunArtifact {
    std::vector<RoundMetrics> rounds;
    RunSummary summary;
};

/// Run every round of `cfg`. Rounds are evaluated every `eval_every` steps and always at the
/// end. `on_round` sees each evaluated round (including per-point detail when requested).
inline RunArtifact run_scenario(const SimConfig& cfg,
                                const std::function<void(const RoundOutcome&)>& on_round = {}) {
    Simulation sim(cfg);
    RunArtifact out;
    while (!sim.done()) {
        const bool last = sim.time() + 1 == sim.total_rounds();
        const bool evaluate = last || (sim.time() + 1) % cfg.eval_every == 0;
        RoundOutcome outcome = sim.run_round(evaluate);
        if (!outcome.metrics) {
            continue;
        }
        if (on_round) {
            on_round(outcome);
        }
        if (outcome.metrics->bounds) {
            if (!out.summary.bounds) {
                out.summary.bounds = *outcome.metrics->bounds;
            } else {
                out.summary.bounds->merge(*outcome.metrics->bounds);
            }
        }
        out.rounds.push_back(std::move(*outcome.metrics));
    }
    out.summary.rounds_run = sim.time();
    out.summary.byzantine_ids.assign(sim.byzantine_ids().begin(), sim.byzantine_ids().end());
    out.summary.grid_size = sim.grid_size();
    out.summary.final_metrics = out.rounds.back();
    out.summary.target_transform = sim.target_transform();
    out.summary.rows_dropped = sim.rows_dropped();
    return out;
}

} // namespace byzfed

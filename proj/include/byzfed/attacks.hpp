#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "byzfed/aggregation.hpp"
#include "byzfed/errors.hpp"
#include "byzfed/local_gpr.hpp"

namespace byzfed {

enum class AttackKind { none, same_value, gaussian, alte, mimic, bit_flip };

inline std::string_view to_string(AttackKind k) {
    switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::same_value: return "same-value";
    case AttackKind::gaussian: return "gaussian";
    case AttackKind::alte: return "alte";
    case AttackKind::mimic: return "mimic";
    case AttackKind::bit_flip: return "bit-flip";
    }
    return "unknown";
}

inline std::optional<AttackKind> parse_attack_kind(std::string_view s) {
    for (auto k : {AttackKind::none, AttackKind::same_value, AttackKind::gaussian, AttackKind::alte,
                   AttackKind::mimic, AttackKind::bit_flip}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

/// What the Byzantine agents send instead of their honest predictions.
///
/// Mean-channel semantics per kind:
///   same-value  mean := value
///   gaussian    mean := honest mean + N(0, gaussian_var)
///   alte        mean := avg(benign means) - alte_z * std(benign means)   (population std)
///   mimic       copy agent mimic_target's honest prediction (mean and variance)
///   bit-flip    mean := -flip_scale * honest mean
/// With `attack_variance` set, the variance channel is corrupted the same way
/// (same-value uses `variance_value`); otherwise variances pass through unchanged.
struct AttackSpec {
    AttackKind kind = AttackKind::none;
    double value = 100.0;
    double variance_value = 1e-3;
    double gaussian_var = 1.0;
    double alte_z = 1.0;
    AgentId mimic_target = 0;
    double flip_scale = 1.0;
    std::vector<AgentId> byzantine_ids;  // sorted ascending
    bool attack_variance = false;

    [[nodiscard]] bool is_byzantine(AgentId id) const {
        return std::binary_search(byzantine_ids.begin(), byzantine_ids.end(), id);
    }
};

/// Deterministic substream seed for (seed, agent, round); SplitMix64 finaliser over the mixed key.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t agent, std::uint64_t round) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ agent) ^ round);
}

/// Round context for one test point: the honest predictions of every benign agent (ascending id)
/// and the attacking agent's private generator.
struct AttackContext {
    std::span<const AgentPrediction> benign_honest;
    std::mt19937_64* rng = nullptr;
};

namespace detail {

inline std::pair<double, double> mean_and_std(std::span<const AgentPrediction> preds, bool variance_channel) {
    if (preds.empty()) {
        throw config_error("ALTE attack needs at least one benign agent");
    }
    CompensatedSum sum;
    for (const auto& p : preds) {
        sum.add(variance_channel ? p.prediction.variance : p.prediction.mean);
    }
    const double avg = sum.value() / static_cast<double>(preds.size());
    CompensatedSum sq;
    for (const auto& p : preds) {
        const double d = (variance_channel ? p.prediction.variance : p.prediction.mean) - avg;
        sq.add(d * d);
    }
    return {avg, std::sqrt(sq.value() / static_cast<double>(preds.size()))};
}

} // namespace detail

inline Prediction apply_attack(const AttackSpec& spec, const Prediction& honest, const AttackContext& ctx) {
    if (honest.provenance != Provenance::local_honest) {
        throw std::invalid_argument("attacks apply to honest local predictions only");
    }
    if (spec.kind == AttackKind::none) {
        return honest;
    }

    Prediction out = honest;
    out.provenance = Provenance::local_corrupted;
    switch (spec.kind) {
    case AttackKind::none:
        break;
    case AttackKind::same_value:
        out.mean = spec.value;
        if (spec.attack_variance) {
            out.variance = spec.variance_value;
        }
        break;
    case AttackKind::gaussian: {
        if (ctx.rng == nullptr) {
            throw std::invalid_argument("gaussian attack requires a random stream");
        }
        std::normal_distribution<double> noise(0.0, std::sqrt(spec.gaussian_var));
        out.mean = honest.mean + noise(*ctx.rng);
        if (spec.attack_variance) {
            out.variance = honest.variance + noise(*ctx.rng);
        }
        break;
    }
    case AttackKind::alte: {
        const auto [avg, sd] = detail::mean_and_std(ctx.benign_honest, false);
        out.mean = avg - spec.alte_z * sd;
        if (spec.attack_variance) {
            const auto [vavg, vsd] = detail::mean_and_std(ctx.benign_honest, true);
            out.variance = vavg - spec.alte_z * vsd;
        }
        break;
    }
    case AttackKind::mimic: {
        const auto it = std::find_if(ctx.benign_honest.begin(), ctx.benign_honest.end(),
                                     [&](const AgentPrediction& p) { return p.id == spec.mimic_target; });
        if (it == ctx.benign_honest.end() || spec.is_byzantine(spec.mimic_target)) {
            throw config_error("mimic target " + std::to_string(spec.mimic_target) + " is not a benign agent");
        }
        out.mean = it->prediction.mean;
        out.variance = it->prediction.variance;
        break;
    }
    case AttackKind::bit_flip:
        out.mean = -spec.flip_scale * honest.mean;
        if (spec.attack_variance) {
            out.variance = -spec.flip_scale * honest.variance;
        }
        break;
    }
    return out;
}

/// Seeded choice of exactly `count` Byzantine agents among n, returned sorted.
inline std::vector<AgentId> choose_byzantine_ids(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) {
        throw std::invalid_argument("more Byzantine agents than agents");
    }
    std::vector<AgentId> ids(n);
    std::iota(ids.begin(), ids.end(), AgentId{0});
    std::mt19937_64 rng(substream_seed(seed, 0xB12A27ULL, 0));
    for (std::size_t k = 0; k < count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, n - 1);
        std::swap(ids[k], ids[pick(rng)]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

} // namespace byzfed

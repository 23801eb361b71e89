#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "byzfed/errors.hpp"
#include "byzfed/kernel.hpp"
#include "byzfed/local_gpr.hpp"

namespace byzfed {

/// Neumaier-compensated running sum. Order of `add` calls fully determines the result.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Byzantine fraction alpha and trim fraction beta for n agents.
///
/// Both alpha*n and beta*n must be integers and 0 <= alpha <= beta < 1/4. The attack-free
/// configuration alpha = beta = 0 reduces the resilient rule to standard PoE.
class TrimPolicy {
public:
    TrimPolicy(std::size_t n, double alpha, double beta) : n_(n), alpha_(alpha), beta_(beta) {
        if (n == 0) {
            throw std::invalid_argument("agent count must be positive");
        }
        if (!(alpha >= 0.0) || !(beta >= 0.0) || alpha > beta || !(beta < 0.25)) {
            throw std::invalid_argument("trim policy requires 0 <= alpha <= beta < 1/4 (alpha=" +
                                        std::to_string(alpha) + ", beta=" + std::to_string(beta) + ")");
        }
        byzantine_count_ = integral_count(alpha, "alpha");
        trim_count_ = integral_count(beta, "beta");
    }

    [[nodiscard]] std::size_t n() const { return n_; }
    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double beta() const { return beta_; }
    /// alpha * n
    [[nodiscard]] std::size_t byzantine_count() const { return byzantine_count_; }
    /// beta * n
    [[nodiscard]] std::size_t trim_count() const { return trim_count_; }

private:
    std::size_t integral_count(double fraction, const char* name) const {
        const double exact = fraction * static_cast<double>(n_);
        const double rounded = std::round(exact);
        if (std::abs(exact - rounded) > 1e-9) {
            throw std::invalid_argument(std::string(name) + " * n must be an integer (got " +
                                        std::to_string(exact) + ")");
        }
        return static_cast<std::size_t>(rounded);
    }

    std::size_t n_;
    double alpha_;
    double beta_;
    std::size_t byzantine_count_ = 0;
    std::size_t trim_count_ = 0;
};

struct IdValue {
    AgentId id;
    double value;
};

struct AgentPrediction {
    AgentId id;
    Prediction prediction;
};

enum class Extreme { largest, smallest };

namespace detail {

// NaN carries no order; it is sent to the top so it is trimmed with the largest values.
inline double sort_key(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }

} // namespace detail

/// Ids of the `count` most extreme values. Ties go to the smaller agent id in both
/// directions. The returned ids are sorted ascending.
inline std::vector<AgentId> trim(std::span<const IdValue> values, std::size_t count, Extreme which) {
    if (2 * count > values.size()) {
        throw std::invalid_argument("cannot trim " + std::to_string(count) + " of " +
                                    std::to_string(values.size()) + " values from one side");
    }
    std::vector<IdValue> order(values.begin(), values.end());
    const auto by_extreme = [which](const IdValue& a, const IdValue& b) {
        const double ka = detail::sort_key(a.value);
        const double kb = detail::sort_key(b.value);
        if (ka != kb) {
            return which == Extreme::largest ? ka > kb : ka < kb;
        }
        return a.id < b.id;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(),
                      by_extreme);
    std::vector<AgentId> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        out.push_back(order[k].id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct TrimReport {
    std::vector<AgentId> kept;  // I(t) = I^mu(t) ∩ I^sigma(t)
    std::vector<AgentId> trimmed_mean_high;
    std::vector<AgentId> trimmed_mean_low;
    std::vector<AgentId> trimmed_var_high;
    std::vector<AgentId> trimmed_var_low;
};

namespace detail {

inline bool contains(const std::vector<AgentId>& sorted, AgentId id) {
    return std::binary_search(sorted.begin(), sorted.end(), id);
}

// Low side first, then the high side over whatever is left, so the two sets never overlap
// even when many agents report the same value.
inline std::pair<std::vector<AgentId>, std::vector<AgentId>> two_sided_trim(std::vector<IdValue> values,
                                                                            std::size_t count) {
    auto low = trim(values, count, Extreme::smallest);
    std::erase_if(values, [&](const IdValue& v) { return contains(low, v.id); });
    auto high = trim(values, count, Extreme::largest);
    return {std::move(high), std::move(low)};
}

} // namespace detail

/// Trim the beta*n largest and smallest reported means and variances; keep the agents that
/// survive both trims.
inline TrimReport build_kept_set(std::span<const AgentPrediction> reports, const TrimPolicy& policy) {
    if (reports.size() != policy.n()) {
        throw std::invalid_argument("expected " + std::to_string(policy.n()) + " reports, got " +
                                    std::to_string(reports.size()));
    }
    std::vector<IdValue> means;
    std::vector<IdValue> variances;
    means.reserve(reports.size());
    variances.reserve(reports.size());
    for (const auto& r : reports) {
        means.push_back({r.id, r.prediction.mean});
        variances.push_back({r.id, r.prediction.variance});
    }

    TrimReport report;
    std::tie(report.trimmed_mean_high, report.trimmed_mean_low) =
        detail::two_sided_trim(std::move(means), policy.trim_count());
    std::tie(report.trimmed_var_high, report.trimmed_var_low) =
        detail::two_sided_trim(std::move(variances), policy.trim_count());

    for (const auto& r : reports) {
        const AgentId id = r.id;
        if (detail::contains(report.trimmed_mean_high, id) || detail::contains(report.trimmed_mean_low, id) ||
            detail::contains(report.trimmed_var_high, id) || detail::contains(report.trimmed_var_low, id)) {
            continue;
        }
        if (!std::isfinite(r.prediction.mean) || !std::isfinite(r.prediction.variance)) {
            throw integrity_error("non-finite report from agent " + std::to_string(id) +
                                  " survived trimming");
        }
        report.kept.push_back(id);
    }
    std::sort(report.kept.begin(), report.kept.end());
    return report;
}

/// Precision-weighted product of experts over the given (already trimmed) predictions.
/// Sums run in ascending agent-id order with compensated addition.
inline Prediction poe_aggregate(std::span<const AgentPrediction> kept) {
    if (kept.empty()) {
        throw std::invalid_argument("PoE aggregation over an empty set");
    }
    std::vector<const AgentPrediction*> ordered;
    ordered.reserve(kept.size());
    for (const auto& k : kept) {
        ordered.push_back(&k);
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

    const AgentPrediction* ref = ordered.front();
    for (const auto* k : ordered) {
        const double v = k->prediction.variance;
        if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(k->prediction.mean)) {
            throw integrity_error("agent " + std::to_string(k->id) + " reached PoE with variance " +
                                  std::to_string(v) + " and mean " + std::to_string(k->prediction.mean));
        }
        if (v < ref->prediction.variance) {
            ref = k;
        }
    }

    // Weights relative to the most confident expert (w_ref = 1, all w in (0, 1]) and means
    // relative to its mean. Same quantities as sum(1/v) and sum(m/v), but agreeing experts
    // reproduce their common prediction exactly.
    const double v_ref = ref->prediction.variance;
    const double m_ref = ref->prediction.mean;
    CompensatedSum precision;
    CompensatedSum weighted_shift;
    for (const auto* k : ordered) {
        const double w = v_ref / k->prediction.variance;
        precision.add(w);
        weighted_shift.add(w * (k->prediction.mean - m_ref));
    }
    const double p = precision.value();
    const double mean = m_ref + weighted_shift.value() / p;
    const double variance = v_ref / (p / static_cast<double>(kept.size()));
    if (!std::isfinite(mean)) {
        throw integrity_error("PoE mean overflowed");
    }
    return Prediction{mean, variance, Provenance::cloud};
}

/// Subset of `reports` whose ids appear in `kept_ids` (sorted ascending).
inline std::vector<AgentPrediction> select(std::span<const AgentPrediction> reports,
                                           const std::vector<AgentId>& kept_ids) {
    std::vector<AgentPrediction> out;
    out.reserve(kept_ids.size());
    for (const auto& r : reports) {
        if (detail::contains(kept_ids, r.id)) {
            out.push_back(r);
        }
    }
    return out;
}

struct Aggregate {
    Prediction prediction;
    TrimReport trim;
};

/// Full cloud step: double trimming followed by PoE over the kept set.
inline Aggregate resilient_poe(std::span<const AgentPrediction> reports, const TrimPolicy& policy) {
    Aggregate out;
    out.trim = build_kept_set(reports, policy);
    const auto kept = select(reports, out.trim.kept);
    out.prediction = poe_aggregate(kept);
    return out;
}

enum class BaselineRule { median, average };

/// Coordinate-wise lower median or plain mean of the reported (mean, variance) pairs.
inline Prediction baseline_aggregate(std::span<const AgentPrediction> reports, BaselineRule rule) {
    if (reports.empty()) {
        throw std::invalid_argument("baseline aggregation over an empty set");
    }
    std::vector<const AgentPrediction*> ordered;
    for (const auto& r : reports) {
        ordered.push_back(&r);
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

    if (rule == BaselineRule::average) {
        CompensatedSum m;
        CompensatedSum v;
        for (const auto* r : ordered) {
            m.add(r->prediction.mean);
            v.add(r->prediction.variance);
        }
        const auto count = static_cast<double>(reports.size());
        return Prediction{m.value() / count, v.value() / count, Provenance::cloud};
    }

    std::vector<double> means;
    std::vector<double> vars;
    for (const auto* r : ordered) {
        means.push_back(detail::sort_key(r->prediction.mean));
        vars.push_back(detail::sort_key(r->prediction.variance));
    }
    const std::size_t mid = (reports.size() - 1) / 2;
    std::nth_element(means.begin(), means.begin() + static_cast<std::ptrdiff_t>(mid), means.end());
    std::nth_element(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(mid), vars.end());
    return Prediction{means[mid], vars[mid], Provenance::cloud};
}

enum class Aggregator { resilient_poe, standard_poe, median, average };

inline std::string_view to_string(Aggregator a) {
    switch (a) {
    case Aggregator::resilient_poe: return "resilient-poe";
    case Aggregator::standard_poe: return "standard-poe";
    case Aggregator::median: return "median";
    case Aggregator::average: return "average";
    }
    return "unknown";
}

} // namespace byzfed

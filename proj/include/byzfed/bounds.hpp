#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "byzfed/aggregation.hpp"
#include "byzfed/errors.hpp"
#include "byzfed/fusion.hpp"
#include "byzfed/kernel.hpp"
#include "byzfed/local_gpr.hpp"

namespace byzfed {

/// Attack-free error bound Theta(s) at dispersion s.
inline double theta_of(double s, const BoundParams& bp, const Hyperparams& hp) {
    if (!(s >= 0.0)) {
        throw std::invalid_argument("dispersion must be non-negative");
    }
    const double sf2 = hp.sigma_f2;
    const NoiseRange& nr = bp.noise();
    return (1.0 - kappa(s, hp) / (sf2 + nr.max_var)) * bp.eta_sup() +
           sf2 * bp.lip_eta() * s / (sf2 + nr.min_var) + bp.concentration();
}

/// Additive Byzantine penalty Delta(s); zero when alpha = 0.
inline double delta_of(double s, double alpha, double beta, const BoundParams& bp, const Hyperparams& hp) {
    if (!(alpha >= 0.0) || alpha > beta || !(beta < 0.25)) {
        throw std::invalid_argument("delta_of requires 0 <= alpha <= beta < 1/4");
    }
    const double sf2 = hp.sigma_f2;
    const NoiseRange& nr = bp.noise();
    const double k = kappa(s, hp);
    return (sf2 * sf2 + sf2 * nr.max_var - k * k) / (sf2 * nr.min_var) * (2.0 * alpha / (1.0 - 4.0 * beta)) *
           theta_of(s, bp, hp);
}

struct VarianceBounds {
    double lo;
    double hi;
};

/// Deterministic sandwich on the aggregated (and fused) predictive variance.
inline VarianceBounds variance_bounds(double beta, double d_max, const Hyperparams& hp, NoiseRange noise) {
    if (!(beta >= 0.0 && beta < 0.25)) {
        throw std::invalid_argument("variance_bounds requires 0 <= beta < 1/4");
    }
    if (!(d_max >= 0.0)) {
        throw std::invalid_argument("d_max must be non-negative");
    }
    const double sf2 = hp.sigma_f2;
    const double k = kappa(d_max, hp);
    return {(1.0 - 2.0 * beta) * (sf2 * noise.min_var / (sf2 + noise.max_var)),
            (1.0 / (1.0 - 4.0 * beta)) * (sf2 - k * k / (sf2 + noise.max_var))};
}

/// Relative slack on the hard variance check; the bounds are attained exactly in degenerate
/// cases (zero distance, beta = 0) where the aggregated value can land one ulp outside.
inline constexpr double variance_bound_rel_tol = 1e-12;

struct BoundReport {
    double theta = 0.0;
    double delta_term = 0.0;
    double var_lo = 0.0;
    double var_hi = 0.0;
    std::uint64_t cloud_checks = 0;
    std::uint64_t cloud_violations = 0;
    std::uint64_t fused_checks = 0;
    std::uint64_t fused_violations = 0;
    std::uint64_t variance_checks = 0;

    [[nodiscard]] double cloud_violation_rate() const {
        return cloud_checks == 0 ? 0.0 : static_cast<double>(cloud_violations) / static_cast<double>(cloud_checks);
    }
    [[nodiscard]] double fused_violation_rate() const {
        return fused_checks == 0 ? 0.0 : static_cast<double>(fused_violations) / static_cast<double>(fused_checks);
    }
    [[nodiscard]] double empirical_violation_rate() const {
        const auto checks = cloud_checks + fused_checks;
        return checks == 0 ? 0.0 : static_cast<double>(cloud_violations + fused_violations) / static_cast<double>(checks);
    }

    /// Accumulate counts from another round or trial; the closed-form fields keep the latest values.
    void merge(const BoundReport& other) {
        theta = other.theta;
        delta_term = other.delta_term;
        var_lo = other.var_lo;
        var_hi = other.var_hi;
        cloud_checks += other.cloud_checks;
        cloud_violations += other.cloud_violations;
        fused_checks += other.fused_checks;
        fused_violations += other.fused_violations;
        variance_checks += other.variance_checks;
    }
};

/// Everything one round produced that the verifier needs.
struct RoundArtifacts {
    std::uint64_t round = 0;
    std::span<const double> truth;                      // eta at each test point
    std::span<const Prediction> cloud;                  // one per test point
    std::span<const std::vector<Prediction>> fused;     // per benign agent, one per test point
    double d_max = 0.0;
};

/// Tally probabilistic bound violations and hard-check the variance sandwich.
/// Throws verification_failure naming the round and test point on a sandwich violation.
inline BoundReport verify_round(const RoundArtifacts& round, const TrimPolicy& policy, const BoundParams& bp,
                                const Hyperparams& hp) {
    if (round.cloud.size() != round.truth.size()) {
        throw std::invalid_argument("cloud predictions and truth differ in length");
    }
    BoundReport report;
    report.theta = theta_of(round.d_max, bp, hp);
    report.delta_term = delta_of(round.d_max, policy.alpha(), policy.beta(), bp, hp);
    const auto vb = variance_bounds(policy.beta(), round.d_max, hp, bp.noise());
    report.var_lo = vb.lo;
    report.var_hi = vb.hi;
    const double radius = report.theta + report.delta_term;

    const auto check_variance = [&](double v, std::size_t point, const char* what) {
        ++report.variance_checks;
        if (v < vb.lo * (1.0 - variance_bound_rel_tol) || v > vb.hi * (1.0 + variance_bound_rel_tol)) {
            throw verification_failure(std::string(what) + " variance " + std::to_string(v) + " outside [" +
                                       std::to_string(vb.lo) + ", " + std::to_string(vb.hi) + "] at round " +
                                       std::to_string(round.round) + ", test point " + std::to_string(point));
        }
    };

    for (std::size_t p = 0; p < round.truth.size(); ++p) {
        ++report.cloud_checks;
        if (std::abs(round.cloud[p].mean - round.truth[p]) > radius) {
            ++report.cloud_violations;
        }
        check_variance(round.cloud[p].variance, p, "cloud");
    }
    for (const auto& agent : round.fused) {
        if (agent.size() != round.truth.size()) {
            throw std::invalid_argument("fused predictions and truth differ in length");
        }
        for (std::size_t p = 0; p < agent.size(); ++p) {
            ++report.fused_checks;
            if (std::abs(agent[p].mean - round.truth[p]) > radius) {
                ++report.fused_violations;
            }
            check_variance(agent[p].variance, p, "fused");
        }
    }
    return report;
}

} // namespace byzfed

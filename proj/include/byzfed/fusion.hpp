#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

#include "byzfed/kernel.hpp"
#include "byzfed/local_gpr.hpp"

namespace byzfed {

/// Constants the error bounds and the threshold fusion rule depend on.
///
/// The sub-Gaussian parameter sigma is always derived from the hyperparameters and the
/// benign noise range; it cannot be set directly.
class BoundParams {
public:
    BoundParams(double lip_eta, double eta_sup, double gamma_d, double delta, const Hyperparams& hp,
                NoiseRange benign_noise)
        : lip_eta_(lip_eta), eta_sup_(eta_sup), gamma_d_(gamma_d), delta_(delta), noise_(benign_noise) {
        hp.validate();
        if (!(lip_eta >= 0.0) || !std::isfinite(lip_eta)) {
            throw std::invalid_argument("Lipschitz constant must be non-negative and finite");
        }
        if (!(eta_sup > 0.0) || !std::isfinite(eta_sup)) {
            throw std::invalid_argument("sup-norm bound must be positive and finite");
        }
        if (!(delta > 0.0 && delta < 1.0)) {
            throw std::invalid_argument("confidence parameter delta must lie in (0, 1)");
        }
        if (!(noise_.min_var > 0.0) || noise_.min_var > noise_.max_var) {
            throw std::invalid_argument("benign noise range must satisfy 0 < min <= max");
        }
        set_gamma_d(gamma_d);
        sigma_ = hp.sigma_f2 * noise_.max_std() / (hp.sigma_f2 + noise_.min_var);
    }

    [[nodiscard]] double lip_eta() const { return lip_eta_; }
    [[nodiscard]] double eta_sup() const { return eta_sup_; }
    [[nodiscard]] double gamma_d() const { return gamma_d_; }
    [[nodiscard]] double delta() const { return delta_; }
    [[nodiscard]] const NoiseRange& noise() const { return noise_; }
    [[nodiscard]] double sigma() const { return sigma_; }

    /// Refresh the uniform dispersion bound (e.g. once per round).
    void set_gamma_d(double gamma_d) {
        if (!(gamma_d >= 0.0) || !std::isfinite(gamma_d)) {
            throw std::invalid_argument("dispersion bound gamma_d must be non-negative and finite");
        }
        gamma_d_ = gamma_d;
    }

    /// sqrt(2 sigma^2 (ln 2 - ln delta)), shared by Gamma and Theta.
    [[nodiscard]] double concentration() const {
        return std::sqrt(2.0 * sigma_ * sigma_ * (std::log(2.0) - std::log(delta_)));
    }

private:
    double lip_eta_;
    double eta_sup_;
    double gamma_d_ = 0.0;
    double delta_;
    NoiseRange noise_;
    double sigma_ = 0.0;
};

inline double gamma(const BoundParams& bp, const Hyperparams& hp) {
    return hp.sigma_f2 * bp.lip_eta() * bp.gamma_d() / (hp.sigma_f2 + bp.noise().min_var) + bp.concentration();
}

inline double theta_hat(const BoundParams& bp, const Hyperparams& hp, double beta) {
    if (!(beta >= 0.0 && beta < 0.25)) {
        throw std::invalid_argument("theta_hat requires 0 <= beta < 1/4");
    }
    const double sf2 = hp.sigma_f2;
    return (sf2 + bp.noise().max_var - kappa(bp.gamma_d(), hp)) /
           ((1.0 - 2.0 * beta) * sf2 * bp.noise().min_var) * bp.eta_sup();
}

inline double theta_check(const Hyperparams& hp, double agent_noise_var, double d_i) {
    if (!(d_i >= 0.0)) {
        throw std::invalid_argument("agent dispersion must be non-negative");
    }
    const double sf2 = hp.sigma_f2;
    const double k = kappa(d_i, hp);
    return std::sqrt(agent_noise_var) * k / (sf2 * sf2 + sf2 * agent_noise_var - k * k);
}

enum class FusionRule { variance_compare, theta_rule, off };

inline std::string_view to_string(FusionRule r) {
    switch (r) {
    case FusionRule::variance_compare: return "variance-compare";
    case FusionRule::theta_rule: return "theta-rule";
    case FusionRule::off: return "off";
    }
    return "unknown";
}

inline std::optional<FusionRule> parse_fusion_rule(std::string_view s) {
    for (auto r : {FusionRule::variance_compare, FusionRule::theta_rule, FusionRule::off}) {
        if (s == to_string(r)) {
            return r;
        }
    }
    return std::nullopt;
}

/// Per-agent constants of the threshold rule; computed once per round rather than per point.
struct ThetaRuleTerms {
    double gamma;
    double theta_hat;
    double theta_check;
};

inline ThetaRuleTerms theta_rule_terms(const BoundParams& bp, const Hyperparams& hp, double beta,
                                       double agent_noise_var, double d_i) {
    return {gamma(bp, hp), theta_hat(bp, hp, beta), theta_check(hp, agent_noise_var, d_i)};
}

inline bool in_fused_set(FusionRule rule, const Prediction& local, const Prediction& cloud,
                         const ThetaRuleTerms& terms) {
    switch (rule) {
    case FusionRule::variance_compare:
        return local.variance > cloud.variance;
    case FusionRule::theta_rule:
        return terms.theta_hat * cloud.variance - terms.theta_check * local.variance < -terms.gamma;
    case FusionRule::off:
        return false;
    }
    return false;
}

/// Whether the cloud prediction replaces the local one at this test input.
inline bool in_fused_set(FusionRule rule, const Prediction& local, const Prediction& cloud, const BoundParams& bp,
                         const Hyperparams& hp, double beta, double agent_noise_var, double d_i) {
    if (rule == FusionRule::variance_compare || rule == FusionRule::off) {
        return in_fused_set(rule, local, cloud, ThetaRuleTerms{});
    }
    return in_fused_set(rule, local, cloud, theta_rule_terms(bp, hp, beta, agent_noise_var, d_i));
}

inline Prediction fuse(const Prediction& local, const Prediction& cloud, bool selected) {
    const Prediction& src = selected ? cloud : local;
    return Prediction{src.mean, src.variance, Provenance::fused};
}

} // namespace byzfed

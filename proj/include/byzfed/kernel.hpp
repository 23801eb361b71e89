#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace byzfed {

using AgentId = std::size_t;
using Input = std::vector<double>;

/// Kernel hyperparameters shared by every agent, plus the per-agent observation noise.
struct Hyperparams {
    double sigma_f2 = 1.0;                  // signal variance
    double length_scale = 0.1;
    std::vector<double> noise_var_per_agent;  // (sigma_e^[i])^2, indexed by agent id

    void validate() const {
        if (!(sigma_f2 > 0.0) || !std::isfinite(sigma_f2)) {
            throw std::invalid_argument("sigma_f2 must be positive and finite");
        }
        if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
            throw std::invalid_argument("length_scale must be positive and finite");
        }
        for (std::size_t i = 0; i < noise_var_per_agent.size(); ++i) {
            if (!(noise_var_per_agent[i] > 0.0) || !std::isfinite(noise_var_per_agent[i])) {
                throw std::invalid_argument("noise variance of agent " + std::to_string(i) +
                                            " must be positive and finite");
            }
        }
    }

    [[nodiscard]] double noise_var(AgentId id) const {
        if (id >= noise_var_per_agent.size()) {
            throw std::invalid_argument("no noise variance configured for agent " + std::to_string(id));
        }
        return noise_var_per_agent[id];
    }
};

/// Extremes of the noise variance over the benign agents.
struct NoiseRange {
    double min_var = 0.0;
    double max_var = 0.0;

    [[nodiscard]] double min_std() const { return std::sqrt(min_var); }
    [[nodiscard]] double max_std() const { return std::sqrt(max_var); }
};

/// Noise extremes restricted to `benign` agent ids.
inline NoiseRange benign_noise_range(const Hyperparams& hp, std::span<const AgentId> benign) {
    if (benign.empty()) {
        throw std::invalid_argument("benign agent set is empty");
    }
    NoiseRange range{hp.noise_var(benign.front()), hp.noise_var(benign.front())};
    for (AgentId id : benign) {
        const double v = hp.noise_var(id);
        range.min_var = std::min(range.min_var, v);
        range.max_var = std::max(range.max_var, v);
    }
    return range;
}

/// A stationary kernel ker(z, z') = kappa(||z - z'||) with kappa(0) = sigma_f^2,
/// kappa positive and non-increasing.
template <typename K>
concept StationaryKernel = requires(const K& k, double s) {
    { k.kappa(s) } -> std::convertible_to<double>;
    { k.signal_variance() } -> std::convertible_to<double>;
};

class SquaredExponential {
public:
    SquaredExponential(double sigma_f2, double length_scale)
        : sigma_f2_(sigma_f2), inv_two_l2_(1.0 / (2.0 * length_scale * length_scale)) {
        if (!(sigma_f2 > 0.0) || !(length_scale > 0.0)) {
            throw std::invalid_argument("squared-exponential kernel needs sigma_f2 > 0 and length_scale > 0");
        }
    }

    explicit SquaredExponential(const Hyperparams& hp) : SquaredExponential(hp.sigma_f2, hp.length_scale) {}

    [[nodiscard]] double kappa(double s) const {
        if (s < 0.0 || std::isnan(s)) {
            throw std::invalid_argument("kernel distance must be non-negative");
        }
        return sigma_f2_ * std::exp(-s * s * inv_two_l2_);
    }

    [[nodiscard]] double signal_variance() const { return sigma_f2_; }

private:
    double sigma_f2_;
    double inv_two_l2_;
};

static_assert(StationaryKernel<SquaredExponential>);

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("input dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double kappa(double s, const Hyperparams& hp) { return SquaredExponential(hp).kappa(s); }

template <StationaryKernel K>
double kernel_eval(std::span<const double> z, std::span<const double> z2, const K& kernel) {
    return kernel.kappa(euclidean_distance(z, z2));
}

inline double kernel_eval(std::span<const double> z, std::span<const double> z2, const Hyperparams& hp) {
    return kernel_eval(z, z2, SquaredExponential(hp));
}

} // namespace byzfed

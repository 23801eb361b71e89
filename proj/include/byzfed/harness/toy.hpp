#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "byzfed/local_gpr.hpp"

namespace byzfed {

/// Synthetic 1-D target. `perturbation` shifts the sin(12z) term, producing the family of
/// perturbed functions used for Monte Carlo over functions.
inline double toy_eta(double z, double perturbation = 0.0) {
    return (z * z * z - 0.5) * std::sin(3.0 * z - 0.5) + 5.0 * z * z * (std::sin(12.0 * z) + perturbation) +
           4.0 * std::cos(2.0 * z);
}

/// Per-agent training streams, index = agent id, each ordered by arrival index.
using Streams = std::vector<std::vector<TrainingPoint>>;

/// n_s uniform inputs on [0, 1] with y = eta(z) + N(0, sigma_e^[i]^2), dealt round-robin:
/// sample k goes to agent k mod n as its (k / n + 1)-th observation.
inline Streams generate_toy_stream(std::size_t n_s, std::size_t n, std::span<const double> noise_var_per_agent,
                                   std::uint64_t seed, double perturbation = 0.0) {
    if (n == 0 || n_s % n != 0) {
        throw std::invalid_argument("agent count " + std::to_string(n) + " must divide the number of training points " +
                                    std::to_string(n_s));
    }
    if (noise_var_per_agent.size() != n) {
        throw std::invalid_argument("need one noise variance per agent");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> standard(0.0, 1.0);

    Streams streams(n);
    for (auto& s : streams) {
        s.reserve(n_s / n);
    }
    for (std::size_t k = 0; k < n_s; ++k) {
        const std::size_t agent = k % n;
        const double z = unit(rng);
        const double e = std::sqrt(noise_var_per_agent[agent]) * standard(rng);
        streams[agent].push_back(TrainingPoint{{z}, toy_eta(z, perturbation) + e, k / n + 1});
    }
    return streams;
}

/// `count` evenly spaced points covering [lo, hi] inclusive.
inline std::vector<Input> uniform_grid_1d(std::size_t count, double lo = 0.0, double hi = 1.0) {
    if (count < 2) {
        throw std::invalid_argument("grid needs at least two points");
    }
    std::vector<Input> grid;
    grid.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        grid.push_back({lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1)});
    }
    return grid;
}

} // namespace byzfed

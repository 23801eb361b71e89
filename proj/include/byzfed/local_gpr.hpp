#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "byzfed/errors.hpp"
#include "byzfed/kernel.hpp"

namespace byzfed {

struct TrainingPoint {
    Input z;
    double y = 0.0;
    std::uint64_t t = 0;  // arrival index, 1-based
};

enum class Provenance { local_honest, local_corrupted, cloud, fused };

inline std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::local_honest: return "local-honest";
    case Provenance::local_corrupted: return "local-corrupted";
    case Provenance::cloud: return "cloud";
    case Provenance::fused: return "fused";
    }
    return "unknown";
}

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
    Provenance provenance = Provenance::local_honest;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// One agent's append-only streaming dataset D^[i](t).
class AgentState {
public:
    AgentState(AgentId id, double noise_var, std::size_t input_dim)
        : id_(id), noise_var_(noise_var), input_dim_(input_dim) {
        if (!(noise_var > 0.0)) {
            throw std::invalid_argument("agent noise variance must be positive");
        }
        if (input_dim == 0) {
            throw std::invalid_argument("input dimension must be at least 1");
        }
    }

    void ingest(TrainingPoint point) {
        if (point.z.size() != input_dim_) {
            throw std::invalid_argument("agent " + std::to_string(id_) + ": point has dimension " +
                                        std::to_string(point.z.size()) + ", expected " +
                                        std::to_string(input_dim_));
        }
        if (!points_.empty() && point.t <= points_.back().t) {
            throw std::invalid_argument("agent " + std::to_string(id_) +
                                        ": arrival index must be strictly increasing");
        }
        points_.push_back(std::move(point));
    }

    [[nodiscard]] AgentId id() const { return id_; }
    [[nodiscard]] double noise_var() const { return noise_var_; }
    [[nodiscard]] std::size_t input_dim() const { return input_dim_; }
    [[nodiscard]] std::span<const TrainingPoint> points() const { return points_; }
    [[nodiscard]] bool empty() const { return points_.empty(); }
    [[nodiscard]] std::size_t size() const { return points_.size(); }

private:
    AgentId id_;
    double noise_var_;
    std::size_t input_dim_;
    std::vector<TrainingPoint> points_;
};

inline AgentState ingest(AgentState state, TrainingPoint point) {
    state.ingest(std::move(point));
    return state;
}

struct NearestResult {
    const TrainingPoint* point = nullptr;
    double distance = 0.0;
};

/// Nearest stored input to `z_star` by linear scan. Ties go to the earliest arrival,
/// which is also the earliest position since the stream is append-only.
inline NearestResult nearest(const AgentState& state, std::span<const double> z_star) {
    if (state.empty()) {
        throw state_error("agent " + std::to_string(state.id()) + " has no training data");
    }
    NearestResult best;
    double best_sq = std::numeric_limits<double>::infinity();
    for (const TrainingPoint& p : state.points()) {
        if (p.z.size() != z_star.size()) {
            throw std::invalid_argument("query dimension mismatch");
        }
        double sq = 0.0;
        for (std::size_t k = 0; k < z_star.size(); ++k) {
            const double d = p.z[k] - z_star[k];
            sq += d * d;
        }
        if (sq < best_sq) {
            best_sq = sq;
            best.point = &p;
        }
    }
    best.distance = std::sqrt(best_sq);
    return best;
}

/// Nearest-neighbour GPR: condition the prior only on the closest stored observation.
template <StationaryKernel K>
Prediction local_predict(const AgentState& state, std::span<const double> z_star, const K& kernel) {
    const NearestResult nn = nearest(state, z_star);
    const double sf2 = kernel.signal_variance();
    const double k = kernel.kappa(nn.distance);
    const double s = sf2 + state.noise_var();
    return Prediction{k / s * nn.point->y, sf2 - k * k / s, Provenance::local_honest};
}

inline Prediction local_predict(const AgentState& state, std::span<const double> z_star, const Hyperparams& hp) {
    return local_predict(state, z_star, SquaredExponential(hp));
}

inline constexpr std::size_t default_full_gpr_cap = 2000;

/// Exact GP posterior conditioned on every point. Test oracle only; O(m^3).
inline Prediction full_gpr_predict(std::span<const TrainingPoint> points, std::span<const double> z_star,
                                   const Hyperparams& hp, double noise_var,
                                   std::size_t cap = default_full_gpr_cap) {
    if (points.empty()) {
        throw std::invalid_argument("full GPR needs at least one training point");
    }
    if (points.size() > cap) {
        throw std::invalid_argument("full GPR oracle limited to " + std::to_string(cap) + " points");
    }
    if (!(noise_var > 0.0)) {
        throw std::invalid_argument("noise variance must be positive");
    }
    const SquaredExponential kernel(hp);
    const auto m = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd gram(m, m);
    Eigen::VectorXd k_star(m);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& zi = points[static_cast<std::size_t>(i)].z;
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel_eval(zi, points[static_cast<std::size_t>(j)].z, kernel);
            gram(i, j) = v;
            gram(j, i) = v;
        }
        gram(i, i) += noise_var;
        k_star(i) = kernel_eval(z_star, zi, kernel);
        y(i) = points[static_cast<std::size_t>(i)].y;
    }

    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        gram.diagonal().array() += 1e-10 * hp.sigma_f2;
        llt.compute(gram);
        if (llt.info() != Eigen::Success) {
            throw numeric_error("full GPR Gram matrix is not positive definite after jitter");
        }
    }
    const Eigen::VectorXd alpha = llt.solve(y);
    const Eigen::VectorXd v = llt.solve(k_star);
    const double mean = k_star.dot(alpha);
    const double variance = kernel.signal_variance() - k_star.dot(v);
    if (!(variance > 0.0)) {
        throw numeric_error("full GPR posterior variance is not positive");
    }
    return Prediction{mean, variance, Provenance::local_honest};
}

/// Grid approximation of sup_z D(z, Z^[i](t)).
inline double dispersion(const AgentState& state, std::span<const Input> domain_grid) {
    if (domain_grid.empty()) {
        throw std::invalid_argument("dispersion grid is empty");
    }
    double worst = 0.0;
    for (const Input& g : domain_grid) {
        worst = std::max(worst, nearest(state, g).distance);
    }
    return worst;
}

/// Incremental dispersion: caches each grid point's distance to the nearest ingested input,
/// so a new observation costs one pass over the grid instead of a full rescan.
class DispersionTracker {
public:
    explicit DispersionTracker(std::span<const Input> grid)
        : grid_(grid), best_(grid.size(), std::numeric_limits<double>::infinity()) {
        if (grid.empty()) {
            throw std::invalid_argument("dispersion grid is empty");
        }
    }

    void observe(std::span<const double> z) {
        for (std::size_t g = 0; g < grid_.size(); ++g) {
            const double d = euclidean_distance(grid_[g], z);
            if (d < best_[g]) {
                best_[g] = d;
            }
        }
    }

    [[nodiscard]] double value() const {
        double worst = 0.0;
        for (double d : best_) {
            worst = std::max(worst, d);
        }
        return worst;
    }

private:
    std::span<const Input> grid_;
    std::vector<double> best_;
};

} // namespace byzfed

#pragma once

// Independent re-derivations used as test oracles. Written directly from the closed forms,
// sharing no code with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "byzfed/local_gpr.hpp"

namespace oracle {

struct Consts {
    double sf2;
    double ell;
    double ev_min;  // noise variance extremes over benign agents
    double ev_max;
    double lip;
    double sup;
    double delta;
};

inline double k(const Consts& c, double s) { return c.sf2 * std::exp(-(s * s) / (2.0 * c.ell * c.ell)); }

inline double sigma(const Consts& c) { return c.sf2 * std::sqrt(c.ev_max) / (c.sf2 + c.ev_min); }

inline double conc(const Consts& c) {
    const double s = sigma(c);
    return std::sqrt(2.0 * s * s * std::log(2.0 / c.delta));
}

inline double gamma(const Consts& c, double gd) { return c.sf2 * c.lip * gd / (c.sf2 + c.ev_min) + conc(c); }

inline double theta_hat(const Consts& c, double beta, double gd) {
    return c.sup * (c.sf2 + c.ev_max - k(c, gd)) / ((1 - 2 * beta) * c.sf2 * c.ev_min);
}

inline double theta_check(const Consts& c, double ev, double d) {
    const double kk = k(c, d);
    return std::sqrt(ev) * kk / (c.sf2 * (c.sf2 + ev) - kk * kk);
}

inline double big_theta(const Consts& c, double s) {
    return c.sup * (1 - k(c, s) / (c.sf2 + c.ev_max)) + c.sf2 * c.lip * s / (c.sf2 + c.ev_min) + conc(c);
}

inline double big_delta(const Consts& c, double s, double alpha, double beta) {
    const double kk = k(c, s);
    return (c.sf2 * (c.sf2 + c.ev_max) - kk * kk) / (c.sf2 * c.ev_min) * 2 * alpha / (1 - 4 * beta) *
           big_theta(c, s);
}

inline double var_lo(const Consts& c, double beta) { return (1 - 2 * beta) * c.sf2 * c.ev_min / (c.sf2 + c.ev_max); }

inline double var_hi(const Consts& c, double beta, double d) {
    const double kk = k(c, d);
    return (c.sf2 - kk * kk / (c.sf2 + c.ev_max)) / (1 - 4 * beta);
}

/// Index of the nearest point by full distance table; ties -> lowest index.
inline std::size_t nearest_index(const std::vector<byzfed::TrainingPoint>& pts, const std::vector<double>& q) {
    std::vector<double> d(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < q.size(); ++j) {
            acc += (pts[i].z[j] - q[j]) * (pts[i].z[j] - q[j]);
        }
        d[i] = acc;
    }
    return static_cast<std::size_t>(std::min_element(d.begin(), d.end()) - d.begin());
}

/// Textbook PoE with a naive left-to-right loop.
inline std::pair<double, double> naive_poe(const std::vector<double>& m, const std::vector<double>& v) {
    double prec = 0;
    double wm = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        prec += 1 / v[i];
        wm += m[i] / v[i];
    }
    return {wm / prec, static_cast<double>(m.size()) / prec};
}

/// PoE evaluated the way the library pins it: weights and means taken relative to the
/// lowest-variance expert (first such id on ties), Neumaier sums in the given order.
inline std::pair<double, double> compensated_poe(const std::vector<double>& m, const std::vector<double>& v) {
    auto sum = [](const std::vector<double>& xs) {
        double s = 0;
        double c = 0;
        for (double x : xs) {
            const double t = s + x;
            c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
            s = t;
        }
        return s + c;
    };
    const std::size_t r = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    std::vector<double> w(m.size());
    std::vector<double> wd(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        w[i] = v[r] / v[i];
        wd[i] = w[i] * (m[i] - m[r]);
    }
    const double p = sum(w);
    return {m[r] + sum(wd) / p, v[r] / (p / static_cast<double>(m.size()))};
}

} // namespace oracle

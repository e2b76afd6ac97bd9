#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pathwise/grid.hpp"
#include "pathwise/parallel.hpp"
#include "pathwise/random.hpp"

namespace pathwise {

// --------------------------------------------------------------------------
// Price models. MixedGBM perturbs the log price with a fractional term whose
// Hurst index exceeds 1/2, so the pathwise quadratic variation of log S stays
// sigma^2 t. WeakGBM drives the exponential with a process whose marginals
// are Brownian but whose quadratic variation is not t.
// --------------------------------------------------------------------------

struct GBM {
    double sigma = 0.2;
    double mu = 0.0;
    double s0 = 1.0;
};

struct MixedGBM {
    double sigma = 0.2;
    double mu = 0.0;
    double s0 = 1.0;
    double eta = 0.5;    // scale of the fractional perturbation
    double hurst = 0.75; // must lie in (1/2, 1)
};

struct WeakGBM {
    double sigma = 0.2;
    double s0 = 1.0;
    double mu = 0.0; // optional drift added in the exponent
};

using PriceModel = std::variant<GBM, MixedGBM, WeakGBM>;

inline std::string model_label(const PriceModel& model) {
    if (std::holds_alternative<GBM>(model)) return "gbm";
    if (std::holds_alternative<MixedGBM>(model)) return "mixed_gbm";
    return "weak_gbm";
}

// --------------------------------------------------------------------------
// Brownian motion
// --------------------------------------------------------------------------

inline PathEnsemble gen_brownian(const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths) {
    if (n_paths < 1) throw std::invalid_argument("gen_brownian: n_paths must be >= 1");
    PathEnsemble out(grid, n_paths, seed, "brownian");
    const int n = grid.n_steps();
    const double vol = std::sqrt(grid.step());
    parallel_for(n_paths, [&](std::size_t p) {
        Rng rng = path_rng(seed, p, "brownian");
        auto path = out.path(p);
        path[0] = 0.0;
        for (int i = 0; i < n; ++i) path[i + 1] = path[i] + vol * rng.next_gaussian();
    });
    return out;
}

// --------------------------------------------------------------------------
// Fractional Brownian motion, exact simulation by Cholesky factorization of
// the increment covariance. O(n^2) memory and O(n^3) factorization; a hard
// cap keeps that honest at desk scale.
// --------------------------------------------------------------------------

inline double fbm_covariance(double hurst, double s, double t) {
    const double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
}

namespace detail {

// In-place lower Cholesky factor of a symmetric positive definite matrix
// stored row-major.
inline void cholesky_in_place(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double* row_i = a.data() + i * n;
        for (std::size_t j = 0; j <= i; ++j) {
            const double* row_j = a.data() + j * n;
            double s = row_i[j];
            for (std::size_t k = 0; k < j; ++k) s -= row_i[k] * row_j[k];
            if (j < i) {
                row_i[j] = s / row_j[j];
            } else {
                if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
                row_i[j] = std::sqrt(s);
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) row_i[j] = 0.0;
    }
}

// Lower Cholesky factor of the fBm increment covariance on a uniform grid.
inline std::vector<double> fbm_increment_factor(double hurst, const TimeGrid& grid) {
    const std::size_t n = static_cast<std::size_t>(grid.n_steps());
    const double h2 = 2.0 * hurst;
    const double step_pow = std::pow(grid.step(), h2);
    // stationary increments: cov(dB_i, dB_j) = step^{2H} g(|i-j|)
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k);
        const double left = (k == 0) ? 1.0 : std::pow(kk - 1.0, h2);
        g[k] = 0.5 * (std::pow(kk + 1.0, h2) + left - 2.0 * std::pow(kk, h2));
    }
    std::vector<double> m(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m[i * n + j] = step_pow * g[i > j ? i - j : j - i];
    cholesky_in_place(m, n);
    return m;
}

inline void fill_fbm_path(std::span<double> path, const std::vector<double>& factor,
                          std::size_t n, Rng& rng) {
    std::vector<double> z(n);
    for (auto& v : z) v = rng.next_gaussian();
    path[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = factor.data() + i * n;
        double inc = 0.0;
        for (std::size_t k = 0; k <= i; ++k) inc += row[k] * z[k];
        path[i + 1] = path[i] + inc;
    }
}

} // namespace detail

inline PathEnsemble gen_fbm(const TimeGrid& grid, double hurst, std::uint64_t seed,
                            std::size_t n_paths, int exact_cap = 8192) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("gen_fbm: hurst must lie in (0,1)");
    if (n_paths < 1) throw std::invalid_argument("gen_fbm: n_paths must be >= 1");
    if (grid.n_steps() > exact_cap)
        throw std::length_error("gen_fbm: grid exceeds the exact-method cap of " +
                                std::to_string(exact_cap) + " steps");
    PathEnsemble out(grid, n_paths, seed, "fbm");
    const auto factor = detail::fbm_increment_factor(hurst, grid);
    const std::size_t n = static_cast<std::size_t>(grid.n_steps());
    parallel_for(n_paths, [&](std::size_t p) {
        Rng rng = path_rng(seed, p, "fbm");
        detail::fill_fbm_path(out.path(p), factor, n, rng);
    });
    return out;
}

// --------------------------------------------------------------------------
// Weak Brownian motion of order 1: B on [0, 1/2], then
// B_{1/2} + (sqrt(2) - 1) B_{t - 1/2} on (1/2, 1]. Every marginal is N(0, t)
// while the quadratic variation density drops to (sqrt(2) - 1)^2 after 1/2.
// --------------------------------------------------------------------------

inline PathEnsemble gen_weak_bm1(const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths) {
    if (grid.n_steps() % 2 != 0)
        throw std::invalid_argument("gen_weak_bm1: n_steps must be even so t = 1/2 is a grid node");
    if (n_paths < 1) throw std::invalid_argument("gen_weak_bm1: n_paths must be >= 1");
    PathEnsemble out(grid, n_paths, seed, "weak_bm1");
    const int half = grid.n_steps() / 2;
    const double vol = std::sqrt(grid.step());
    const double a = std::sqrt(2.0) - 1.0;
    parallel_for(n_paths, [&](std::size_t p) {
        Rng rng = path_rng(seed, p, "weak_bm1");
        std::vector<double> b(half + 1);
        b[0] = 0.0;
        for (int i = 0; i < half; ++i) b[i + 1] = b[i] + vol * rng.next_gaussian();
        auto path = out.path(p);
        for (int i = 0; i <= half; ++i) path[i] = b[i];
        for (int i = half + 1; i <= grid.n_steps(); ++i) path[i] = b[half] + a * b[i - half];
    });
    return out;
}

// Quadratic variation density of the order-1 weak Brownian motion, per grid
// cell [t_i, t_{i+1}).
inline std::vector<double> weak_bm1_qv_density(const TimeGrid& grid) {
    const double a2 = (std::sqrt(2.0) - 1.0) * (std::sqrt(2.0) - 1.0);
    std::vector<double> f(grid.n_steps());
    for (int i = 0; i < grid.n_steps(); ++i)
        f[i] = (grid.time(i) < 0.5 * grid.horizon()) ? 1.0 : a2;
    return f;
}

// --------------------------------------------------------------------------
// Price processes (strictly positive by construction)
// --------------------------------------------------------------------------

namespace detail {

inline void validate_price_model(const PriceModel& model) {
    const auto check = [](double s0, double sigma) {
        if (!(s0 > 0.0)) throw std::invalid_argument("gen_price: s0 must be positive");
        if (sigma < 0.0) throw std::invalid_argument("gen_price: sigma must be nonnegative");
    };
    if (const auto* g = std::get_if<GBM>(&model)) {
        check(g->s0, g->sigma);
    } else if (const auto* m = std::get_if<MixedGBM>(&model)) {
        check(m->s0, m->sigma);
        if (m->eta < 0.0) throw std::invalid_argument("gen_price: eta must be nonnegative");
        if (!(m->hurst > 0.5 && m->hurst < 1.0))
            throw std::invalid_argument("gen_price: MixedGBM hurst must lie in (1/2, 1)");
    } else {
        const auto& w = std::get<WeakGBM>(model);
        check(w.s0, w.sigma);
    }
}

} // namespace detail

inline PathEnsemble gen_price(const PriceModel& model, const TimeGrid& grid, std::uint64_t seed,
                              std::size_t n_paths) {
    detail::validate_price_model(model);
    if (n_paths < 1) throw std::invalid_argument("gen_price: n_paths must be >= 1");
    const int n = grid.n_steps();
    const double dt = grid.step();
    const double vol = std::sqrt(dt);

    if (const auto* g = std::get_if<GBM>(&model)) {
        PathEnsemble out(grid, n_paths, seed, "gbm");
        const double drift = g->mu - 0.5 * g->sigma * g->sigma;
        parallel_for(n_paths, [&](std::size_t p) {
            Rng rng = path_rng(seed, p, "gbm");
            auto path = out.path(p);
            double w = 0.0;
            path[0] = g->s0;
            for (int i = 1; i <= n; ++i) {
                w += vol * rng.next_gaussian();
                path[i] = g->s0 * std::exp(g->sigma * w + drift * grid.time(i));
            }
        });
        return out;
    }

    if (const auto* m = std::get_if<MixedGBM>(&model)) {
        PathEnsemble out(grid, n_paths, seed, "mixed_gbm");
        const double drift = m->mu - 0.5 * m->sigma * m->sigma;
        const auto factor = detail::fbm_increment_factor(m->hurst, grid);
        const std::size_t nn = static_cast<std::size_t>(n);
        parallel_for(n_paths, [&](std::size_t p) {
            Rng rng = path_rng(seed, p, "mixed_gbm");
            auto path = out.path(p);
            std::vector<double> frac(nn + 1);
            double w = 0.0;
            path[0] = m->s0;
            std::vector<double> w_nodes(nn + 1, 0.0);
            for (std::size_t i = 1; i <= nn; ++i) {
                w += vol * rng.next_gaussian();
                w_nodes[i] = w;
            }
            detail::fill_fbm_path(frac, factor, nn, rng);
            for (std::size_t i = 1; i <= nn; ++i) {
                const double log_s = m->sigma * w_nodes[i] + m->eta * frac[i] +
                                     drift * grid.time(static_cast<int>(i));
                path[i] = m->s0 * std::exp(log_s);
            }
        });
        return out;
    }

    const auto& wk = std::get<WeakGBM>(model);
    PathEnsemble driver = gen_weak_bm1(grid, seed, n_paths);
    PathEnsemble out(grid, n_paths, seed, "weak_gbm");
    const double drift = wk.mu - 0.5 * wk.sigma * wk.sigma;
    parallel_for(n_paths, [&](std::size_t p) {
        auto x = driver.path(p);
        auto path = out.path(p);
        for (int i = 0; i <= n; ++i)
            path[i] = wk.s0 * std::exp(wk.sigma * x[i] + drift * grid.time(i));
    });
    return out;
}

} // namespace pathwise

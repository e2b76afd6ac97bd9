#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pathwise/amartingale.hpp"
#include "pathwise/grid.hpp"
#include "pathwise/parallel.hpp"
#include "pathwise/paths.hpp"
#include "pathwise/regularize.hpp"
#include "pathwise/stats.hpp"

namespace pathwise {

// Proportion of wealth invested in the risky asset: a constant, or one
// tabulated path (left-continuous sampling convention applies either way).
using ProportionProcess = std::variant<double, SamplePath>;

namespace detail {

inline double proportion_at(const ProportionProcess& theta, int i) {
    if (const auto* c = std::get_if<double>(&theta)) return *c;
    return std::get<SamplePath>(theta).values[i];
}

} // namespace detail

// Share-based wealth: X(t) = x0 + int_0^t h d^-S.
inline SamplePath wealth_from_shares(double x0, const SamplePath& h, const SamplePath& s,
                                     RegParams params = {}) {
    require_same_grid(h.grid, s.grid, "wealth_from_shares");
    auto integral = forward_integral(s.grid, h.values, s.values, params);
    for (auto& v : integral) v += x0;
    return SamplePath(s.grid, std::move(integral));
}

// A = log S - log S_0 + 1/2 int S^{-2} d[S]. For geometric Brownian motion
// this recovers sigma W_t + mu t up to discretization.
inline SamplePath log_price_transform(const SamplePath& s, RegParams params = {}) {
    const TimeGrid& grid = s.grid;
    const int n = grid.n_steps();
    for (double v : s.values)
        if (!(v > 0.0)) throw std::invalid_argument("log_price_transform: prices must be positive");
    const auto qv = quadratic_variation(grid, s.values, params);
    std::vector<double> a(n + 1, 0.0);
    const double log_s0 = std::log(s.values[0]);
    double correction = 0.0;
    for (int i = 0; i < n; ++i) {
        correction += 0.5 * (qv[i + 1] - qv[i]) / (s.values[i] * s.values[i]);
        a[i + 1] = std::log(s.values[i + 1]) - log_s0 + correction;
    }
    return SamplePath(grid, std::move(a));
}

// Proportion-parameterized strictly positive wealth:
//   X^theta = x0 exp( int theta d^-A + int (1 - theta) dV - 1/2 int theta^2 d[A] ).
inline SamplePath wealth_from_proportions(double x0, const ProportionProcess& theta,
                                          const SamplePath& a, const SamplePath& v,
                                          RegParams params = {}) {
    if (!(x0 > 0.0)) throw std::invalid_argument("wealth_from_proportions: x0 must be positive");
    require_same_grid(a.grid, v.grid, "wealth_from_proportions");
    if (const auto* tab = std::get_if<SamplePath>(&theta))
        require_same_grid(tab->grid, a.grid, "wealth_from_proportions");

    const TimeGrid& grid = a.grid;
    const int n = grid.n_steps();
    const auto qv_a = quadratic_variation(grid, a.values, params);

    std::vector<double> theta_path(n + 1);
    for (int i = 0; i <= n; ++i) theta_path[i] = detail::proportion_at(theta, i);
    const auto gains = forward_integral(grid, theta_path, a.values, params);

    std::vector<double> out(n + 1, x0);
    double stieltjes_v = 0.0;
    double qv_theta = 0.0;
    for (int i = 0; i < n; ++i) {
        stieltjes_v += (1.0 - theta_path[i]) * (v.values[i + 1] - v.values[i]);
        qv_theta += theta_path[i] * theta_path[i] * (qv_a[i + 1] - qv_a[i]);
        out[i + 1] = x0 * std::exp(gains[i + 1] + stieltjes_v - 0.5 * qv_theta);
    }
    return SamplePath(grid, std::move(out));
}

inline SamplePath linear_bv_path(const TimeGrid& grid, double rate) {
    std::vector<double> v(grid.n_nodes());
    for (int i = 0; i <= grid.n_steps(); ++i) v[i] = rate * grid.time(i);
    return SamplePath(grid, std::move(v));
}

// --------------------------------------------------------------------------
// Log-utility scan over constant proportions, common random numbers across
// the theta grid. The analytic reference (mu - r) / sigma^2 is reported for
// models driven by an exact Brownian exponent; for the weak-driver model the
// realized quadratic variation is smaller than t, so the empirical argmax
// legitimately deviates from that reference.
// --------------------------------------------------------------------------

struct UtilityScanResult {
    std::vector<double> thetas;
    std::vector<double> estimates; // E[log X_1^theta]
    std::vector<double> std_errors;
    std::size_t argmax_index = 0;
    bool boundary_argmax = false; // argmax on the grid edge: inconclusive scan
    std::optional<double> analytic_reference;
    std::size_t n_paths = 0;
};

namespace detail {

inline double model_sigma(const PriceModel& model) {
    if (const auto* g = std::get_if<GBM>(&model)) return g->sigma;
    if (const auto* m = std::get_if<MixedGBM>(&model)) return m->sigma;
    return std::get<WeakGBM>(model).sigma;
}

inline double model_mu(const PriceModel& model) {
    if (const auto* g = std::get_if<GBM>(&model)) return g->mu;
    if (const auto* m = std::get_if<MixedGBM>(&model)) return m->mu;
    return std::get<WeakGBM>(model).mu;
}

} // namespace detail

inline UtilityScanResult log_utility_scan(const PriceModel& model, double rate_r,
                                          std::span<const double> theta_grid, const TimeGrid& grid,
                                          std::uint64_t seed, std::size_t n_paths,
                                          RegParams params = {}) {
    if (theta_grid.empty()) throw std::invalid_argument("log_utility_scan: empty theta grid");
    for (std::size_t i = 1; i < theta_grid.size(); ++i)
        if (!(theta_grid[i] > theta_grid[i - 1]))
            throw std::invalid_argument("log_utility_scan: theta grid must be sorted");

    PathEnsemble prices = gen_price(model, grid, seed, n_paths);
    const SamplePath v = linear_bv_path(grid, rate_r);

    // terminal log-wealth per (theta, path), filled path-parallel
    std::vector<double> table(theta_grid.size() * n_paths);
    parallel_for(n_paths, [&](std::size_t p) {
        const SamplePath s = prices.extract(p);
        const SamplePath a = log_price_transform(s, params);
        for (std::size_t k = 0; k < theta_grid.size(); ++k) {
            const SamplePath wealth =
                wealth_from_proportions(1.0, theta_grid[k], a, v, params);
            table[k * n_paths + p] = std::log(wealth.values.back());
        }
    });

    UtilityScanResult out;
    out.thetas.assign(theta_grid.begin(), theta_grid.end());
    out.n_paths = n_paths;
    out.estimates.resize(theta_grid.size());
    out.std_errors.resize(theta_grid.size());
    for (std::size_t k = 0; k < theta_grid.size(); ++k) {
        const Moments m = moments(std::span<const double>(table.data() + k * n_paths, n_paths));
        out.estimates[k] = m.mean;
        out.std_errors[k] = m.std_error();
        if (m.mean > out.estimates[out.argmax_index]) out.argmax_index = k;
    }
    out.boundary_argmax =
        out.argmax_index == 0 || out.argmax_index + 1 == theta_grid.size();

    const double sigma = detail::model_sigma(model);
    if (sigma > 0.0 &&
        (std::holds_alternative<GBM>(model) || std::holds_alternative<WeakGBM>(model)))
        out.analytic_reference = (detail::model_mu(model) - rate_r) / (sigma * sigma);
    return out;
}

// Build M = A - V - pi * [A] along a fresh ensemble and hand it to the
// martingale test: at the optimal proportion the compensated log price is
// driftless for the gradient-strategy family, away from it the constant
// strategy picks up the residual drift.
inline MartingaleTestResult verify_optimality_amartingale(
    const PriceModel& model, double rate_r, double pi, const StrategyFamily& family,
    const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths,
    std::span<const double> checkpoints, RegParams params, double z_crit) {
    if (!(detail::model_sigma(model) > 0.0))
        throw std::invalid_argument("verify_optimality_amartingale: sigma must be positive");
    PathEnsemble prices = gen_price(model, grid, seed, n_paths);
    PathEnsemble m_ensemble(grid, n_paths, seed, model_label(model) + "+optimality");
    parallel_for(n_paths, [&](std::size_t p) {
        const SamplePath s = prices.extract(p);
        const SamplePath a = log_price_transform(s, params);
        const auto qv_a = quadratic_variation(grid, a.values, params);
        auto dst = m_ensemble.path(p);
        for (int i = 0; i <= grid.n_steps(); ++i)
            dst[i] = a.values[i] - rate_r * grid.time(i) - pi * qv_a[i];
    });
    return test_amartingale(m_ensemble, family, checkpoints, params, z_crit);
}

} // namespace pathwise

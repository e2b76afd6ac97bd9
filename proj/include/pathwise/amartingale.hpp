#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pathwise/calculus.hpp"
#include "pathwise/grid.hpp"
#include "pathwise/parallel.hpp"
#include "pathwise/regularize.hpp"
#include "pathwise/stats.hpp"

namespace pathwise {

// --------------------------------------------------------------------------
// Strategy families. A Markov strategy carries its generating field Psi and
// trades theta_t = dPsi/dx(t, X_t); a tabulated strategy supplies one
// integrand path per ensemble member. Sampling is left-continuous: theta at
// t_i sees path values up to and including t_i.
// --------------------------------------------------------------------------

struct MarkovStrategy {
    std::string id;
    SmoothField generating_field; // theta = d/dx of this field
};

struct TabulatedStrategy {
    std::string id;
    std::vector<SamplePath> per_path;
};

using Strategy = std::variant<MarkovStrategy, TabulatedStrategy>;

struct StrategyFamily {
    std::string label;
    std::vector<Strategy> strategies;
};

inline const std::string& strategy_id(const Strategy& s) {
    if (const auto* m = std::get_if<MarkovStrategy>(&s)) return m->id;
    return std::get<TabulatedStrategy>(s).id;
}

// One z-statistic per (strategy, checkpoint). The verdict is
// failure-to-reject, never proof: the family tested is named in the result so
// reports stay explicit about how much of the strategy class was covered.
struct MartingaleTestResult {
    struct Cell {
        std::string strategy_id;
        double checkpoint = 0.0;
        double mean = 0.0;
        double stdev = 0.0;
        double z = 0.0;
        std::size_t n_paths = 0;
        bool pass = true;
        std::string note;
    };
    std::string family_label;
    double z_crit = 3.0;
    std::vector<Cell> cells;
    bool pass = true;
};

// Monte Carlo test of E[ int_0^t theta d^-M ] = 0 at each checkpoint.
// Integrands are evaluated along `evaluation_paths` when given (integrating
// against M), otherwise along M itself. That distinction matters for
// compensated processes, where the strategy class is pinned to the original
// driver, not to the compensated one.
inline MartingaleTestResult test_amartingale(const PathEnsemble& m_ensemble,
                                             const StrategyFamily& family,
                                             std::span<const double> checkpoints, RegParams params,
                                             double z_crit,
                                             const PathEnsemble* evaluation_paths = nullptr) {
    const TimeGrid& grid = m_ensemble.grid();
    if (evaluation_paths) require_same_grid(grid, evaluation_paths->grid(), "test_amartingale");
    std::vector<int> cp_index;
    cp_index.reserve(checkpoints.size());
    for (double t : checkpoints) cp_index.push_back(grid.index_of(t));

    MartingaleTestResult result;
    result.family_label = family.label;
    result.z_crit = z_crit;
    const std::size_t n_paths = m_ensemble.n_paths();
    const int n = grid.n_steps();

    for (const auto& strategy : family.strategies) {
        // per-path integral values at every checkpoint, filled independently
        std::vector<double> integrals(n_paths * checkpoints.size());
        parallel_for(n_paths, [&](std::size_t p) {
            auto m_path = m_ensemble.path(p);
            std::span<const double> eval =
                evaluation_paths ? evaluation_paths->path(p) : m_path;
            std::vector<double> theta(n + 1);
            if (const auto* mk = std::get_if<MarkovStrategy>(&strategy)) {
                for (int i = 0; i <= n; ++i)
                    theta[i] = mk->generating_field.dx(grid.time(i), eval[i]);
            } else {
                const auto& tab = std::get<TabulatedStrategy>(strategy);
                if (tab.per_path.size() != n_paths)
                    throw std::invalid_argument("test_amartingale: tabulated strategy size mismatch");
                theta = tab.per_path[p].values;
            }
            const auto integral = forward_integral(grid, theta, m_path, params);
            for (std::size_t c = 0; c < cp_index.size(); ++c)
                integrals[p * cp_index.size() + c] = integral[cp_index[c]];
        });

        for (std::size_t c = 0; c < cp_index.size(); ++c) {
            std::vector<double> column(n_paths);
            for (std::size_t p = 0; p < n_paths; ++p) column[p] = integrals[p * cp_index.size() + c];
            const Moments mom = moments(column);
            MartingaleTestResult::Cell cell;
            cell.strategy_id = strategy_id(strategy);
            cell.checkpoint = checkpoints[c];
            cell.mean = mom.mean;
            cell.stdev = mom.stdev;
            cell.n_paths = n_paths;
            if (mom.stdev > 0.0) {
                cell.z = mom.mean / mom.std_error();
                cell.pass = std::abs(cell.z) <= z_crit;
            } else if (mom.mean == 0.0) {
                cell.z = 0.0;
                cell.pass = true;
            } else {
                cell.z = std::numeric_limits<double>::infinity();
                cell.pass = false;
                cell.note = "degenerate integrand: zero variance with nonzero mean";
            }
            result.pass = result.pass && cell.pass;
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

// --------------------------------------------------------------------------
// Compensation of an order-1 weak Brownian motion with quadratic variation
// density f: removes the drift E[int theta d^-X] picks up from f deviating
// from 1, turning X into a martingale for the class of gradient strategies.
// The compensated path is
//   M_t = X_t - int_0^t (1 - f_s) X_s / (2 s) ds.
// The integrand has an integrable sqrt(s)/s singularity at s = 0; the first
// cell is handled by a midpoint rule with X taken at the right node, an
// O(step^{1/2}) error buried in Monte Carlo noise.
// --------------------------------------------------------------------------

inline PathEnsemble compensate_weak_bm(const PathEnsemble& x, std::span<const double> f) {
    const TimeGrid& grid = x.grid();
    const int n = grid.n_steps();
    if (static_cast<int>(f.size()) != n)
        throw std::invalid_argument("compensate_weak_bm: f must hold one value per grid cell");
    for (double v : f)
        if (!(v > 0.0)) throw std::invalid_argument("compensate_weak_bm: f must be positive");

    PathEnsemble out(grid, x.n_paths(), x.seed(), x.generator_id() + "+compensated");
    const double dt = grid.step();
    parallel_for(x.n_paths(), [&](std::size_t p) {
        auto src = x.path(p);
        auto dst = out.path(p);
        dst[0] = src[0];
        // first cell: midpoint in s, right-node value of X
        double acc = (1.0 - f[0]) * src[1] / (2.0 * (0.5 * dt)) * dt;
        dst[1] = src[1] - acc;
        for (int i = 1; i < n; ++i) {
            const double g_left = (1.0 - f[i]) * src[i] / (2.0 * grid.time(i));
            const double g_right = (1.0 - f[i]) * src[i + 1] / (2.0 * grid.time(i + 1));
            acc += 0.5 * (g_left + g_right) * dt;
            dst[i + 1] = src[i + 1] - acc;
        }
    });
    return out;
}

} // namespace pathwise

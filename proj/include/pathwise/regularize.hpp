#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pathwise/grid.hpp"

namespace pathwise {

// Regularization window. The smoothing parameter is tied to the grid,
// eps = m * step, so every estimator below is a plain sum over grid cells and
// the m = 1 case coincides with classical forward Riemann sums.
struct RegParams {
    int m = 1;
};

namespace detail {

inline void check_reg(const TimeGrid& grid, const RegParams& params, const char* what) {
    if (params.m < 1 || params.m > grid.n_steps())
        throw std::invalid_argument(std::string(what) + ": window m must lie in [1, n_steps]");
}

} // namespace detail

// Forward integral I(eps, Y, X, t) = (1/eps) int_0^t Y_s (X_{s+eps} - X_s) ds,
// discretized with the left-endpoint rule; X is clamped at the right edge of
// the grid. For m = 1 the value at t_j is exactly sum_{i<j} Y_i (X_{i+1}-X_i).
inline std::vector<double> forward_integral(const TimeGrid& grid, std::span<const double> y,
                                            std::span<const double> x, RegParams params = {}) {
    detail::check_reg(grid, params, "forward_integral");
    const int n = grid.n_steps();
    const int m = params.m;
    std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const int up = (i + m < n) ? i + m : n;
        acc += y[i] * (x[up] - x[i]);
        out[i + 1] = acc / m;
    }
    return out;
}

inline SamplePath forward_integral(const SamplePath& y, const SamplePath& x, RegParams params = {}) {
    require_same_grid(y.grid, x.grid, "forward_integral");
    return SamplePath(x.grid, forward_integral(x.grid, y.values, x.values, params));
}

// Covariation C(eps, X, Y, t) = (1/eps) int_0^t (Y_{s+eps}-Y_s)(X_{s+eps}-X_s) ds.
// Symmetric in its arguments by construction; for m = 1 it is the realized
// covariation sum dX dY.
inline std::vector<double> covariation(const TimeGrid& grid, std::span<const double> x,
                                       std::span<const double> y, RegParams params = {}) {
    detail::check_reg(grid, params, "covariation");
    const int n = grid.n_steps();
    const int m = params.m;
    std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const int up = (i + m < n) ? i + m : n;
        acc += (y[up] - y[i]) * (x[up] - x[i]);
        out[i + 1] = acc / m;
    }
    return out;
}

inline SamplePath covariation(const SamplePath& x, const SamplePath& y, RegParams params = {}) {
    require_same_grid(x.grid, y.grid, "covariation");
    return SamplePath(x.grid, covariation(x.grid, x.values, y.values, params));
}

inline std::vector<double> quadratic_variation(const TimeGrid& grid, std::span<const double> x,
                                               RegParams params = {}) {
    return covariation(grid, x, x, params);
}

inline SamplePath quadratic_variation(const SamplePath& x, RegParams params = {}) {
    return SamplePath(x.grid, quadratic_variation(x.grid, x.values, params));
}

// --------------------------------------------------------------------------
// Convergence studies: how an estimator approaches a per-path reference as
// the grid refines and the window shrinks.
// --------------------------------------------------------------------------

struct ConvergenceTable {
    struct Row {
        int n_steps = 0;
        int m = 0;
        double mean_value = 0.0; // ensemble mean of the statistic itself
        double mean_abs_error = 0.0;
        double rms_error = 0.0;
    };
    std::vector<Row> rows;
    // true when, for every m, the RMS column decreases along n_list
    bool rms_monotone_in_n = true;
};

using PathFamily = std::function<PathEnsemble(const TimeGrid&, std::uint64_t seed)>;
using PathStatistic = std::function<double(const SamplePath&, RegParams)>;

inline ConvergenceTable convergence_study(const PathFamily& family, const PathStatistic& statistic,
                                          const PathStatistic& reference, std::span<const int> m_list,
                                          std::span<const int> n_list, std::uint64_t seed) {
    if (m_list.empty() || n_list.empty())
        throw std::invalid_argument("convergence_study: empty m_list or n_list");
    ConvergenceTable table;
    for (int m : m_list) {
        double prev_rms = -1.0;
        for (int n : n_list) {
            TimeGrid grid(n);
            PathEnsemble ensemble = family(grid, seed);
            const RegParams params{m};
            double abs_sum = 0.0;
            double sq_sum = 0.0;
            double value_sum = 0.0;
            for (std::size_t p = 0; p < ensemble.n_paths(); ++p) {
                SamplePath path = ensemble.extract(p);
                const double value = statistic(path, params);
                const double err = value - reference(path, params);
                value_sum += value;
                abs_sum += std::abs(err);
                sq_sum += err * err;
            }
            const double count = static_cast<double>(ensemble.n_paths());
            ConvergenceTable::Row row;
            row.n_steps = n;
            row.m = m;
            row.mean_value = value_sum / count;
            row.mean_abs_error = abs_sum / count;
            row.rms_error = std::sqrt(sq_sum / count);
            if (prev_rms >= 0.0 && row.rms_error > prev_rms) table.rms_monotone_in_n = false;
            prev_rms = row.rms_error;
            table.rows.push_back(row);
        }
    }
    return table;
}

} // namespace pathwise

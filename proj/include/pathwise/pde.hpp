#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace pathwise {

// Thomas algorithm for tridiagonal systems. Diagonals are passed by value so
// a solve never mutates the caller's operator.
inline std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                             std::vector<double> upper, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw std::invalid_argument("solve_tridiagonal: inconsistent sizes");
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    return rhs;
}

// Tridiagonal representation of a spatial operator L: row j couples nodes
// j-1, j, j+1. Boundary rows are identity rows (zero operator), which pins
// boundary values to their terminal data - the discrete form of the
// zero-second-derivative boundary condition for this family of equations.
struct SpatialOperator {
    std::vector<double> lower, diag, upper;
};

// Backward Crank-Nicolson march for d/dt v + L v = 0 on [0, T] with terminal
// data at T. The first step out of the terminal row is replaced by two
// implicit-Euler half-steps (Rannacher smoothing) so payoff kinks do not ring.
// `build` returns the operator at a given time (midpoint of each step).
// Returns the full surface, row k = time node k, ascending in time.
inline std::vector<std::vector<double>> march_backward(
    std::span<const double> times, std::vector<double> terminal,
    const std::function<SpatialOperator(double)>& build, bool rannacher = true) {
    const std::size_t nt = times.size();
    const std::size_t nx = terminal.size();
    if (nt < 2) throw std::invalid_argument("march_backward: need at least two time nodes");
    for (double v : terminal)
        if (!std::isfinite(v)) throw std::invalid_argument("march_backward: non-finite terminal values");

    std::vector<std::vector<double>> surface(nt);
    surface[nt - 1] = std::move(terminal);

    const auto implicit_euler = [&](const std::vector<double>& from, double t_mid, double dt) {
        SpatialOperator op = build(t_mid);
        std::vector<double> diag(nx), lower(nx), upper(nx);
        for (std::size_t j = 0; j < nx; ++j) {
            lower[j] = -dt * op.lower[j];
            diag[j] = 1.0 - dt * op.diag[j];
            upper[j] = -dt * op.upper[j];
        }
        return solve_tridiagonal(std::move(lower), std::move(diag), std::move(upper), from);
    };

    for (std::size_t k = nt - 1; k-- > 0;) {
        const double t_hi = times[k + 1];
        const double t_lo = times[k];
        const double dt = t_hi - t_lo;
        const bool smooth_step = rannacher && (k == nt - 2);
        if (smooth_step) {
            auto half = implicit_euler(surface[k + 1], t_hi - 0.25 * dt, 0.5 * dt);
            surface[k] = implicit_euler(half, t_hi - 0.75 * dt, 0.5 * dt);
            continue;
        }
        SpatialOperator op = build(0.5 * (t_lo + t_hi));
        std::vector<double> rhs(nx), lower(nx), diag(nx), upper(nx);
        const auto& prev = surface[k + 1];
        for (std::size_t j = 0; j < nx; ++j) {
            const double lo = (j > 0) ? op.lower[j] * prev[j - 1] : 0.0;
            const double hi = (j + 1 < nx) ? op.upper[j] * prev[j + 1] : 0.0;
            rhs[j] = prev[j] + 0.5 * dt * (lo + op.diag[j] * prev[j] + hi);
            lower[j] = -0.5 * dt * op.lower[j];
            diag[j] = 1.0 - 0.5 * dt * op.diag[j];
            upper[j] = -0.5 * dt * op.upper[j];
        }
        surface[k] = solve_tridiagonal(std::move(lower), std::move(diag), std::move(upper),
                                       std::move(rhs));
    }
    return surface;
}

} // namespace pathwise

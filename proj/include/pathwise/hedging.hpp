#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pathwise/grid.hpp"
#include "pathwise/parallel.hpp"
#include "pathwise/paths.hpp"
#include "pathwise/pde.hpp"
#include "pathwise/regularize.hpp"

namespace pathwise {

// --------------------------------------------------------------------------
// Contingent claims
// --------------------------------------------------------------------------

struct EuropeanClaim {
    std::function<double(double)> payoff; // psi(S_1)
    std::optional<double> kink;           // price where the payoff has a kink, if any
    std::string label = "european";
};

struct MultiDateClaim {
    std::vector<double> dates; // t_1 < ... < t_n = 1, n <= 3
    std::function<double(std::span<const double>)> payoff;
    std::string label = "multidate";
};

struct AsianClaim {
    std::function<double(double)> payoff; // psi applied to (int S dt - K) / S_1
    double strike = 1.0;
    std::optional<double> kink; // state value where psi kinks, if any
    std::string label = "asian";
};

using Claim = std::variant<EuropeanClaim, MultiDateClaim, AsianClaim>;

inline const std::string& claim_label(const Claim& c) {
    if (const auto* e = std::get_if<EuropeanClaim>(&c)) return e->label;
    if (const auto* m = std::get_if<MultiDateClaim>(&c)) return m->label;
    return std::get<AsianClaim>(c).label;
}

// --------------------------------------------------------------------------
// Solver parameters. sigma is either a constant or a function of (t, price)
// bounded between sigma_lower and sigma_upper; the bounds are required for
// functional sigma and double as the rejection test for degenerate inputs.
// --------------------------------------------------------------------------

struct PdeParams {
    std::variant<double, std::function<double(double, double)>> sigma = 0.2;
    double sigma_lower = 0.0; // c1 (only consulted for functional sigma)
    double sigma_upper = 0.0; // c2
    double rate_r = 0.0;
    double s0 = 1.0;
    int n_space = 512;
    int n_time = 512;
    double width = 6.0; // half-width of the log-price domain in units of sigma*sqrt(T)
    bool rannacher = true;
    int frozen_nodes = 64; // nodes per frozen dimension for multi-date claims
    std::optional<double> state_lo; // explicit Asian state domain override
    std::optional<double> state_hi;
};

namespace detail {

inline double sigma_at(const PdeParams& p, double t, double price) {
    if (const auto* c = std::get_if<double>(&p.sigma)) return *c;
    return std::get<std::function<double(double, double)>>(p.sigma)(t, price);
}

inline std::pair<double, double> sigma_bounds(const PdeParams& p) {
    if (const auto* c = std::get_if<double>(&p.sigma)) {
        if (!(*c > 0.0)) throw std::invalid_argument("PdeParams: constant sigma must be positive");
        return {*c, *c};
    }
    if (!(p.sigma_lower > 0.0) || !(p.sigma_upper >= p.sigma_lower))
        throw std::invalid_argument("PdeParams: functional sigma needs bounds 0 < c1 <= c2");
    return {p.sigma_lower, p.sigma_upper};
}

inline void check_params(const PdeParams& p) {
    if (p.n_space < 8 || p.n_time < 2) throw std::invalid_argument("PdeParams: grid too coarse");
    if (!(p.s0 > 0.0)) throw std::invalid_argument("PdeParams: s0 must be positive");
    if (p.rate_r < 0.0) throw std::invalid_argument("PdeParams: rate_r must be nonnegative");
    if (!(p.width > 0.0)) throw std::invalid_argument("PdeParams: width must be positive");
    sigma_bounds(p);
}

} // namespace detail

// --------------------------------------------------------------------------
// Value surface v(t, y) and its price derivative on a rectangular grid.
// The delta column is a central difference of v against the state nodes,
// one-sided at boundaries, so it is exact wherever v is linear in the state.
// --------------------------------------------------------------------------

class PdeSolution {
public:
    std::vector<double> times;  // ascending, times.front() = 0, times.back() = 1
    std::vector<double> states; // ascending state nodes (price, or xi for Asian claims)
    std::vector<std::vector<double>> value; // value[k][j]
    std::vector<std::vector<double>> delta;
    std::string claim_name;
    std::string coordinate; // "price" or "state"
    std::string note;
    double rate_r = 0.0;
    double s0 = 1.0;

    bool contains(double y) const { return y >= states.front() && y <= states.back(); }

    double value_at(double t, double y) const { return interpolate(value, t, y); }
    double delta_at(double t, double y) const { return interpolate(delta, t, y); }

    void finalize_delta() {
        delta.assign(value.size(), std::vector<double>(states.size(), 0.0));
        const std::size_t nx = states.size();
        for (std::size_t k = 0; k < value.size(); ++k) {
            const auto& row = value[k];
            auto& d = delta[k];
            d[0] = (row[1] - row[0]) / (states[1] - states[0]);
            for (std::size_t j = 1; j + 1 < nx; ++j)
                d[j] = (row[j + 1] - row[j - 1]) / (states[j + 1] - states[j - 1]);
            d[nx - 1] = (row[nx - 1] - row[nx - 2]) / (states[nx - 1] - states[nx - 2]);
        }
    }

private:
    double interpolate(const std::vector<std::vector<double>>& grid_values, double t,
                       double y) const {
        if (!contains(y)) throw std::out_of_range("PdeSolution: state outside domain");
        const auto it = std::upper_bound(states.begin(), states.end(), y);
        std::size_t j = (it == states.begin()) ? 0 : static_cast<std::size_t>(it - states.begin() - 1);
        if (j + 1 >= states.size()) j = states.size() - 2;
        const double wy = (y - states[j]) / (states[j + 1] - states[j]);

        const double t_clamped = std::clamp(t, times.front(), times.back());
        const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
        std::size_t k = static_cast<std::size_t>((t_clamped - times.front()) / dt);
        if (k + 1 >= times.size()) k = times.size() - 2;
        const double wt = std::clamp((t_clamped - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);

        const double lo = (1.0 - wy) * grid_values[k][j] + wy * grid_values[k][j + 1];
        const double hi = (1.0 - wy) * grid_values[k + 1][j] + wy * grid_values[k + 1][j + 1];
        return (1.0 - wt) * lo + wt * hi;
    }
};

namespace detail {

// accuracy-budget invariant: the march never takes time steps longer than the
// spatial resolution
inline void check_step_budget(int n_time, double domain_width, int n_space) {
    if (1.0 / n_time > domain_width / n_space * (1.0 + 1e-12))
        throw std::invalid_argument("PdeParams: time step exceeds the space step");
}

inline std::vector<double> uniform_nodes(double lo, double hi, int n_cells) {
    std::vector<double> out(static_cast<std::size_t>(n_cells) + 1);
    const double d = (hi - lo) / n_cells;
    for (int j = 0; j <= n_cells; ++j) out[j] = lo + j * d;
    out.back() = hi;
    return out;
}

// Log-price nodes around log(s0), optionally shifted by less than one cell so
// that a payoff kink lands exactly on a node.
inline std::vector<double> log_price_nodes(const PdeParams& p, std::optional<double> kink_price) {
    const auto [c1, c2] = sigma_bounds(p);
    const double half = p.width * c2; // T = 1 throughout
    const double x0 = std::log(p.s0);
    double lo = x0 - half;
    const double dx = 2.0 * half / p.n_space;
    if (kink_price && *kink_price > 0.0) {
        const double xk = std::log(*kink_price);
        if (xk > lo + dx && xk < lo + 2.0 * half - dx) {
            const double pos = (xk - lo) / dx;
            lo += (pos - std::round(pos)) * dx;
        }
    }
    std::vector<double> x(static_cast<std::size_t>(p.n_space) + 1);
    for (int j = 0; j <= p.n_space; ++j) x[j] = lo + j * dx;
    return x;
}

// Spatial operator for d/dt v + 1/2 sig(t,y)^2 (dxx - dx) v = 0 in x = log y.
// The first-derivative stencil uses the fitted weight 2(cosh dx - 1)/(dx sinh dx)
// instead of 1, which puts every function linear in the price y in the exact
// kernel of the discrete operator.
struct LogDiffusionBuilder {
    const PdeParams* params;
    std::vector<double> prices; // e^{x_j}
    double dx;
    bool discounted; // true for the European equation: sigma read at y e^{rt}

    SpatialOperator operator()(double t) const {
        const std::size_t nx = prices.size();
        SpatialOperator op;
        op.lower.assign(nx, 0.0);
        op.diag.assign(nx, 0.0);
        op.upper.assign(nx, 0.0);
        const double fitted = 2.0 * (std::cosh(dx) - 1.0) / (dx * std::sinh(dx));
        const double inv_dx2 = 1.0 / (dx * dx);
        const double half_fit = fitted / (2.0 * dx);
        for (std::size_t j = 1; j + 1 < nx; ++j) {
            const double y = prices[j];
            const double sig = sigma_at(*params, t,
                                        discounted ? y * std::exp(params->rate_r * t) : y);
            const double c = 0.5 * sig * sig;
            op.lower[j] = c * (inv_dx2 + half_fit);
            op.diag[j] = -2.0 * c * inv_dx2;
            op.upper[j] = c * (inv_dx2 - half_fit);
        }
        return op; // boundary rows stay zero: values pinned to terminal data
    }
};

inline void validate_sigma_samples(const PdeParams& p, std::span<const double> prices,
                                   bool discounted) {
    const auto [c1, c2] = sigma_bounds(p);
    const double slack = 1e-12;
    for (int k = 0; k <= 8; ++k) {
        const double t = k / 8.0;
        for (double y : prices) {
            const double sig = sigma_at(p, t, discounted ? y * std::exp(p.rate_r * t) : y);
            if (!(sig >= c1 * (1.0 - slack)) || !(sig <= c2 * (1.0 + slack)))
                throw std::invalid_argument("PdeParams: sigma leaves [c1, c2] on the grid");
        }
    }
}

} // namespace detail

// --------------------------------------------------------------------------
// European claims: solve d/dt v + 1/2 sig~(t,y)^2 y^2 dyy v = 0 backward from
// v(1, y) = psi(y e^r) e^{-r} in the discounted price coordinate, on a
// truncated log-price domain of half-width `width * c2`.
// --------------------------------------------------------------------------

inline PdeSolution solve_european(const EuropeanClaim& claim, const PdeParams& params) {
    detail::check_params(params);
    const auto x_nodes = detail::log_price_nodes(params, claim.kink);
    detail::check_step_budget(params.n_time, x_nodes.back() - x_nodes.front(), params.n_space);
    std::vector<double> prices(x_nodes.size());
    for (std::size_t j = 0; j < prices.size(); ++j) prices[j] = std::exp(x_nodes[j]);
    detail::validate_sigma_samples(params, prices, true);

    const double er = std::exp(params.rate_r);
    std::vector<double> terminal(prices.size());
    for (std::size_t j = 0; j < prices.size(); ++j) {
        terminal[j] = claim.payoff(prices[j] * er) / er;
        if (!std::isfinite(terminal[j]))
            throw std::invalid_argument("solve_european: non-finite terminal value");
    }

    detail::LogDiffusionBuilder builder{&params, prices, x_nodes[1] - x_nodes[0], true};
    const auto times = detail::uniform_nodes(0.0, 1.0, params.n_time);

    PdeSolution out;
    out.times = times;
    out.states = std::move(prices);
    out.value = march_backward(times, std::move(terminal), builder, params.rannacher);
    out.claim_name = claim.label;
    out.coordinate = "price";
    out.rate_r = params.rate_r;
    out.s0 = params.s0;
    out.finalize_delta();
    return out;
}

// --------------------------------------------------------------------------
// Claims on finitely many dates, r = 0: backward recursion of one-dimensional
// problems. On (t_{i-1}, t_i] the value function carries the realized prices
// at earlier dates as frozen coordinates, discretized on a subset of the
// space grid (so stitch-time payoff kinks sit on nodes); stitching evaluates
// the next interval's family on the diagonal with linear interpolation in the
// frozen coordinate.
// --------------------------------------------------------------------------

struct MultiDateSolution {
    struct IntervalFamily {
        double t_lo = 0.0, t_hi = 1.0;
        std::vector<PdeSolution> slices; // frozen tensor, last frozen index fastest
    };
    std::vector<double> dates;
    // frozen-coordinate nodes per fixing date t_1 .. t_{n-1}; each is a
    // stride-regular subset of the space grid spanning width * c2 * sqrt(t_d)
    std::vector<std::vector<double>> frozen;
    std::vector<IntervalFamily> intervals; // intervals[i-1] covers (t_{i-1}, t_i]
    double x0 = 0.0;
    std::string claim_name;
};

inline MultiDateSolution solve_multidate(const MultiDateClaim& claim, const PdeParams& params) {
    detail::check_params(params);
    if (params.rate_r != 0.0)
        throw std::invalid_argument("solve_multidate: stated setting requires r = 0");
    const std::size_t n = claim.dates.size();
    if (n < 1 || n > 3) throw std::invalid_argument("solve_multidate: supports 1 to 3 dates");
    if (!(claim.dates.front() > 0.0))
        throw std::invalid_argument("solve_multidate: first date must be positive");
    for (std::size_t i = 1; i < n; ++i)
        if (!(claim.dates[i] > claim.dates[i - 1]))
            throw std::invalid_argument("solve_multidate: dates must be strictly increasing");
    if (std::abs(claim.dates.back() - 1.0) > 1e-12)
        throw std::invalid_argument("solve_multidate: last date must be the horizon");

    const auto x_nodes = detail::log_price_nodes(params, std::nullopt);
    detail::check_step_budget(params.n_time, x_nodes.back() - x_nodes.front(), params.n_space);
    std::vector<double> prices(x_nodes.size());
    for (std::size_t j = 0; j < prices.size(); ++j) prices[j] = std::exp(x_nodes[j]);
    detail::validate_sigma_samples(params, prices, false);

    // Frozen grids: one per fixing date, each a stride-regular subset of the
    // space nodes centered on the spot, spanning width * c2 * sqrt(t_d). The
    // subset property puts stitch-time payoff kinks exactly on space nodes.
    const int f_count = std::min(params.frozen_nodes, params.n_space + 1);
    std::vector<std::vector<double>> frozen(n >= 1 ? n - 1 : 0);
    for (std::size_t d = 0; d + 1 < n; ++d) {
        const long stride = std::max<long>(
            1, std::lround(params.n_space * std::sqrt(claim.dates[d]) / (f_count - 1)));
        const long span = stride * (f_count - 1);
        long start = params.n_space / 2 - span / 2;
        start = std::clamp<long>(start, 0, params.n_space - span);
        frozen[d].resize(f_count);
        for (int q = 0; q < f_count; ++q)
            frozen[d][q] = prices[static_cast<std::size_t>(start + stride * q)];
    }

    detail::LogDiffusionBuilder builder{&params, prices, x_nodes[1] - x_nodes[0], false};

    MultiDateSolution out;
    out.dates = claim.dates;
    out.frozen = frozen;
    out.claim_name = claim.label;
    out.intervals.resize(n);

    const auto slice_count = [&](std::size_t interval) {
        std::size_t c = 1;
        for (std::size_t d = 1; d < interval; ++d) c *= frozen[d - 1].size();
        return c;
    };
    const auto frozen_tuple = [&](std::size_t interval, std::size_t flat) {
        std::vector<double> tuple(interval - 1);
        for (std::size_t d = interval - 1; d-- > 0;) {
            tuple[d] = frozen[d][flat % frozen[d].size()];
            flat /= frozen[d].size();
        }
        return tuple;
    };

    for (std::size_t interval = n; interval >= 1; --interval) {
        auto& fam = out.intervals[interval - 1];
        fam.t_lo = (interval == 1) ? 0.0 : claim.dates[interval - 2];
        fam.t_hi = claim.dates[interval - 1];
        const int steps = std::max(2, static_cast<int>(std::lround(
                                          params.n_time * (fam.t_hi - fam.t_lo))));
        const auto times = detail::uniform_nodes(fam.t_lo, fam.t_hi, steps);
        const std::size_t count = slice_count(interval);
        fam.slices.resize(count);

        parallel_for(count, [&](std::size_t flat) {
            const auto tuple = frozen_tuple(interval, flat);
            std::vector<double> terminal(prices.size());
            if (interval == n) {
                std::vector<double> args(n);
                std::copy(tuple.begin(), tuple.end(), args.begin());
                for (std::size_t j = 0; j < prices.size(); ++j) {
                    args[n - 1] = prices[j];
                    terminal[j] = claim.payoff(args);
                }
            } else {
                // stitch: v^i(t_i, tuple, y) = v^{i+1}(t_i, tuple, y, y);
                // linear in the new frozen coordinate, extrapolating at the
                // fringe (exact for claims linear in that coordinate)
                const auto& next = out.intervals[interval];
                const auto& grid_d = frozen[interval - 1];
                for (std::size_t j = 0; j < prices.size(); ++j) {
                    const double y = prices[j];
                    auto it = std::upper_bound(grid_d.begin(), grid_d.end(), y);
                    std::size_t q = (it == grid_d.begin())
                                        ? 0
                                        : static_cast<std::size_t>(it - grid_d.begin() - 1);
                    if (q + 1 >= grid_d.size()) q = grid_d.size() - 2;
                    const double w = (y - grid_d[q]) / (grid_d[q + 1] - grid_d[q]);
                    const std::size_t base = flat * grid_d.size();
                    terminal[j] = (1.0 - w) * next.slices[base + q].value.front()[j] +
                                  w * next.slices[base + q + 1].value.front()[j];
                }
            }
            PdeSolution sol;
            sol.times = times;
            sol.states = prices;
            sol.value = march_backward(times, std::move(terminal), builder, params.rannacher);
            sol.claim_name = claim.label;
            sol.coordinate = "price";
            sol.s0 = params.s0;
            sol.finalize_delta();
            fam.slices[flat] = std::move(sol);
        });
    }

    out.x0 = out.intervals.front().slices.front().value_at(0.0, params.s0);
    return out;
}

// --------------------------------------------------------------------------
// Asian claims with constant sigma: one-dimensional reduction in the state
// xi_t = (int_0^t S ds - K) / S_t. The PDE
//   1/2 sig^2 y^2 dyy v + (1 - r y) dy v + dt v = 0,  v(1, y) = psi(y)
// lives on a state domain containing negatives (xi_0 = -K/S_0 < 0); the
// diffusion degenerates at y = 0, so the advection term switches to one-sided
// differences wherever it dominates the cell (hybrid upwinding).
// --------------------------------------------------------------------------

namespace detail {

struct AsianBuilder {
    double sigma;
    double rate_r;
    std::vector<double> states;
    double dy;

    // Exponentially fitted diffusion: central differences everywhere, with
    // the diffusion coefficient inflated to (|a| dy / 2) coth(|a| dy / 2c).
    // Where the diffusion degenerates this collapses to plain upwinding; away
    // from the degeneracy it is second-order and never oscillates. Linear
    // functions of the state stay in the exact kernel.
    static double fitted_diffusion(double c, double a, double dy) {
        const double half_cell = 0.5 * std::abs(a) * dy;
        if (half_cell == 0.0) return c;
        if (c <= 1e-300) return half_cell;
        const double rho = half_cell / c;
        if (rho > 20.0) return half_cell;
        if (rho < 1e-4) return c * (1.0 + rho * rho / 3.0);
        return half_cell / std::tanh(rho);
    }

    SpatialOperator operator()(double) const {
        const std::size_t nx = states.size();
        SpatialOperator op;
        op.lower.assign(nx, 0.0);
        op.diag.assign(nx, 0.0);
        op.upper.assign(nx, 0.0);
        for (std::size_t j = 0; j < nx; ++j) {
            const double y = states[j];
            const double a = 1.0 - rate_r * y;
            if (j == 0) { // one-sided toward the interior
                op.diag[j] = -a / dy;
                op.upper[j] = a / dy;
                continue;
            }
            if (j + 1 == nx) {
                op.diag[j] = a / dy;
                op.lower[j] = -a / dy;
                continue;
            }
            const double c = fitted_diffusion(0.5 * sigma * sigma * y * y, a, dy);
            op.lower[j] = c / (dy * dy) - a / (2.0 * dy);
            op.diag[j] = -2.0 * c / (dy * dy);
            op.upper[j] = c / (dy * dy) + a / (2.0 * dy);
        }
        return op;
    }
};

} // namespace detail

inline PdeSolution solve_asian(const AsianClaim& claim, const PdeParams& params) {
    detail::check_params(params);
    const auto* sigma_c = std::get_if<double>(&params.sigma);
    if (!sigma_c) throw std::invalid_argument("solve_asian: sigma must be constant");
    if (!(claim.strike > 0.0)) throw std::invalid_argument("solve_asian: strike must be positive");
    const double sigma = *sigma_c;
    const double xi0 = -claim.strike / params.s0;

    // Size the state domain from a pilot simulation of the running state.
    double pilot_hi = xi0;
    double pilot_lo = xi0;
    {
        const TimeGrid pilot_grid(256);
        const std::size_t pilot_paths = 4000;
        PathEnsemble pilot = gen_price(GBM{sigma, params.rate_r, params.s0}, pilot_grid,
                                       0xA51A17ULL, pilot_paths);
        std::vector<double> his(pilot_paths), los(pilot_paths);
        const double dt = pilot_grid.step();
        for (std::size_t p = 0; p < pilot_paths; ++p) {
            auto s = pilot.path(p);
            double integral = 0.0, hi = xi0, lo = xi0;
            for (int i = 1; i <= pilot_grid.n_steps(); ++i) {
                integral += 0.5 * dt * (s[i - 1] + s[i]);
                const double xi = (integral - claim.strike) / s[i];
                hi = std::max(hi, xi);
                lo = std::min(lo, xi);
            }
            his[p] = hi;
            los[p] = lo;
        }
        std::sort(his.begin(), his.end());
        std::sort(los.begin(), los.end());
        pilot_hi = his[static_cast<std::size_t>(0.999 * (pilot_paths - 1))];
        pilot_lo = los[static_cast<std::size_t>(0.001 * (pilot_paths - 1))];
    }

    double lo = params.state_lo ? *params.state_lo : std::min(xi0 - 4.0 * sigma, pilot_lo - sigma);
    double hi = params.state_hi ? *params.state_hi : pilot_hi * 1.3 + 2.0 * sigma;
    const double dy = (hi - lo) / params.n_space;
    if (claim.kink && *claim.kink > lo + dy && *claim.kink < hi - dy) {
        const double pos = (*claim.kink - lo) / dy;
        lo += (pos - std::round(pos)) * dy; // put the kink on a node
        hi = lo + dy * params.n_space;
    }
    if (lo > xi0 || hi < pilot_hi)
        throw std::invalid_argument("solve_asian: state domain does not cover [xi0, xi_max]");
    detail::check_step_budget(params.n_time, hi - lo, params.n_space);
    auto states = detail::uniform_nodes(lo, hi, params.n_space);

    std::vector<double> terminal(states.size());
    for (std::size_t j = 0; j < states.size(); ++j) {
        terminal[j] = claim.payoff(states[j]);
        if (!std::isfinite(terminal[j]))
            throw std::invalid_argument("solve_asian: non-finite terminal value");
    }

    detail::AsianBuilder builder{sigma, params.rate_r, states, dy};
    const auto times = detail::uniform_nodes(0.0, 1.0, params.n_time);

    PdeSolution out;
    out.times = times;
    out.states = std::move(states);
    out.value = march_backward(times, std::move(terminal), builder, params.rannacher);
    out.claim_name = claim.label;
    out.coordinate = "state";
    out.rate_r = params.rate_r;
    out.s0 = params.s0;
    out.note = "initial state xi0 = -K/s0 (consistent with Z_0 = -K)";
    out.finalize_delta();
    return out;
}

// --------------------------------------------------------------------------
// Replication engine: delta-hedge along simulated paths and compare terminal
// wealth with the payoff. Wealth accrues in discounted coordinates,
//   X~_{i+1} = X~_i + h_i (S~_{i+1} - S~_i),
// and is re-inflated at the horizon. Paths that leave the PDE domain are
// flagged and excluded, never clamped; more than 5% exclusions fails the run.
// --------------------------------------------------------------------------

struct HedgeReport {
    double x0 = 0.0;
    std::vector<double> terminal_wealth;
    std::vector<double> payoff;
    std::vector<double> error; // wealth - payoff, NaN for excluded paths
    std::vector<std::uint8_t> excluded;
    std::size_t n_excluded = 0;
    double exclusion_rate = 0.0;
    bool domain_failure = false; // exclusion rate above 5%
    double mean_error = 0.0;
    double rms_error = 0.0;
    double max_abs_error = 0.0;
    double rel_rms = 0.0; // rms / x0
    std::string claim_name;
    std::string model_label;
    int n_steps = 0;
    std::size_t n_paths = 0;
    std::string note;
};

using HedgeSolutions = std::variant<PdeSolution, MultiDateSolution>;

namespace detail {

inline void finalize_report(HedgeReport& rep) {
    double sum = 0.0, sq = 0.0, max_abs = 0.0;
    std::size_t n_ok = 0;
    for (std::size_t p = 0; p < rep.error.size(); ++p) {
        if (rep.excluded[p]) continue;
        const double e = rep.error[p];
        sum += e;
        sq += e * e;
        max_abs = std::max(max_abs, std::abs(e));
        ++n_ok;
    }
    rep.n_excluded = rep.error.size() - n_ok;
    rep.exclusion_rate =
        rep.error.empty() ? 0.0 : static_cast<double>(rep.n_excluded) / rep.error.size();
    rep.domain_failure = rep.exclusion_rate > 0.05;
    if (n_ok > 0) {
        rep.mean_error = sum / static_cast<double>(n_ok);
        rep.rms_error = std::sqrt(sq / static_cast<double>(n_ok));
        rep.max_abs_error = max_abs;
        rep.rel_rms = (rep.x0 != 0.0) ? rep.rms_error / std::abs(rep.x0) : rep.rms_error;
    }
}

} // namespace detail

inline HedgeReport replicate(const Claim& claim, const HedgeSolutions& solutions,
                             const PathEnsemble& prices, RegParams params = {}) {
    const TimeGrid& grid = prices.grid();
    const int n = grid.n_steps();
    if (params.m != 1)
        throw std::invalid_argument("replicate: rebalancing uses the m = 1 forward sum");

    HedgeReport rep;
    rep.claim_name = claim_label(claim);
    rep.model_label = prices.generator_id();
    rep.n_steps = n;
    rep.n_paths = prices.n_paths();
    rep.terminal_wealth.assign(prices.n_paths(), 0.0);
    rep.payoff.assign(prices.n_paths(), 0.0);
    rep.error.assign(prices.n_paths(), 0.0);
    rep.excluded.assign(prices.n_paths(), 0);

    if (const auto* euro = std::get_if<EuropeanClaim>(&claim)) {
        const auto& sol = std::get<PdeSolution>(solutions);
        const double r = sol.rate_r;
        rep.x0 = sol.value_at(0.0, sol.s0);
        parallel_for(prices.n_paths(), [&](std::size_t p) {
            auto s = prices.path(p);
            double wealth = sol.value_at(0.0, s[0]);
            bool ok = true;
            for (int i = 0; i < n && ok; ++i) {
                const double t = grid.time(i);
                const double s_disc = s[i] * std::exp(-r * t);
                if (!sol.contains(s_disc)) {
                    ok = false;
                    break;
                }
                const double h = sol.delta_at(t, s_disc);
                const double s_next = s[i + 1] * std::exp(-r * grid.time(i + 1));
                wealth += h * (s_next - s_disc);
            }
            if (!ok) {
                rep.excluded[p] = 1;
                rep.error[p] = std::numeric_limits<double>::quiet_NaN();
                return;
            }
            rep.terminal_wealth[p] = wealth * std::exp(r);
            rep.payoff[p] = euro->payoff(s[n]);
            rep.error[p] = rep.terminal_wealth[p] - rep.payoff[p];
        });
        detail::finalize_report(rep);
        return rep;
    }

    if (const auto* multi = std::get_if<MultiDateClaim>(&claim)) {
        const auto& sol = std::get<MultiDateSolution>(solutions);
        std::vector<int> date_idx;
        for (double d : sol.dates) date_idx.push_back(grid.index_of(d));
        rep.x0 = sol.x0;

        parallel_for(prices.n_paths(), [&](std::size_t p) {
            auto s = prices.path(p);
            double wealth = sol.x0;
            bool ok = true;
            std::size_t interval = 0; // 0-based interval index
            std::vector<std::size_t> q(2, 0);
            std::vector<double> w(2, 0.0);
            for (int i = 0; i < n && ok; ++i) {
                const double t = grid.time(i);
                while (interval + 1 < sol.intervals.size() && i >= date_idx[interval]) ++interval;
                const auto& fam = sol.intervals[interval];
                // weights in the frozen coordinates for realized fixings
                const std::size_t n_frozen = interval;
                double h = 0.0;
                for (std::size_t d = 0; d < n_frozen; ++d) {
                    const auto& grid_d = sol.frozen[d];
                    const double fix = s[date_idx[d]];
                    if (fix < grid_d.front() || fix > grid_d.back()) {
                        ok = false;
                        break;
                    }
                    auto it = std::upper_bound(grid_d.begin(), grid_d.end(), fix);
                    q[d] = (it == grid_d.begin())
                               ? 0
                               : static_cast<std::size_t>(it - grid_d.begin() - 1);
                    if (q[d] + 1 >= grid_d.size()) q[d] = grid_d.size() - 2;
                    w[d] = std::clamp((fix - grid_d[q[d]]) / (grid_d[q[d] + 1] - grid_d[q[d]]),
                                      0.0, 1.0);
                }
                if (!ok) break;
                if (!fam.slices.front().contains(s[i])) {
                    ok = false;
                    break;
                }
                const std::size_t corners = static_cast<std::size_t>(1) << n_frozen;
                for (std::size_t corner = 0; corner < corners; ++corner) {
                    double weight = 1.0;
                    std::size_t flat = 0;
                    for (std::size_t d = 0; d < n_frozen; ++d) {
                        const bool up = (corner >> d) & 1u;
                        weight *= up ? w[d] : (1.0 - w[d]);
                        flat = flat * sol.frozen[d].size() + (q[d] + (up ? 1 : 0));
                    }
                    h += weight * fam.slices[flat].delta_at(t, s[i]);
                }
                wealth += h * (s[i + 1] - s[i]);
            }
            if (!ok) {
                rep.excluded[p] = 1;
                rep.error[p] = std::numeric_limits<double>::quiet_NaN();
                return;
            }
            std::vector<double> fixings(sol.dates.size());
            for (std::size_t d = 0; d < sol.dates.size(); ++d) fixings[d] = s[date_idx[d]];
            rep.terminal_wealth[p] = wealth;
            rep.payoff[p] = multi->payoff(fixings);
            rep.error[p] = rep.terminal_wealth[p] - rep.payoff[p];
        });
        detail::finalize_report(rep);
        return rep;
    }

    const auto& asian = std::get<AsianClaim>(claim);
    const auto& sol = std::get<PdeSolution>(solutions);
    if (sol.rate_r != 0.0)
        throw std::invalid_argument("replicate: Asian replication implemented for r = 0");
    const double strike = asian.strike;
    rep.x0 = sol.value_at(0.0, -strike / sol.s0) * sol.s0;
    rep.note = sol.note;
    const double dt = grid.step();
    parallel_for(prices.n_paths(), [&](std::size_t p) {
        auto s = prices.path(p);
        double wealth = sol.value_at(0.0, -strike / s[0]) * s[0];
        double integral = 0.0;
        bool ok = true;
        double xi = -strike / s[0];
        for (int i = 0; i < n && ok; ++i) {
            if (!sol.contains(xi)) {
                ok = false;
                break;
            }
            const double t = grid.time(i);
            const double h = sol.value_at(t, xi) - sol.delta_at(t, xi) * xi;
            wealth += h * (s[i + 1] - s[i]);
            integral += 0.5 * dt * (s[i] + s[i + 1]);
            xi = (integral - strike) / s[i + 1];
        }
        if (!ok) {
            rep.excluded[p] = 1;
            rep.error[p] = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        rep.terminal_wealth[p] = wealth;
        rep.payoff[p] = asian.payoff(xi) * s[n];
        rep.error[p] = rep.terminal_wealth[p] - rep.payoff[p];
    });
    detail::finalize_report(rep);
    return rep;
}

// Long-form CSV dump of a value surface: one row per (time, state) node.
inline void save_surface_csv(const PdeSolution& sol, const std::string& filename) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("save_surface_csv: cannot open " + filename);
    const auto fmt = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "t,state,value,delta\n";
    for (std::size_t k = 0; k < sol.times.size(); ++k)
        for (std::size_t j = 0; j < sol.states.size(); ++j)
            os << fmt(sol.times[k]) << "," << fmt(sol.states[j]) << ","
               << fmt(sol.value[k][j]) << "," << fmt(sol.delta[k][j]) << "\n";
}

// --------------------------------------------------------------------------
// Lognormal call closed form; the independent oracle for the PDE machinery.
// --------------------------------------------------------------------------

struct BsQuote {
    double price = 0.0;
    double delta = 0.0;
};

inline BsQuote bs_closed_form(double sigma, double r, double s0, double strike, double maturity) {
    if (!(s0 > 0.0) || !(strike > 0.0) || sigma < 0.0 || maturity < 0.0)
        throw std::invalid_argument("bs_closed_form: invalid inputs");
    const double stdev = sigma * std::sqrt(maturity);
    const double df = std::exp(-r * maturity);
    if (stdev < 1e-12) {
        const double fwd = s0 / df;
        const double price = df * std::max(fwd - strike, 0.0);
        return {price, fwd > strike ? 1.0 : (fwd < strike ? 0.0 : 0.5)};
    }
    const auto cdf = [](double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); };
    const double d1 = (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * maturity) / stdev;
    const double d2 = d1 - stdev;
    return {s0 * cdf(d1) - strike * df * cdf(d2), cdf(d1)};
}

} // namespace pathwise

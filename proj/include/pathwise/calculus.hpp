#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathwise/grid.hpp"
#include "pathwise/random.hpp"
#include "pathwise/regularize.hpp"

namespace pathwise {

// --------------------------------------------------------------------------
// A C^{1,2} field Psi(t, x) together with its partial derivatives. Strategies
// of the form psi = d/dx Psi live here, as do integrands for the pathwise
// change-of-variable decomposition.
// --------------------------------------------------------------------------

struct SmoothField {
    std::function<double(double, double)> value; // Psi(t, x)
    std::function<double(double, double)> dt;    // d/dt Psi
    std::function<double(double, double)> dx;    // d/dx Psi
    std::function<double(double, double)> dxx;   // d2/dx2 Psi
    int growth_degree = 2;                       // diagnostic polynomial bound
    std::string label;
};

// Cross-check the supplied derivatives against centered finite differences at
// probe points inside the given box. Probe spacing 1e-5, relative tolerance
// 1e-4. Throws on mismatch.
inline void check_field_derivatives(const SmoothField& field, double t_lo, double t_hi,
                                    double x_lo, double x_hi, int n_probes = 16,
                                    std::uint64_t seed = 0x5eedULL) {
    if (!field.value || !field.dt || !field.dx || !field.dxx)
        throw std::invalid_argument("SmoothField: missing evaluator");
    const double h = 1e-5;
    const double rtol = 1e-4;
    Rng rng(seed, 0, fnv1a64("field_probe"));
    const double t_span = std::max(t_hi - t_lo, 4.0 * h);
    const double x_span = std::max(x_hi - x_lo, 4.0 * h);
    for (int k = 0; k < n_probes; ++k) {
        const double t = std::clamp(t_lo + rng.next_uniform() * t_span, t_lo + h, t_lo + t_span - h);
        const double x = x_lo + rng.next_uniform() * x_span;
        const auto close = [&](double fd, double supplied) {
            return std::abs(fd - supplied) <= rtol * std::max(1.0, std::abs(supplied));
        };
        const double fd_t = (field.value(t + h, x) - field.value(t - h, x)) / (2.0 * h);
        const double fd_x = (field.value(t, x + h) - field.value(t, x - h)) / (2.0 * h);
        const double fd_xx =
            (field.value(t, x + h) - 2.0 * field.value(t, x) + field.value(t, x - h)) / (h * h);
        if (!close(fd_t, field.dt(t, x)) || !close(fd_x, field.dx(t, x)) ||
            !close(fd_xx, field.dxx(t, x)))
            throw std::runtime_error("SmoothField '" + field.label +
                                     "': derivative cross-check failed at t=" + std::to_string(t) +
                                     ", x=" + std::to_string(x));
    }
}

// --------------------------------------------------------------------------
// Pathwise change-of-variable decomposition for a finite quadratic variation
// path X:
//   Psi(t, X_t) - Psi(0, X_0)
//     = int dPsi/dt ds + int dPsi/dx d^-X + 1/2 int d2Psi/dx2 d[X].
// The residual collects whatever the discrete estimators fail to explain.
// --------------------------------------------------------------------------

struct ItoDecomposition {
    SamplePath lhs;          // Psi(t, X_t) - Psi(0, X_0)
    SamplePath dv_term;      // int dPsi/dt ds (bounded variation component V = t)
    SamplePath forward_term; // int dPsi/dx(s, X_s) d^-X_s
    SamplePath qv_term;      // 1/2 int d2Psi/dx2(s, X_s) d[X]_s
    SamplePath residual;
    double sup_residual = 0.0;
};

inline ItoDecomposition ito_decompose(const SmoothField& field, const SamplePath& x,
                                      RegParams params = {}) {
    const auto [lo_it, hi_it] = std::minmax_element(x.values.begin(), x.values.end());
    check_field_derivatives(field, 0.0, x.grid.horizon(), *lo_it, *hi_it);

    const TimeGrid& grid = x.grid;
    const int n = grid.n_steps();
    const double dt = grid.step();
    const auto qv = quadratic_variation(grid, x.values, params);

    std::vector<double> psi_x(n + 1);
    for (int i = 0; i <= n; ++i) psi_x[i] = field.dx(grid.time(i), x.values[i]);
    const auto fwd = forward_integral(grid, psi_x, x.values, params);

    ItoDecomposition out;
    std::vector<double> lhs(n + 1), dv(n + 1), qvt(n + 1), res(n + 1);
    const double psi0 = field.value(0.0, x.values[0]);
    double time_acc = 0.0, qv_acc = 0.0;
    lhs[0] = dv[0] = qvt[0] = res[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = grid.time(i);
        time_acc += field.dt(t, x.values[i]) * dt;
        qv_acc += 0.5 * field.dxx(t, x.values[i]) * (qv[i + 1] - qv[i]);
        lhs[i + 1] = field.value(grid.time(i + 1), x.values[i + 1]) - psi0;
        dv[i + 1] = time_acc;
        qvt[i + 1] = qv_acc;
        res[i + 1] = lhs[i + 1] - dv[i + 1] - fwd[i + 1] - qvt[i + 1];
        out.sup_residual = std::max(out.sup_residual, std::abs(res[i + 1]));
    }
    out.lhs = SamplePath(grid, std::move(lhs));
    out.dv_term = SamplePath(grid, std::move(dv));
    out.forward_term = SamplePath(grid, fwd);
    out.qv_term = SamplePath(grid, std::move(qvt));
    out.residual = SamplePath(grid, std::move(res));
    return out;
}

// Integration by parts against a bounded variation path:
//   X Y - X_0 Y_0 = int X dY + int Y d^-X.
// Stieltjes side uses left endpoints; residual is the discrete covariation.
struct IbpResult {
    SamplePath residual;
    double sup_residual = 0.0;
};

inline IbpResult integration_by_parts(const SamplePath& x, const SamplePath& y_bv,
                                      RegParams params = {}) {
    require_same_grid(x.grid, y_bv.grid, "integration_by_parts");
    const TimeGrid& grid = x.grid;
    const int n = grid.n_steps();
    const auto fwd = forward_integral(grid, y_bv.values, x.values, params);
    IbpResult out;
    std::vector<double> res(n + 1, 0.0);
    double stieltjes = 0.0;
    const double xy0 = x.values[0] * y_bv.values[0];
    for (int i = 0; i < n; ++i) {
        stieltjes += x.values[i] * (y_bv.values[i + 1] - y_bv.values[i]);
        res[i + 1] = x.values[i + 1] * y_bv.values[i + 1] - xy0 - stieltjes - fwd[i + 1];
        out.sup_residual = std::max(out.sup_residual, std::abs(res[i + 1]));
    }
    out.residual = SamplePath(grid, std::move(res));
    return out;
}

// --------------------------------------------------------------------------
// Chain rule for Y = psi(X^1, ..., X^m):
//   int Z d^-Y = sum_i int Z dpsi_i(X) d^-X^i
//             + 1/2 sum_{ij} int Z d2psi_ij(X) d[X^i, X^j].
// --------------------------------------------------------------------------

struct VectorSmoothMap {
    std::size_t dim = 1;
    std::function<double(std::span<const double>)> value;
    std::function<double(std::size_t, std::span<const double>)> d1;
    std::function<double(std::size_t, std::size_t, std::span<const double>)> d2;
    std::string label;
};

inline IbpResult chain_rule_check(const SamplePath& z, const VectorSmoothMap& psi,
                                  std::span<const SamplePath> x_vec, RegParams params = {}) {
    if (x_vec.empty() || x_vec.size() != psi.dim)
        throw std::invalid_argument("chain_rule_check: component count must match psi.dim");
    const TimeGrid& grid = z.grid;
    for (const auto& x : x_vec) require_same_grid(grid, x.grid, "chain_rule_check");
    const int n = grid.n_steps();
    const std::size_t m = x_vec.size();

    std::vector<double> args(m);
    const auto load_args = [&](int i) {
        for (std::size_t c = 0; c < m; ++c) args[c] = x_vec[c].values[i];
    };

    // left side: forward integral of Z against psi(X)
    std::vector<double> y(n + 1);
    for (int i = 0; i <= n; ++i) {
        load_args(i);
        y[i] = psi.value(args);
    }
    const auto lhs = forward_integral(grid, z.values, y, params);

    // right side: first-order forward terms plus mutual-bracket terms
    std::vector<double> rhs(n + 1, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        std::vector<double> integrand(n + 1);
        for (int i = 0; i <= n; ++i) {
            load_args(i);
            integrand[i] = z.values[i] * psi.d1(c, args);
        }
        const auto term = forward_integral(grid, integrand, x_vec[c].values, params);
        for (int i = 0; i <= n; ++i) rhs[i] += term[i];
    }
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            const auto bracket = covariation(grid, x_vec[a].values, x_vec[b].values, params);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                load_args(i);
                acc += 0.5 * z.values[i] * psi.d2(a, b, args) * (bracket[i + 1] - bracket[i]);
                rhs[i + 1] += acc;
            }
        }
    }

    IbpResult out;
    std::vector<double> res(n + 1, 0.0);
    for (int i = 0; i <= n; ++i) {
        res[i] = lhs[i] - rhs[i];
        out.sup_residual = std::max(out.sup_residual, std::abs(res[i]));
    }
    out.residual = SamplePath(grid, std::move(res));
    return out;
}

// --------------------------------------------------------------------------
// Inside-factor strategies and the pathwise wealth functional.
//
// A strategy holds h_t = phi(t, V^1_t, ..., V^k_t, S_t) shares, where each
// V^c is a running minimum, maximum, or integral of the price path. With
// phi_tilde(t, v, x) = int_0^x phi(t, v, y) dy, the terminal wealth of the
// self-financing portfolio admits a closed evaluation using only pointwise
// values, time integrals, and Stieltjes sums against the factor paths:
//   V_phi(S) = phi_tilde(1, V_1, S_1) - phi_tilde(0, V_0, S_0)
//            - int d/dt phi_tilde ds
//            - 1/2 int d/dx phi * sigma^2(s, history) S_s^2 ds
//            - sum_c int d/dv_c phi_tilde dV^c.
// No forward integral appears, which is the whole point: the functional is a
// deterministic map on the single path.
// --------------------------------------------------------------------------

enum class FactorKind { RunningMin, RunningMax, RunningIntegral };

using FactorArgs = std::span<const double>;

struct InsideFactorStrategy {
    std::vector<FactorKind> factors;
    std::function<double(double, FactorArgs, double)> phi; // shares held
    // phi_tilde = int_0^x phi dy; leave empty to integrate phi by quadrature
    std::function<double(double, FactorArgs, double)> phi_tilde;
    std::function<double(double, FactorArgs, double)> dphi_tilde_dt;
    std::function<double(double, FactorArgs, double)> dphi_dx;
    // derivative of phi_tilde in factor c
    std::function<double(double, FactorArgs, double, std::size_t)> dphi_tilde_dv;
    std::string label;
};

// sigma(t, history): history spans the path values on grid nodes up to and
// including t; lookbacks past time 0 clamp to the first value.
using SigmaFunctional = std::function<double(double, std::span<const double>)>;

namespace detail {

// adaptive Simpson quadrature, absolute tolerance
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

inline std::vector<std::vector<double>> factor_paths(const InsideFactorStrategy& strategy,
                                                     const SamplePath& s) {
    const int n = s.grid.n_steps();
    const double dt = s.grid.step();
    std::vector<std::vector<double>> out(strategy.factors.size());
    for (std::size_t c = 0; c < strategy.factors.size(); ++c) {
        auto& v = out[c];
        v.resize(n + 1);
        switch (strategy.factors[c]) {
        case FactorKind::RunningMin:
            v[0] = s.values[0];
            for (int i = 1; i <= n; ++i) v[i] = std::min(v[i - 1], s.values[i]);
            break;
        case FactorKind::RunningMax:
            v[0] = s.values[0];
            for (int i = 1; i <= n; ++i) v[i] = std::max(v[i - 1], s.values[i]);
            break;
        case FactorKind::RunningIntegral:
            v[0] = 0.0;
            for (int i = 1; i <= n; ++i)
                v[i] = v[i - 1] + 0.5 * dt * (s.values[i - 1] + s.values[i]);
            break;
        }
    }
    return out;
}

} // namespace detail

inline double pathwise_wealth_functional(const InsideFactorStrategy& strategy, const SamplePath& s,
                                         const SigmaFunctional& sigma) {
    if (!strategy.phi) throw std::invalid_argument("pathwise_wealth_functional: phi missing");
    if (!strategy.dphi_tilde_dt || !strategy.dphi_dx)
        throw std::invalid_argument("pathwise_wealth_functional: phi_tilde derivatives missing");
    if (!strategy.factors.empty() && !strategy.dphi_tilde_dv)
        throw std::invalid_argument("pathwise_wealth_functional: factor derivative missing");

    const TimeGrid& grid = s.grid;
    const int n = grid.n_steps();
    const double dt = grid.step();
    const auto factors = detail::factor_paths(strategy, s);
    const std::size_t k = factors.size();

    std::vector<double> v(k);
    const auto load = [&](int i) {
        for (std::size_t c = 0; c < k; ++c) v[c] = factors[c][i];
    };

    const auto phi_tilde = [&](double t, FactorArgs args, double x) {
        if (strategy.phi_tilde) return strategy.phi_tilde(t, args, x);
        return detail::integrate([&](double y) { return strategy.phi(t, args, y); }, 0.0, x, 1e-10);
    };

    load(n);
    const double t_end = grid.horizon();
    double total = phi_tilde(t_end, v, s.values[n]);
    load(0);
    total -= phi_tilde(0.0, v, s.values[0]);

    double time_term = 0.0, qv_term = 0.0, factor_term = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = grid.time(i);
        load(i);
        const double sig = sigma(t, std::span<const double>(s.values.data(), i + 1));
        time_term += strategy.dphi_tilde_dt(t, v, s.values[i]) * dt;
        qv_term += 0.5 * strategy.dphi_dx(t, v, s.values[i]) * sig * sig * s.values[i] *
                   s.values[i] * dt;
        for (std::size_t c = 0; c < k; ++c)
            factor_term +=
                strategy.dphi_tilde_dv(t, v, s.values[i], c) * (factors[c][i + 1] - factors[c][i]);
    }
    return total - time_term - qv_term - factor_term;
}

// Fraction of ensemble members staying inside the uniform tube of radius eps
// around the target path. Positivity of this fraction for arbitrary targets
// is the empirical face of the full support condition.
inline double full_support_fraction(const PathEnsemble& ensemble, const SamplePath& target,
                                    double eps) {
    require_same_grid(ensemble.grid(), target.grid, "full_support_fraction");
    if (eps < 0.0) throw std::invalid_argument("full_support_fraction: eps must be nonnegative");
    const int nodes = ensemble.grid().n_nodes();
    std::size_t hits = 0;
    for (std::size_t p = 0; p < ensemble.n_paths(); ++p) {
        auto path = ensemble.path(p);
        bool inside = true;
        for (int i = 0; i < nodes; ++i) {
            if (std::abs(path[i] - target.values[i]) > eps) {
                inside = false;
                break;
            }
        }
        if (inside) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ensemble.n_paths());
}

} // namespace pathwise

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pathwise/calculus.hpp"
#include "pathwise/fields.hpp"
#include "pathwise/paths.hpp"
#include "pathwise/regularize.hpp"

using namespace pathwise;

namespace {

const SigmaFunctional constant_sigma = [](double, std::span<const double>) { return 0.2; };

InsideFactorStrategy plain_strategy(double (*phi)(double), double (*phi_tilde)(double),
                                    double (*dphi_dx)(double)) {
    InsideFactorStrategy s;
    s.phi = [phi](double, FactorArgs, double x) { return phi(x); };
    s.phi_tilde = [phi_tilde](double, FactorArgs, double x) { return phi_tilde(x); };
    s.dphi_tilde_dt = [](double, FactorArgs, double) { return 0.0; };
    s.dphi_dx = [dphi_dx](double, FactorArgs, double x) { return dphi_dx(x); };
    return s;
}

} // namespace

TEST_CASE("smooth field derivative cross-check") {
    auto good = make_field("sine");
    CHECK_NOTHROW(check_field_derivatives(good, 0.0, 1.0, -2.0, 2.0));

    auto bad = make_field("sine");
    bad.dx = [](double, double x) { return std::cos(x) + 0.01; };
    CHECK_THROWS_AS(check_field_derivatives(bad, 0.0, 1.0, -2.0, 2.0), std::runtime_error);

    SmoothField incomplete;
    incomplete.value = [](double, double x) { return x; };
    CHECK_THROWS_AS(check_field_derivatives(incomplete, 0.0, 1.0, 0.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("pathwise decomposition is exact for linear and quadratic fields") {
    TimeGrid grid(512);
    auto w = gen_brownian(grid, 8, 1).extract(0);

    auto linear = ito_decompose(make_field("linear"), w, RegParams{1});
    CHECK(linear.sup_residual < 1e-13);

    auto quadratic = ito_decompose(make_field("square"), w, RegParams{1});
    CHECK(quadratic.sup_residual < 1e-12);
}

TEST_CASE("pathwise decomposition residual shrinks under refinement") {
    // sin x against a fractional path: the change-of-variable formula holds
    // pathwise, so finer grids must explain more of the move
    double previous = 1e9;
    for (int n : {256, 1024, 4096}) {
        TimeGrid grid(n);
        auto x = gen_fbm(grid, 0.75, 2121, 1).extract(0);
        auto dec = ito_decompose(make_field("sine"), x, RegParams{1});
        CHECK(dec.sup_residual < previous);
        previous = dec.sup_residual;
    }
}

TEST_CASE("decomposition rejects fields that fail the cross-check") {
    TimeGrid grid(64);
    auto w = gen_brownian(grid, 9, 1).extract(0);
    auto bad = make_field("square");
    bad.dxx = [](double, double) { return 2.5; };
    CHECK_THROWS_AS(ito_decompose(bad, w, RegParams{1}), std::runtime_error);
}

TEST_CASE("integration by parts") {
    TimeGrid grid(256);
    auto w = gen_brownian(grid, 14, 1).extract(0);

    SECTION("constant bounded variation factor is exact") {
        SamplePath c(grid, std::vector<double>(grid.n_nodes(), 3.5));
        auto r = integration_by_parts(w, c, RegParams{1});
        CHECK(r.sup_residual < 1e-13);
    }

    SECTION("residual vanishes under refinement for Y = t") {
        double previous = 1e9;
        for (int n : {128, 512, 2048}) {
            TimeGrid g(n);
            auto x = gen_brownian(g, 14, 1).extract(0);
            std::vector<double> tv(g.n_nodes());
            for (int i = 0; i <= g.n_steps(); ++i) tv[i] = g.time(i);
            auto r = integration_by_parts(x, SamplePath(g, std::move(tv)), RegParams{1});
            CHECK(r.sup_residual < previous);
            previous = r.sup_residual;
        }
    }

    SECTION("two smooth paths leave only a one-cell boundary effect") {
        std::vector<double> tv(grid.n_nodes());
        for (int i = 0; i <= grid.n_steps(); ++i) tv[i] = grid.time(i);
        SamplePath t_path(grid, tv);
        auto r = integration_by_parts(t_path, t_path, RegParams{1});
        CHECK(r.sup_residual <= grid.step() + 1e-15);
    }
}

TEST_CASE("chain rule check") {
    TimeGrid grid(256);

    SECTION("identity map leaves no residual") {
        auto e = gen_brownian(grid, 77, 2);
        auto z = e.extract(0);
        auto x = e.extract(1);
        VectorSmoothMap identity;
        identity.dim = 1;
        identity.value = [](std::span<const double> v) { return v[0]; };
        identity.d1 = [](std::size_t, std::span<const double>) { return 1.0; };
        identity.d2 = [](std::size_t, std::size_t, std::span<const double>) { return 0.0; };
        const SamplePath xs[] = {x};
        auto r = chain_rule_check(z, identity, xs, RegParams{1});
        CHECK(r.sup_residual < 1e-13);
    }

    SECTION("zero integrand leaves no residual") {
        auto x = gen_brownian(grid, 78, 1).extract(0);
        SamplePath z(grid, std::vector<double>(grid.n_nodes(), 0.0));
        VectorSmoothMap exp_map;
        exp_map.dim = 1;
        exp_map.value = [](std::span<const double> v) { return std::exp(v[0]); };
        exp_map.d1 = [](std::size_t, std::span<const double> v) { return std::exp(v[0]); };
        exp_map.d2 = [](std::size_t, std::size_t, std::span<const double> v) {
            return std::exp(v[0]);
        };
        const SamplePath xs[] = {x};
        auto r = chain_rule_check(z, exp_map, xs, RegParams{1});
        CHECK(r.sup_residual == 0.0);
    }

    SECTION("exponential of the log price converges under refinement") {
        VectorSmoothMap exp_map;
        exp_map.dim = 1;
        exp_map.value = [](std::span<const double> v) { return std::exp(v[0]); };
        exp_map.d1 = [](std::size_t, std::span<const double> v) { return std::exp(v[0]); };
        exp_map.d2 = [](std::size_t, std::size_t, std::span<const double> v) {
            return std::exp(v[0]);
        };
        double previous = 1e9;
        for (int n : {128, 512, 2048}) {
            TimeGrid g(n);
            auto s = gen_price(GBM{0.2, 0.05, 1.0}, g, 301, 1).extract(0);
            std::vector<double> logs(g.n_nodes());
            for (int i = 0; i <= g.n_steps(); ++i) logs[i] = std::log(s.values[i]);
            SamplePath log_s(g, std::move(logs));
            SamplePath z(g, std::vector<double>(g.n_nodes(), 1.0));
            const SamplePath xs[] = {log_s};
            auto r = chain_rule_check(z, exp_map, xs, RegParams{1});
            CHECK(r.sup_residual < previous);
            previous = r.sup_residual;
        }
    }

    SECTION("dimension mismatch is rejected") {
        auto x = gen_brownian(grid, 80, 1).extract(0);
        VectorSmoothMap two;
        two.dim = 2;
        const SamplePath xs[] = {x};
        CHECK_THROWS_AS(chain_rule_check(x, two, xs, RegParams{1}), std::invalid_argument);
    }
}

TEST_CASE("wealth functional without factors") {
    TimeGrid grid(512);
    auto s = gen_price(GBM{0.2, 0.05, 1.0}, grid, 555, 1).extract(0);

    SECTION("unit strategy pays the raw move") {
        auto one = plain_strategy([](double) { return 1.0; }, [](double x) { return x; },
                                  [](double) { return 0.0; });
        const double v = pathwise_wealth_functional(one, s, constant_sigma);
        CHECK(v == Catch::Approx(s.values.back() - s.values.front()).margin(1e-12));
    }

    SECTION("linear strategy matches its closed form and the forward integral") {
        auto lin = plain_strategy([](double x) { return x; },
                                  [](double x) { return 0.5 * x * x; },
                                  [](double) { return 1.0; });
        const double v = pathwise_wealth_functional(lin, s, constant_sigma);
        double time_term = 0.0;
        for (int i = 0; i < grid.n_steps(); ++i)
            time_term += 0.5 * 0.04 * s.values[i] * s.values[i] * grid.step();
        const double closed = 0.5 * (s.values.back() * s.values.back() -
                                     s.values.front() * s.values.front()) -
                              time_term;
        CHECK(v == Catch::Approx(closed).margin(1e-10));

        const double fwd = forward_integral(s, s, RegParams{1}).values.back();
        CHECK(std::abs(v - fwd) < 0.05);
    }

    SECTION("evaluating the same path twice is bit-identical") {
        auto lin = plain_strategy([](double x) { return x; },
                                  [](double x) { return 0.5 * x * x; },
                                  [](double) { return 1.0; });
        const double first = pathwise_wealth_functional(lin, s, constant_sigma);
        const double second = pathwise_wealth_functional(lin, s, constant_sigma);
        CHECK(first == second);
    }

    SECTION("quadrature fallback agrees with the analytic antiderivative") {
        auto with_tilde = plain_strategy([](double x) { return std::sin(x); },
                                         [](double x) { return 1.0 - std::cos(x); },
                                         [](double x) { return std::cos(x); });
        auto without = with_tilde;
        without.phi_tilde = nullptr;
        const double a = pathwise_wealth_functional(with_tilde, s, constant_sigma);
        const double b = pathwise_wealth_functional(without, s, constant_sigma);
        CHECK(a == Catch::Approx(b).margin(1e-8));
    }
}

TEST_CASE("wealth functional with a running-minimum factor") {
    // phi(t, v, x) = x - v: hold the distance of the price above its low
    InsideFactorStrategy strat;
    strat.factors = {FactorKind::RunningMin};
    strat.phi = [](double, FactorArgs v, double x) { return x - v[0]; };
    strat.phi_tilde = [](double, FactorArgs v, double x) { return 0.5 * x * x - v[0] * x; };
    strat.dphi_tilde_dt = [](double, FactorArgs, double) { return 0.0; };
    strat.dphi_dx = [](double, FactorArgs, double) { return 1.0; };
    strat.dphi_tilde_dv = [](double, FactorArgs, double x, std::size_t) { return -x; };

    double previous = 1e9;
    for (int n : {256, 1024, 4096}) {
        TimeGrid grid(n);
        auto e = gen_price(GBM{0.2, 0.0, 1.0}, grid, 6006, 50);
        double gap = 0.0;
        for (std::size_t p = 0; p < e.n_paths(); ++p) {
            auto s = e.extract(p);
            const double functional = pathwise_wealth_functional(strat, s, constant_sigma);
            // direct forward integral of the sampled strategy
            std::vector<double> h(grid.n_nodes());
            double running = s.values[0];
            for (int i = 0; i <= n; ++i) {
                running = std::min(running, s.values[i]);
                h[i] = s.values[i] - running;
            }
            const double fwd =
                forward_integral(grid, h, s.values, RegParams{1}).back();
            gap += std::abs(functional - fwd);
        }
        gap /= static_cast<double>(e.n_paths());
        CHECK(gap < previous);
        previous = gap;
    }
}

TEST_CASE("wealth functional rejects incomplete strategies") {
    TimeGrid grid(64);
    auto s = gen_price(GBM{0.2, 0.0, 1.0}, grid, 1, 1).extract(0);
    InsideFactorStrategy strat;
    strat.factors = {FactorKind::RunningMax};
    strat.phi = [](double, FactorArgs, double x) { return x; };
    strat.dphi_tilde_dt = [](double, FactorArgs, double) { return 0.0; };
    strat.dphi_dx = [](double, FactorArgs, double) { return 1.0; };
    // dphi_tilde_dv missing
    CHECK_THROWS_AS(pathwise_wealth_functional(strat, s, constant_sigma),
                    std::invalid_argument);
}

TEST_CASE("full support tube fractions") {
    TimeGrid grid(128);
    auto e = gen_brownian(grid, 24680, 2000);
    SamplePath zero(grid, std::vector<double>(grid.n_nodes(), 0.0));

    SECTION("a member of the ensemble is always inside its own tube") {
        auto member = e.extract(17);
        CHECK(full_support_fraction(e, member, 0.0) >= 1.0 / 2000.0);
    }

    SECTION("positive fraction around the zero path, saturating for wide tubes") {
        const double f_half = full_support_fraction(e, zero, 0.5);
        CHECK(f_half > 0.0);
        CHECK(full_support_fraction(e, zero, 10.0) == 1.0);
    }

    SECTION("monotone in the tube radius") {
        double previous = -1.0;
        for (double eps : {0.25, 0.5, 1.0, 2.0}) {
            const double f = full_support_fraction(e, zero, eps);
            CHECK(f >= previous);
            previous = f;
        }
    }

    SECTION("invalid inputs") {
        CHECK_THROWS_AS(full_support_fraction(e, zero, -0.1), std::invalid_argument);
        SamplePath off(TimeGrid(64), std::vector<double>(65, 0.0));
        CHECK_THROWS_AS(full_support_fraction(e, off, 0.5), std::invalid_argument);
    }
}

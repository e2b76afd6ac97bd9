#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pathwise/calculus.hpp"

namespace pathwise {

// Stock of named generating fields Psi(t, x). Strategies trade the gradient
// d/dx Psi, so "linear" trades 1 share, "half_square" trades x shares, and so
// on. Shared between the test suites and the experiment runner.
inline SmoothField make_field(const std::string& name) {
    SmoothField f;
    f.label = name;
    if (name == "linear") { // Psi = x, gradient 1
        f.value = [](double, double x) { return x; };
        f.dt = [](double, double) { return 0.0; };
        f.dx = [](double, double) { return 1.0; };
        f.dxx = [](double, double) { return 0.0; };
        f.growth_degree = 1;
    } else if (name == "half_square") { // Psi = x^2/2, gradient x
        f.value = [](double, double x) { return 0.5 * x * x; };
        f.dt = [](double, double) { return 0.0; };
        f.dx = [](double, double x) { return x; };
        f.dxx = [](double, double) { return 1.0; };
    } else if (name == "square") { // Psi = x^2
        f.value = [](double, double x) { return x * x; };
        f.dt = [](double, double) { return 0.0; };
        f.dx = [](double, double x) { return 2.0 * x; };
        f.dxx = [](double, double) { return 2.0; };
    } else if (name == "sine") { // Psi = sin x, gradient cos x
        f.value = [](double, double x) { return std::sin(x); };
        f.dt = [](double, double) { return 0.0; };
        f.dx = [](double, double x) { return std::cos(x); };
        f.dxx = [](double, double x) { return -std::sin(x); };
    } else if (name == "versine") { // Psi = 1 - cos x, gradient sin x
        f.value = [](double, double x) { return 1.0 - std::cos(x); };
        f.dt = [](double, double) { return 0.0; };
        f.dx = [](double, double x) { return std::sin(x); };
        f.dxx = [](double, double x) { return std::cos(x); };
    } else {
        throw std::invalid_argument("make_field: unknown field '" + name + "'");
    }
    return f;
}

} // namespace pathwise

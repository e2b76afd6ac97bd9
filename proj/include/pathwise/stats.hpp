#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace pathwise {

struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double stdev = 0.0; // sample standard deviation (n - 1)
    double std_error() const { return n > 1 ? stdev / std::sqrt(static_cast<double>(n)) : 0.0; }
};

// Two-pass moments, accumulated in index order so results are reproducible.
inline Moments moments(std::span<const double> xs) {
    Moments m;
    m.n = xs.size();
    if (m.n == 0) return m;
    double s = 0.0;
    for (double x : xs) s += x;
    m.mean = s / static_cast<double>(m.n);
    if (m.n > 1) {
        double q = 0.0;
        for (double x : xs) q += (x - m.mean) * (x - m.mean);
        m.stdev = std::sqrt(q / static_cast<double>(m.n - 1));
    }
    return m;
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

// Survival function of the Kolmogorov distribution, Q(lambda) = P(K > lambda).
inline double kolmogorov_sf(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0; // sup |F_n - F|
    double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against a continuous cdf. The p-value
// uses the Stephens small-sample correction of the asymptotic law.
inline KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw std::invalid_argument("ks_test: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
        d = std::max(d, f - static_cast<double>(i) / n);
    }
    const double sqrt_n = std::sqrt(n);
    const double lambda = d * (sqrt_n + 0.12 + 0.11 / sqrt_n);
    return {d, kolmogorov_sf(lambda)};
}

struct Quadratic {
    double a = 0.0, b = 0.0, c = 0.0; // y = a + b x + c x^2
};

// Least-squares parabola; used to probe concavity of utility scans.
inline Quadratic fit_quadratic(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("fit_quadratic: need at least 3 points");
    double s0 = static_cast<double>(x.size());
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i], yi = y[i];
        const double x2 = xi * xi;
        s1 += xi; s2 += x2; s3 += x2 * xi; s4 += x2 * x2;
        t0 += yi; t1 += xi * yi; t2 += x2 * yi;
    }
    // solve the 3x3 normal equations by Gaussian elimination
    double m[3][4] = {{s0, s1, s2, t0}, {s1, s2, s3, t1}, {s2, s3, s4, t2}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        if (m[col][col] == 0.0) throw std::runtime_error("fit_quadratic: singular system");
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int cc = col; cc < 4; ++cc) m[r][cc] -= f * m[col][cc];
        }
    }
    return {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
}

} // namespace pathwise

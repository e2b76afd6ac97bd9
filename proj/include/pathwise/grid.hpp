#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pathwise {

// Uniform grid on [0, horizon]. All estimators in this library are
// interpolation-free: times handed to them must be grid nodes, and evaluation
// outside [0, horizon] clamps to the endpoints.
class TimeGrid {
public:
    TimeGrid() = default;

    explicit TimeGrid(int n_steps, double horizon = 1.0)
        : n_steps_(n_steps), horizon_(horizon) {
        if (n_steps < 2) throw std::invalid_argument("TimeGrid: n_steps must be >= 2");
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
    }

    int n_steps() const { return n_steps_; }
    int n_nodes() const { return n_steps_ + 1; }
    double horizon() const { return horizon_; }
    double step() const { return horizon_ / n_steps_; }
    double time(int i) const { return (i >= n_steps_) ? horizon_ : i * step(); }

    // Exact node lookup after clamping to [0, horizon]. Off-grid times are an
    // error, not an interpolation request.
    int index_of(double t) const {
        const double tc = std::clamp(t, 0.0, horizon_);
        const double pos = tc / step();
        const int i = static_cast<int>(std::lround(pos));
        if (std::abs(pos - i) > 1e-9 * n_steps_)
            throw std::invalid_argument("TimeGrid: time " + std::to_string(t) + " is not a grid node");
        return std::clamp(i, 0, n_steps_);
    }

    bool same_as(const TimeGrid& other) const {
        return n_steps_ == other.n_steps_ && horizon_ == other.horizon_;
    }

private:
    int n_steps_ = 2;
    double horizon_ = 1.0;
};

struct SamplePath {
    TimeGrid grid;
    std::vector<double> values; // size n_steps + 1

    SamplePath() = default;
    SamplePath(TimeGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (static_cast<int>(values.size()) != grid.n_nodes())
            throw std::invalid_argument("SamplePath: values length must be n_steps + 1");
        for (double x : values)
            if (!std::isfinite(x))
                throw std::invalid_argument("SamplePath: values must be finite");
    }

    double at(double t) const { return values[grid.index_of(t)]; }
    double front() const { return values.front(); }
    double back() const { return values.back(); }
};

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
    if (!a.same_as(b)) throw std::invalid_argument(std::string(what) + ": mismatched grids");
}

// A set of paths sharing one grid, stored path-major. Regenerating with the
// same (seed, generator_id, grid, n_paths) reproduces identical values no
// matter how many workers filled it.
class PathEnsemble {
public:
    PathEnsemble() = default;

    PathEnsemble(TimeGrid grid, std::size_t n_paths, std::uint64_t seed, std::string generator_id)
        : grid_(grid),
          n_paths_(n_paths),
          seed_(seed),
          generator_id_(std::move(generator_id)),
          data_(n_paths * static_cast<std::size_t>(grid.n_nodes()), 0.0) {}

    const TimeGrid& grid() const { return grid_; }
    std::size_t n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& generator_id() const { return generator_id_; }

    std::span<double> path(std::size_t i) {
        return {data_.data() + i * grid_.n_nodes(), static_cast<std::size_t>(grid_.n_nodes())};
    }
    std::span<const double> path(std::size_t i) const {
        return {data_.data() + i * grid_.n_nodes(), static_cast<std::size_t>(grid_.n_nodes())};
    }

    SamplePath extract(std::size_t i) const {
        auto p = path(i);
        return SamplePath(grid_, std::vector<double>(p.begin(), p.end()));
    }

    const std::vector<double>& raw() const { return data_; }
    std::vector<double>& raw() { return data_; }

private:
    TimeGrid grid_;
    std::size_t n_paths_ = 0;
    std::uint64_t seed_ = 0;
    std::string generator_id_;
    std::vector<double> data_;
};

} // namespace pathwise

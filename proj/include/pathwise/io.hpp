#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pathwise/grid.hpp"

namespace pathwise {

// Shortest round-trip decimal text for a double; keeps reports byte-stable.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --------------------------------------------------------------------------
// Ensemble serialization: a binary column file (header, then 64-bit floats
// path-major) and a CSV mirror (one row per node, one column per path) for
// cross-checking from other tooling.
// --------------------------------------------------------------------------

namespace detail {

constexpr std::uint32_t ensemble_magic = 0x50574531u; // "PWE1"

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

} // namespace detail

inline void save_ensemble_binary(const PathEnsemble& ensemble, const std::string& filename) {
    std::ofstream os(filename, std::ios::binary);
    if (!os) throw std::runtime_error("save_ensemble_binary: cannot open " + filename);
    detail::write_pod(os, detail::ensemble_magic);
    detail::write_pod(os, ensemble.seed());
    detail::write_pod(os, static_cast<std::uint32_t>(ensemble.grid().n_steps()));
    detail::write_pod(os, static_cast<std::uint32_t>(ensemble.n_paths()));
    detail::write_pod(os, ensemble.grid().horizon());
    const auto& id = ensemble.generator_id();
    detail::write_pod(os, static_cast<std::uint32_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    const auto& raw = ensemble.raw();
    os.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size() * sizeof(double)));
    if (!os) throw std::runtime_error("save_ensemble_binary: write failed for " + filename);
}

inline PathEnsemble load_ensemble_binary(const std::string& filename) {
    std::ifstream is(filename, std::ios::binary);
    if (!is) throw std::runtime_error("load_ensemble_binary: cannot open " + filename);
    std::uint32_t magic = 0, n_steps = 0, n_paths = 0, id_len = 0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    detail::read_pod(is, magic);
    if (magic != detail::ensemble_magic)
        throw std::runtime_error("load_ensemble_binary: bad magic in " + filename);
    detail::read_pod(is, seed);
    detail::read_pod(is, n_steps);
    detail::read_pod(is, n_paths);
    detail::read_pod(is, horizon);
    detail::read_pod(is, id_len);
    std::string id(id_len, '\0');
    is.read(id.data(), id_len);
    PathEnsemble out(TimeGrid(static_cast<int>(n_steps), horizon), n_paths, seed, id);
    is.read(reinterpret_cast<char*>(out.raw().data()),
            static_cast<std::streamsize>(out.raw().size() * sizeof(double)));
    if (!is) throw std::runtime_error("load_ensemble_binary: truncated file " + filename);
    return out;
}

inline void save_ensemble_csv(const PathEnsemble& ensemble, const std::string& filename) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("save_ensemble_csv: cannot open " + filename);
    os << "t";
    for (std::size_t p = 0; p < ensemble.n_paths(); ++p) os << ",path" << p;
    os << "\n";
    for (int i = 0; i <= ensemble.grid().n_steps(); ++i) {
        os << format_double(ensemble.grid().time(i));
        for (std::size_t p = 0; p < ensemble.n_paths(); ++p)
            os << "," << format_double(ensemble.path(p)[i]);
        os << "\n";
    }
}

// Generic CSV writer: header plus numeric rows.
inline void save_csv(const std::string& filename, std::span<const std::string> header,
                     const std::vector<std::vector<double>>& rows) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("save_csv: cannot open " + filename);
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
        os << "\n";
    }
}

inline void save_path_csv(const SamplePath& path, const std::string& filename,
                          const std::string& value_name = "value") {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("save_path_csv: cannot open " + filename);
    os << "t," << value_name << "\n";
    for (int i = 0; i <= path.grid.n_steps(); ++i)
        os << format_double(path.grid.time(i)) << "," << format_double(path.values[i]) << "\n";
}

} // namespace pathwise

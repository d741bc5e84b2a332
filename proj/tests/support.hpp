#pragma once

// Small generators and fixtures shared by the test binaries.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gcmi/data.hpp"
#include "gcmi/error.hpp"
#include "gcmi/random.hpp"

namespace gcmi::test {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    }
    return m;
}

inline Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n(rng);
    }
    return m;
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random probability vector; some entries are exactly zero when `sparse`.
inline std::vector<double> random_probabilities(Rng& rng, int size, bool sparse = false) {
    std::vector<double> w(static_cast<std::size_t>(size));
    double total = 0.0;
    for (auto& x : w) {
        x = (sparse && uniform(rng) < 0.3) ? 0.0 : uniform(rng, 0.01, 1.0);
        total += x;
    }
    if (total == 0.0) {
        w[0] = 1.0;
        total = 1.0;
    }
    for (auto& x : w) x /= total;
    // absorb rounding so the sum is 1 within 1e-15
    double s = 0.0;
    for (std::size_t i = 1; i < w.size(); ++i) s += w[i];
    w[0] = 1.0 - s;
    if (w[0] < 0.0) w[0] = 0.0;
    return w;
}

inline Mask random_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double p) {
    Mask m(rows, cols);
    std::bernoulli_distribution b(p);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m.set(r, c, b(rng));
    }
    return m;
}

// Mixed-kind table with random holes. Every column keeps at least
// `min_observed` observed cells so it stays imputable.
inline DataMatrix random_data_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double p_missing,
                                     Eigen::Index min_observed = 1) {
    Schema schema;
    Matrix values(rows, cols);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index c = 0; c < cols; ++c) {
        ColumnSpec spec;
        spec.name = "c" + std::to_string(c);
        const int pick = uniform_int(rng, 0, 3);
        spec.kind = pick == 2 ? ColumnKind::binary : (pick == 3 ? ColumnKind::categorical : ColumnKind::continuous);
        if (spec.kind == ColumnKind::binary) spec.levels = {"no", "yes"};
        if (spec.kind == ColumnKind::categorical) spec.levels = {"a", "b", "c"};
        for (Eigen::Index r = 0; r < rows; ++r) {
            values(r, c) = spec.is_discrete() ? uniform_int(rng, 0, spec.level_count() - 1) : normal(rng);
        }
        schema.push_back(std::move(spec));
    }
    Mask mask = random_mask(rng, rows, cols, p_missing);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < std::min(rows, min_observed); ++r) mask.set(r, c, false);
    }
    return DataMatrix(std::move(schema), std::move(values), std::move(mask));
}

inline bool bit_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = a.data()[i];
        const double y = b.data()[i];
        if (std::isnan(x) && std::isnan(y)) continue;
        if (std::memcmp(&x, &y, sizeof(double)) != 0) return false;
    }
    return true;
}

template <class F>
ErrorKind error_kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    throw std::logic_error("expected a gcmi::Error");
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("gcmi_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

} // namespace gcmi::test

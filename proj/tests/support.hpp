#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pelab/grid.hpp"

namespace pelab::testing {

/// Seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng_); }
    std::vector<double> vec(std::size_t n, double lo, double hi) {
        std::vector<double> v(n);
        for (double& x : v) x = uniform(lo, hi);
        return v;
    }
    GridSpec grid(Boundary b, int max_dim = 3) {
        const int n = static_cast<int>(integer(1, max_dim));
        std::vector<std::size_t> sizes;
        for (int a = 0; a < n; ++a) sizes.push_back(static_cast<std::size_t>(integer(4, n == 1 ? 40 : (n == 2 ? 14 : 7))));
        return GridSpec(n, sizes, uniform(0.05, 0.5), b);
    }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// Trajectory holding `count` copies of `s` spaced `spacing` apart from t = 0.
inline Trajectory stationary(const FieldState& s, std::size_t count, double spacing) {
    Trajectory t;
    t.dt = spacing;
    for (std::size_t k = 0; k < count; ++k) {
        FieldState c = s;
        c.t = static_cast<double>(k) * spacing;
        t.snapshots.push_back(c);
    }
    return t;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace pelab::testing

#pragma once

// Uniform Cartesian grids, multi-component fields, second-order stencils and
// parabolic-cylinder bookkeeping.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pelab/error.hpp"

namespace pelab {

/// Pairwise (tree) summation. Rounding error grows like O(log n) instead of O(n).
inline double pairwise_sum(std::span<const double> v) {
    constexpr std::size_t leaf = 16;
    if (v.size() <= leaf) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

enum class Boundary : std::uint8_t { Periodic = 0, Dirichlet = 1 };

inline const char* to_string(Boundary b) {
    return b == Boundary::Periodic ? "periodic" : "dirichlet";
}

/// Uniform grid in 1, 2 or 3 dimensions. Point i along an axis sits at x = i*h.
/// Flat indices are row-major with the last axis fastest.
class GridSpec {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    GridSpec() = default;

    GridSpec(int dim, std::vector<std::size_t> sizes, double h, Boundary boundary)
        : dim_(dim), h_(h), boundary_(boundary) {
        if (dim < 1 || dim > 3) throw ShapeError("grid dimension must be 1, 2 or 3");
        if (sizes.size() != static_cast<std::size_t>(dim))
            throw ShapeError("grid needs one size per axis");
        if (!(h > 0.0) || !std::isfinite(h)) throw ShapeError("grid spacing must be positive");
        for (std::size_t a = 0; a < sizes.size(); ++a) {
            if (sizes[a] < 4) throw ShapeError("every grid axis needs at least 4 points");
            sizes_[a] = sizes[a];
        }
        points_ = 1;
        for (int a = dim_ - 1; a >= 0; --a) {
            strides_[a] = points_;
            points_ *= sizes_[a];
        }
    }

    /// Convenience: the same number of points on every axis.
    static GridSpec cube(int dim, std::size_t size, double h, Boundary boundary) {
        return GridSpec(dim, std::vector<std::size_t>(static_cast<std::size_t>(dim), size), h,
                        boundary);
    }

    int dim() const noexcept { return dim_; }
    double h() const noexcept { return h_; }
    Boundary boundary() const noexcept { return boundary_; }
    bool periodic() const noexcept { return boundary_ == Boundary::Periodic; }
    std::size_t size(int axis) const noexcept { return sizes_[axis]; }
    std::vector<std::size_t> sizes() const {
        return {sizes_.begin(), sizes_.begin() + dim_};
    }
    std::size_t points() const noexcept { return points_; }
    std::size_t stride(int axis) const noexcept { return strides_[axis]; }

    /// h^n, the volume attached to one grid point.
    double cell_volume() const noexcept { return std::pow(h_, dim_); }

    /// Physical length of an axis: size*h when periodic, (size-1)*h otherwise.
    double length(int axis) const noexcept {
        const auto s = static_cast<double>(sizes_[axis]);
        return periodic() ? s * h_ : (s - 1.0) * h_;
    }

    std::array<std::size_t, 3> coords(std::size_t flat) const noexcept {
        std::array<std::size_t, 3> c{0, 0, 0};
        for (int a = 0; a < dim_; ++a) {
            c[a] = flat / strides_[a];
            flat %= strides_[a];
        }
        return c;
    }

    std::size_t flat(const std::array<std::size_t, 3>& c) const noexcept {
        std::size_t f = 0;
        for (int a = 0; a < dim_; ++a) f += c[a] * strides_[a];
        return f;
    }

    double position(std::size_t flat_index, int axis) const noexcept {
        return static_cast<double>(coords(flat_index)[axis]) * h_;
    }

    /// Neighbour of `flat_index` shifted by `offset` along `axis`. Periodic grids
    /// wrap; Dirichlet grids return npos when the shift leaves the grid.
    std::size_t shifted(std::size_t flat_index, int axis, long offset) const noexcept {
        const auto c = static_cast<long>((flat_index / strides_[axis]) % sizes_[axis]);
        const auto s = static_cast<long>(sizes_[axis]);
        long m = c + offset;
        if (periodic()) {
            m %= s;
            if (m < 0) m += s;
        } else if (m < 0 || m >= s) {
            return npos;
        }
        return flat_index + static_cast<std::size_t>(m - c) * strides_[axis];
    }

    bool on_boundary(std::size_t flat_index) const noexcept {
        if (periodic()) return false;
        const auto c = coords(flat_index);
        for (int a = 0; a < dim_; ++a)
            if (c[a] == 0 || c[a] + 1 == sizes_[a]) return true;
        return false;
    }

    /// Points updated by the stencils: all of them when periodic, the interior otherwise.
    std::vector<std::size_t> interior() const {
        std::vector<std::size_t> out;
        out.reserve(points_);
        for (std::size_t p = 0; p < points_; ++p)
            if (!on_boundary(p)) out.push_back(p);
        return out;
    }

    /// The one-cell boundary layer of a Dirichlet grid (empty when periodic).
    std::vector<std::size_t> boundary_layer() const {
        std::vector<std::size_t> out;
        for (std::size_t p = 0; p < points_; ++p)
            if (on_boundary(p)) out.push_back(p);
        return out;
    }

    bool operator==(const GridSpec& o) const noexcept {
        return dim_ == o.dim_ && h_ == o.h_ && boundary_ == o.boundary_ && sizes_ == o.sizes_;
    }

private:
    int dim_ = 1;
    std::array<std::size_t, 3> sizes_{4, 1, 1};
    std::array<std::size_t, 3> strides_{1, 1, 1};
    std::size_t points_ = 4;
    double h_ = 1.0;
    Boundary boundary_ = Boundary::Periodic;
};

inline void to_json(nlohmann::json& j, const GridSpec& g) {
    j = nlohmann::json{{"n", g.dim()}, {"sizes", g.sizes()}, {"h", g.h()},
                       {"boundary", to_string(g.boundary())}};
}

inline void from_json(const nlohmann::json& j, GridSpec& g) {
    const auto b = j.at("boundary").get<std::string>();
    Boundary boundary;
    if (b == "periodic")
        boundary = Boundary::Periodic;
    else if (b == "dirichlet")
        boundary = Boundary::Dirichlet;
    else
        throw ConfigError("unknown boundary kind '" + b + "'");
    g = GridSpec(j.at("n").get<int>(), j.at("sizes").get<std::vector<std::size_t>>(),
                 j.at("h").get<double>(), boundary);
}

inline void require_finite(std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw NumericalError(std::string(what) + ": non-finite value at index " +
                                     std::to_string(i),
                                 i);
}

/// N-component field on a grid at one instant. Values are component-major:
/// component c occupies [c*points, (c+1)*points).
struct FieldState {
    GridSpec grid;
    int components = 1;
    std::vector<double> values;
    double t = 0.0;
    /// Per-component value held on the boundary layer (Dirichlet grids only).
    std::vector<double> boundary_values;

    FieldState() = default;
    FieldState(GridSpec g, int n_components, double time = 0.0)
        : grid(std::move(g)), components(n_components),
          values(grid.points() * static_cast<std::size_t>(n_components), 0.0), t(time) {
        if (n_components < 1) throw ShapeError("a field needs at least one component");
        if (!grid.periodic()) boundary_values.assign(static_cast<std::size_t>(n_components), 0.0);
    }

    std::size_t points() const noexcept { return grid.points(); }

    double& at(int c, std::size_t p) noexcept {
        return values[static_cast<std::size_t>(c) * grid.points() + p];
    }
    double at(int c, std::size_t p) const noexcept {
        return values[static_cast<std::size_t>(c) * grid.points() + p];
    }

    std::span<double> component(int c) {
        return {values.data() + static_cast<std::size_t>(c) * grid.points(), grid.points()};
    }
    std::span<const double> component(int c) const {
        return {values.data() + static_cast<std::size_t>(c) * grid.points(), grid.points()};
    }

    /// Euclidean norm of the state vector at point p.
    double norm_at(std::size_t p) const noexcept {
        double s = 0.0;
        for (int c = 0; c < components; ++c) s += at(c, p) * at(c, p);
        return std::sqrt(s);
    }

    void vector_at(std::size_t p, std::span<double> out) const noexcept {
        for (int c = 0; c < components; ++c) out[c] = at(c, p);
    }

    /// Overwrites the boundary layer with boundary_values.
    void impose_boundary() {
        if (grid.periodic()) return;
        for (std::size_t p : grid.boundary_layer())
            for (int c = 0; c < components; ++c) at(c, p) = boundary_values[c];
    }

    void validate() const {
        if (values.size() != grid.points() * static_cast<std::size_t>(components))
            throw ShapeError("field value count does not match grid and components");
        require_finite(values, "field state");
        if (!grid.periodic()) {
            if (boundary_values.size() != static_cast<std::size_t>(components))
                throw ShapeError("Dirichlet state needs one boundary value per component");
            for (std::size_t p : grid.boundary_layer())
                for (int c = 0; c < components; ++c)
                    if (at(c, p) != boundary_values[c])
                        throw ShapeError("boundary layer differs from boundary values at point " +
                                         std::to_string(p));
        }
    }
};

/// Central second-difference Laplacian. Dirichlet output is zero on the boundary layer.
inline std::vector<double> laplacian(std::span<const double> f, const GridSpec& grid) {
    if (f.size() != grid.points()) throw ShapeError("laplacian: field does not match grid");
    require_finite(f, "laplacian");
    std::vector<double> out(grid.points(), 0.0);
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    for (std::size_t p = 0; p < grid.points(); ++p) {
        if (grid.on_boundary(p)) continue;
        double acc = 0.0;
        for (int a = 0; a < grid.dim(); ++a)
            acc += f[grid.shifted(p, a, 1)] - 2.0 * f[p] + f[grid.shifted(p, a, -1)];
        out[p] = acc * inv_h2;
    }
    return out;
}

/// First difference of component values along one axis at point p: central where
/// both neighbours exist, one-sided (first order) on a Dirichlet boundary layer.
inline double first_difference(std::span<const double> f, const GridSpec& grid, std::size_t p,
                               int axis) noexcept {
    const std::size_t up = grid.shifted(p, axis, 1);
    const std::size_t dn = grid.shifted(p, axis, -1);
    if (up != GridSpec::npos && dn != GridSpec::npos) return (f[up] - f[dn]) / (2.0 * grid.h());
    if (up != GridSpec::npos) return (f[up] - f[p]) / grid.h();
    return (f[p] - f[dn]) / grid.h();
}

/// Sum over components and axes of squared first differences, |grad u|^2.
inline std::vector<double> gradient_sq(std::span<const double> values, int components,
                                       const GridSpec& grid) {
    if (values.size() != grid.points() * static_cast<std::size_t>(components))
        throw ShapeError("gradient_sq: field does not match grid");
    require_finite(values, "gradient_sq");
    std::vector<double> out(grid.points(), 0.0);
    for (int c = 0; c < components; ++c) {
        auto f = values.subspan(static_cast<std::size_t>(c) * grid.points(), grid.points());
        for (std::size_t p = 0; p < grid.points(); ++p)
            for (int a = 0; a < grid.dim(); ++a) {
                const double d = first_difference(f, grid, p, a);
                out[p] += d * d;
            }
    }
    return out;
}

inline std::vector<double> gradient_sq(const FieldState& s) {
    return gradient_sq(s.values, s.components, s.grid);
}

/// Parabolic cylinder Q(x0, t0, R) = B(x0, R) x (t0 - R^2, t0].
struct Cylinder {
    std::size_t center = 0;
    double t0 = 0.0;
    double R = 0.0;
};

/// Time-ordered snapshots of one run.
struct Trajectory {
    std::vector<FieldState> snapshots;
    double dt = 0.0;
    nlohmann::json meta = nlohmann::json::object();

    const GridSpec& grid() const { return snapshots.front().grid; }
    int components() const { return snapshots.front().components; }

    /// Time between stored snapshots (0 for a single snapshot).
    double spacing() const {
        return snapshots.size() < 2 ? 0.0 : snapshots[1].t - snapshots[0].t;
    }

    void validate() const {
        if (snapshots.empty()) throw ShapeError("trajectory has no snapshots");
        const double sp = spacing();
        for (std::size_t k = 1; k < snapshots.size(); ++k) {
            const auto& s = snapshots[k];
            if (!(s.grid == snapshots[0].grid) || s.components != snapshots[0].components)
                throw ShapeError("snapshots do not share grid and component count");
            const double gap = s.t - snapshots[k - 1].t;
            if (!(gap > 0.0)) throw ShapeError("snapshot times must increase strictly");
            if (std::abs(gap - sp) > 1e-9 * sp) throw ShapeError("snapshot spacing is not uniform");
        }
    }
};

/// Scalar field computed from one snapshot, e.g. |grad u|^2.
using SnapshotFunctional = std::function<std::vector<double>(const FieldState&)>;

/// Grid points with |x - x0| <= R. Periodic grids wrap; on Dirichlet grids the
/// ball must stay inside the grid.
inline std::vector<std::size_t> ball_points(const GridSpec& grid, std::size_t center, double R) {
    if (center >= grid.points()) throw DomainError("ball centre outside the grid");
    if (!(R >= 0.0)) throw DomainError("ball radius must be non-negative");
    const double h = grid.h();
    const long m = static_cast<long>(std::floor(R / h + 1e-9));
    for (int a = 0; a < grid.dim(); ++a) {
        if (grid.periodic()) {
            if (2 * m + 1 > static_cast<long>(grid.size(a)))
                throw DomainError("ball of radius " + std::to_string(R) +
                                  " wraps onto itself along axis " + std::to_string(a));
        } else {
            const auto c = static_cast<long>(grid.coords(center)[a]);
            if (c - m < 0 || c + m >= static_cast<long>(grid.size(a)))
                throw DomainError("ball of radius " + std::to_string(R) +
                                  " leaves the grid along axis " + std::to_string(a));
        }
    }
    std::vector<std::size_t> out;
    const long mz = grid.dim() > 2 ? m : 0;
    const long my = grid.dim() > 1 ? m : 0;
    const double r2 = R * R * (1.0 + 1e-12);
    for (long i = -m; i <= m; ++i)
        for (long j = -my; j <= my; ++j)
            for (long k = -mz; k <= mz; ++k) {
                const double d2 = static_cast<double>(i * i + j * j + k * k) * h * h;
                if (d2 > r2) continue;
                std::size_t p = grid.shifted(center, 0, i);
                if (grid.dim() > 1) p = grid.shifted(p, 1, j);
                if (grid.dim() > 2) p = grid.shifted(p, 2, k);
                out.push_back(p);
            }
    return out;
}

/// Snapshot indices whose time lies in (t0 - R^2, t0]. Throws when the window
/// does not fit in the trajectory's time range.
inline std::vector<std::size_t> window_snapshots(const Trajectory& traj, double t0, double R) {
    const auto& s = traj.snapshots;
    if (s.empty()) throw DomainError("trajectory has no snapshots");
    const double eps = 1e-9 * std::max(traj.spacing(), 1e-300);
    const double lo = t0 - R * R;
    if (lo < s.front().t - eps)
        throw DomainError("cylinder starts at t=" + std::to_string(lo) +
                          " before the first snapshot t=" + std::to_string(s.front().t));
    if (t0 > s.back().t + eps)
        throw DomainError("cylinder top t0=" + std::to_string(t0) +
                          " is after the last snapshot t=" + std::to_string(s.back().t));
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s[k].t > lo + eps && s[k].t <= t0 + eps) out.push_back(k);
    return out;
}

/// Scalar field computed from the snapshot with a given index (for quantities
/// that need neighbouring snapshots, such as forward time differences).
using IndexedFunctional = std::function<std::vector<double>(std::size_t)>;

namespace detail {

struct CylinderSum {
    double sum = 0.0;
    std::size_t count = 0;
    std::size_t snapshots = 0;
};

inline CylinderSum cylinder_sum(const Trajectory& traj, const Cylinder& q,
                                const IndexedFunctional& g, std::size_t min_snapshots) {
    const auto times = window_snapshots(traj, q.t0, q.R);
    if (times.size() < min_snapshots)
        throw DomainError("cylinder time window (" + std::to_string(q.t0 - q.R * q.R) + ", " +
                          std::to_string(q.t0) + "] holds " + std::to_string(times.size()) +
                          " snapshots, need " + std::to_string(min_snapshots));
    const auto ball = ball_points(traj.grid(), q.center, q.R);
    std::vector<double> terms;
    terms.reserve(times.size() * ball.size());
    for (std::size_t k : times) {
        const auto field = g(k);
        if (field.size() != traj.grid().points())
            throw ShapeError("cylinder functional returned a field of the wrong size");
        for (std::size_t p : ball) terms.push_back(field[p]);
    }
    return {pairwise_sum(terms), terms.size(), times.size()};
}

inline IndexedFunctional by_index(const Trajectory& traj, const SnapshotFunctional& g) {
    return [&traj, &g](std::size_t k) { return g(traj.snapshots[k]); };
}

} // namespace detail

/// Space-time integral of g over the discrete cylinder: sum * h^n * spacing.
inline double cylinder_integral(const Trajectory& traj, const Cylinder& q,
                                const IndexedFunctional& g) {
    const auto s = detail::cylinder_sum(traj, q, g, 1);
    return s.sum * traj.grid().cell_volume() * traj.spacing();
}

inline double cylinder_integral(const Trajectory& traj, const Cylinder& q,
                                const SnapshotFunctional& g) {
    return cylinder_integral(traj, q, detail::by_index(traj, g));
}

/// Space-time average of g over the discrete cylinder.
inline double cylinder_average(const Trajectory& traj, const Cylinder& q,
                               const IndexedFunctional& g) {
    const auto s = detail::cylinder_sum(traj, q, g, 2);
    return s.sum / static_cast<double>(s.count);
}

inline double cylinder_average(const Trajectory& traj, const Cylinder& q,
                               const SnapshotFunctional& g) {
    return cylinder_average(traj, q, detail::by_index(traj, g));
}

} // namespace pelab

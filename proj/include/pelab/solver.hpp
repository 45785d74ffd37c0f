#pragma once

// Explicit forward-Euler integration of
//   u_t = Laplacian(grad Phi(u))                  (diffusion system)
//   u^i_t = (a u^i_x + c^i H_x)_x                 (strongly coupled system)
//   u_t = Laplacian(g(u))                         (scalar reduced equation)
// plus the config-driven run loop and named initial-data families.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pelab/error.hpp"
#include "pelab/grid.hpp"
#include "pelab/hash.hpp"
#include "pelab/potential.hpp"

namespace pelab {

/// Largest stable explicit step: sigma * h^2 / (2 n Lambda).
inline double cfl_dt(const GridSpec& grid, double Lambda, double sigma = 1.0) {
    return sigma * grid.h() * grid.h() / (2.0 * grid.dim() * Lambda);
}

inline double cfl_dt(const GridSpec& grid, const EllipticityWindow& w, double sigma = 1.0) {
    return cfl_dt(grid, w.Lambda, sigma);
}

inline std::string describe_point(const GridSpec& grid, std::size_t p) {
    const auto c = grid.coords(p);
    std::string s = "point " + std::to_string(p) + " (";
    for (int a = 0; a < grid.dim(); ++a) {
        if (a) s += ",";
        s += std::to_string(c[a]);
    }
    return s + ")";
}

namespace detail {

inline RangeError locate(const RangeError& e, const GridSpec& grid, std::size_t p) {
    return RangeError(std::string(e.what()) + " at " + describe_point(grid, p), p, e.magnitude());
}

inline void finish_step(FieldState& out, double dt) {
    out.impose_boundary();
    for (std::size_t i = 0; i < out.values.size(); ++i)
        if (!std::isfinite(out.values[i])) {
            const std::size_t p = i % out.points();
            throw NumericalError("non-finite value after step at " + describe_point(out.grid, p), p);
        }
    out.t += dt;
}

/// out += dt * Laplacian(v) on the updated points, component by component.
inline void add_laplacian(FieldState& out, const std::vector<double>& v, double dt) {
    const std::size_t P = out.points();
    for (int c = 0; c < out.components; ++c) {
        const auto lap = laplacian(std::span<const double>(v).subspan(c * P, P), out.grid);
        auto u = out.component(c);
        for (std::size_t p = 0; p < P; ++p)
            if (!out.grid.on_boundary(p)) u[p] += dt * lap[p];
    }
}

} // namespace detail

/// One forward-Euler step of u_t = Laplacian(grad Phi(u)) on v = grad Phi(u).
inline FieldState step_diffusion(const FieldState& s, const RadialPotential& p, double dt) {
    const std::size_t P = s.points();
    const int N = s.components;
    std::vector<double> v(s.values.size());
    std::vector<double> z(N), g(N);
    for (std::size_t q = 0; q < P; ++q) {
        s.vector_at(q, z);
        if (!std::all_of(z.begin(), z.end(), [](double x) { return std::isfinite(x); }))
            throw NumericalError("non-finite state at " + describe_point(s.grid, q), q);
        try {
            grad_Phi(p, z, g);
        } catch (const RangeError& e) {
            throw detail::locate(e, s.grid, q);
        }
        for (int c = 0; c < N; ++c) v[c * P + q] = g[c];
    }
    FieldState out = s;
    detail::add_laplacian(out, v, dt);
    detail::finish_step(out, dt);
    return out;
}

/// One forward-Euler step of u_t = Laplacian(g(u)), applied to every component.
inline FieldState step_scalar(const FieldState& s, const RealFunction& g, double dt) {
    std::vector<double> v(s.values.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(s.values[i]))
            throw NumericalError("non-finite state at " + describe_point(s.grid, i % s.points()),
                                 i % s.points());
        v[i] = g(s.values[i]);
    }
    FieldState out = s;
    detail::add_laplacian(out, v, dt);
    detail::finish_step(out, dt);
    return out;
}

/// Odd extension of phi': the scalar nonlinearity of the N = 1 diffusion equation.
inline RealFunction scalar_nonlinearity(const RadialPotential& p) {
    return [p](double u) {
        const double r = std::abs(u);
        check_range(p, r);
        return u < 0 ? -p.phi1(r) : p.phi1(r);
    };
}

/// One conservative step of u^i_t = (a u^i_x + c^i H_x)_x. Face fluxes use the
/// arithmetic mean of a and c^i from the two adjacent points.
inline FieldState step_coupled(const FieldState& s, const CoupledCoefficients& cc, double dt) {
    const std::size_t P = s.points();
    const int N = s.components;
    const auto& grid = s.grid;
    std::vector<double> a(P), H(P), c(s.values.size());
    std::vector<double> z(N), cz(N);
    for (std::size_t q = 0; q < P; ++q) {
        s.vector_at(q, z);
        if (!std::all_of(z.begin(), z.end(), [](double x) { return std::isfinite(x); }))
            throw NumericalError("non-finite state at " + describe_point(grid, q), q);
        try {
            a[q] = cc.a(z);
            H[q] = cc.H(z);
            cc.c(z, cz);
        } catch (const RangeError& e) {
            throw detail::locate(e, grid, q);
        }
        for (int i = 0; i < N; ++i) c[i * P + q] = cz[i];
    }
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    FieldState out = s;
    for (int i = 0; i < N; ++i) {
        const auto u = s.component(i);
        auto ui = out.component(i);
        const double* ci = c.data() + i * P;
        auto flux = [&](std::size_t l, std::size_t r) {
            return 0.5 * (a[l] + a[r]) * (u[r] - u[l]) + 0.5 * (ci[l] + ci[r]) * (H[r] - H[l]);
        };
        for (std::size_t q = 0; q < P; ++q) {
            if (grid.on_boundary(q)) continue;
            double acc = 0.0;
            for (int ax = 0; ax < grid.dim(); ++ax) {
                const std::size_t up = grid.shifted(q, ax, 1);
                const std::size_t dn = grid.shifted(q, ax, -1);
                acc += flux(q, up) - flux(dn, q);
            }
            ui[q] += dt * acc * inv_h2;
        }
    }
    detail::finish_step(out, dt);
    return out;
}

// ---------------------------------------------------------------------------
// Initial data

/// Deterministic uniform doubles from mt19937_64 (the standard fixes its output
/// sequence; distributions are implementation-defined, so they are avoided).
class SeededRandom {
public:
    explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    long integer(long lo, long hi) {
        return lo + static_cast<long>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::mt19937_64 engine_;
};

/// Named initial-data family with its parameters.
struct InitialSpec {
    std::string family = "fourier_mode";
    std::uint64_t seed = 1;
    double amplitude = 1.0;
    int mode = 1;
    int kmax = 3;
    int terms = 6;
    double width = 0.1;
    std::vector<double> direction;  // defaults to e_1
    std::vector<double> base;       // defaults to boundary values or 0
    std::vector<double> center;     // physical coordinates, defaults to the domain centre
};

inline void from_json(const nlohmann::json& j, InitialSpec& s) {
    s.family = j.value("family", s.family);
    s.seed = j.value("seed", s.seed);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.mode = j.value("mode", s.mode);
    s.kmax = j.value("kmax", s.kmax);
    s.terms = j.value("terms", s.terms);
    s.width = j.value("width", s.width);
    s.direction = j.value("direction", s.direction);
    s.base = j.value("base", s.base);
    s.center = j.value("center", s.center);
}

inline void to_json(nlohmann::json& j, const InitialSpec& s) {
    j = nlohmann::json{{"family", s.family}, {"seed", s.seed},   {"amplitude", s.amplitude},
                       {"mode", s.mode},     {"kmax", s.kmax},   {"terms", s.terms},
                       {"width", s.width},   {"direction", s.direction}, {"base", s.base},
                       {"center", s.center}};
}

namespace detail {

inline std::vector<double> unit_vector(std::vector<double> d, int N) {
    if (d.empty()) {
        d.assign(N, 0.0);
        d[0] = 1.0;
    }
    if (static_cast<int>(d.size()) != N) throw ConfigError("direction needs one entry per component");
    const double n = euclidean_norm(d);
    if (!(n > 0.0)) throw ConfigError("direction must be non-zero");
    for (double& x : d) x /= n;
    return d;
}

/// Signed displacement from centre along an axis, minimal image when periodic.
inline double displacement(const GridSpec& g, double x, double c, int axis) {
    double d = x - c;
    if (g.periodic()) {
        const double L = g.length(axis);
        d -= L * std::round(d / L);
    }
    return d;
}

/// Smooth scalar profile with sup-norm 1 built from random modes. Dirichlet
/// grids use sine products, which vanish on the boundary layer.
inline std::vector<double> band_limited_profile(const GridSpec& g, SeededRandom& rng, int kmax,
                                                int terms) {
    struct Mode {
        std::array<long, 3> k{};
        double amp, phase;
    };
    std::vector<Mode> modes;
    for (int t = 0; t < terms; ++t) {
        Mode m{};
        double k2 = 0.0;
        do {
            k2 = 0.0;
            for (int a = 0; a < g.dim(); ++a) {
                m.k[a] = g.periodic() ? rng.integer(-kmax, kmax) : rng.integer(1, kmax);
                k2 += static_cast<double>(m.k[a] * m.k[a]);
            }
        } while (k2 == 0.0);
        m.amp = rng.uniform(-1.0, 1.0) / k2;
        m.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        modes.push_back(m);
    }
    std::vector<double> f(g.points(), 0.0);
    for (std::size_t p = 0; p < g.points(); ++p) {
        double acc = 0.0;
        for (const auto& m : modes) {
            if (g.periodic()) {
                double arg = m.phase;
                for (int a = 0; a < g.dim(); ++a)
                    arg += 2.0 * std::numbers::pi * static_cast<double>(m.k[a]) * g.position(p, a) /
                           g.length(a);
                acc += m.amp * std::cos(arg);
            } else {
                double prod = m.amp;
                for (int a = 0; a < g.dim(); ++a)
                    prod *= std::sin(std::numbers::pi * static_cast<double>(m.k[a]) *
                                     g.position(p, a) / g.length(a));
                acc += prod;
            }
        }
        f[p] = acc;
    }
    double peak = 0.0;
    for (double x : f) peak = std::max(peak, std::abs(x));
    if (peak > 0.0)
        for (double& x : f) x /= peak;
    return f;
}

} // namespace detail

/// Evaluates an initial-data family on a grid. Dirichlet states get their
/// boundary layer from `boundary_values`.
inline FieldState make_initial(const GridSpec& grid, int N, const InitialSpec& spec,
                               const std::vector<double>& boundary_values = {}) {
    FieldState s(grid, N, 0.0);
    if (!grid.periodic()) {
        s.boundary_values = boundary_values.empty() ? std::vector<double>(N, 0.0) : boundary_values;
        if (static_cast<int>(s.boundary_values.size()) != N)
            throw ConfigError("boundary_values needs one entry per component");
    }
    std::vector<double> base = spec.base;
    if (base.empty()) base = grid.periodic() ? std::vector<double>(N, 0.0) : s.boundary_values;
    if (static_cast<int>(base.size()) != N) throw ConfigError("base needs one entry per component");
    const auto dir = detail::unit_vector(spec.direction, N);
    std::vector<double> center = spec.center;
    if (center.empty())
        for (int a = 0; a < grid.dim(); ++a) center.push_back(0.5 * grid.length(a));
    if (static_cast<int>(center.size()) != grid.dim())
        throw ConfigError("center needs one coordinate per axis");
    SeededRandom rng(spec.seed);
    const double A = spec.amplitude;
    const std::size_t P = grid.points();

    auto bump = [&](std::size_t p, const std::vector<double>& c0) {
        double d2 = 0.0;
        for (int a = 0; a < grid.dim(); ++a) {
            const double d = detail::displacement(grid, grid.position(p, a), c0[a], a);
            d2 += d * d;
        }
        return std::exp(-d2 / (2.0 * spec.width * spec.width));
    };

    if (spec.family == "constant") {
        for (int c = 0; c < N; ++c)
            for (std::size_t p = 0; p < P; ++p) s.at(c, p) = base[c] + A * dir[c];
    } else if (spec.family == "fourier_mode") {
        for (std::size_t p = 0; p < P; ++p) {
            double prod = A;
            for (int a = 0; a < grid.dim(); ++a) {
                const double k = grid.periodic() ? 2.0 * spec.mode : static_cast<double>(spec.mode);
                prod *= std::sin(k * std::numbers::pi * grid.position(p, a) / grid.length(a));
            }
            for (int c = 0; c < N; ++c) s.at(c, p) = base[c] + prod * dir[c];
        }
    } else if (spec.family == "band_limited") {
        if (!spec.direction.empty()) {
            const auto f = detail::band_limited_profile(grid, rng, spec.kmax, spec.terms);
            for (int c = 0; c < N; ++c)
                for (std::size_t p = 0; p < P; ++p) s.at(c, p) = base[c] + A * f[p] * dir[c];
        } else {
            for (int c = 0; c < N; ++c) {
                const auto f = detail::band_limited_profile(grid, rng, spec.kmax, spec.terms);
                for (std::size_t p = 0; p < P; ++p) s.at(c, p) = base[c] + A * f[p];
            }
        }
    } else if (spec.family == "radial_bump") {
        for (std::size_t p = 0; p < P; ++p) {
            const double b = A * bump(p, center);
            for (int c = 0; c < N; ++c) s.at(c, p) = base[c] + b * dir[c];
        }
    } else if (spec.family == "two_bump") {
        auto c1 = center, c2 = center;
        c1[0] = grid.length(0) / 3.0;
        c2[0] = 2.0 * grid.length(0) / 3.0;
        std::vector<double> d2(N, 0.0);
        d2[N > 1 ? 1 : 0] = 1.0;
        for (std::size_t p = 0; p < P; ++p) {
            const double b1 = A * bump(p, c1);
            const double b2 = A * bump(p, c2);
            for (int c = 0; c < N; ++c) s.at(c, p) = base[c] + b1 * dir[c] + b2 * d2[c];
        }
    } else {
        throw ConfigError("unknown initial-data family '" + spec.family + "'");
    }
    s.impose_boundary();
    return s;
}

// ---------------------------------------------------------------------------
// Run configuration and driver

enum class ModelKind { Diffusion, Coupled, CoupledHeat, Scalar };

struct RunConfig {
    GridSpec grid;
    int components = 1;
    ModelKind kind = ModelKind::Diffusion;
    nlohmann::json potential = "quadratic";
    double r_max = 1.0;
    double r_min = 0.0;  // lower end of the certified range for coupled runs
    double t_end = 0.0;
    double cfl_sigma = 0.9;
    std::optional<double> dt;  // requested step; lowered to divide t_end evenly
    int snapshot_every = 1;
    InitialSpec initial;
    std::vector<double> boundary_values;
    nlohmann::json source = nlohmann::json::object();  // document the config was read from

    void validate() const {
        if (components < 1 || components > 8) throw ConfigError("components must be in 1..8");
        if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be >= 0");
        if (!(cfl_sigma > 0.0 && cfl_sigma <= 1.0)) throw ConfigError("cfl_sigma must be in (0, 1]");
        if (snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
        if (kind == ModelKind::Scalar && components != 1)
            throw ConfigError("scalar model needs exactly one component");
        if (!grid.periodic() && !boundary_values.empty() &&
            static_cast<int>(boundary_values.size()) != components)
            throw ConfigError("boundary_values needs one entry per component");
    }
};

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::Diffusion: return "diffusion";
    case ModelKind::Coupled: return "coupled";
    case ModelKind::CoupledHeat: return "coupled_heat";
    case ModelKind::Scalar: return "scalar";
    }
    return "?";
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.grid = j.at("grid").get<GridSpec>();
        c.components = j.value("components", 1);
        const auto& m = j.contains("model") ? j.at("model") : nlohmann::json::object();
        const auto kind = m.value("kind", std::string("diffusion"));
        if (kind == "diffusion")
            c.kind = ModelKind::Diffusion;
        else if (kind == "coupled")
            c.kind = ModelKind::Coupled;
        else if (kind == "coupled_heat")
            c.kind = ModelKind::CoupledHeat;
        else if (kind == "scalar")
            c.kind = ModelKind::Scalar;
        else
            throw ConfigError("unknown model kind '" + kind + "'");
        c.potential = m.value("potential", nlohmann::json("quadratic"));
        c.r_max = m.value("r_max", 1.0);
        c.r_min = m.value("r_min", 0.0);
        c.t_end = j.at("t_end").get<double>();
        c.cfl_sigma = j.value("cfl_sigma", 0.9);
        if (j.contains("dt")) c.dt = j.at("dt").get<double>();
        c.snapshot_every = j.value("snapshot_every", 1);
        if (j.contains("initial")) c.initial = j.at("initial").get<InitialSpec>();
        c.boundary_values = j.value("boundary_values", std::vector<double>{});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid run config: ") + e.what());
    } catch (const ShapeError& e) {
        throw ConfigError(std::string("invalid grid: ") + e.what());
    }
    c.source = j;
    c.validate();
    return c;
}

/// JSON document that reads back to the same config.
inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j = {{"grid", c.grid},
                        {"components", c.components},
                        {"model", {{"kind", to_string(c.kind)},
                                   {"potential", c.potential},
                                   {"r_max", c.r_max},
                                   {"r_min", c.r_min}}},
                        {"t_end", c.t_end},
                        {"cfl_sigma", c.cfl_sigma},
                        {"snapshot_every", c.snapshot_every},
                        {"initial", c.initial}};
    if (c.dt) j["dt"] = *c.dt;
    if (!c.boundary_values.empty()) j["boundary_values"] = c.boundary_values;
    return j;
}

/// Resolved model: potential, window and coefficients shared by run() and diagnostics.
struct Model {
    ModelKind kind = ModelKind::Diffusion;
    RadialPotential potential;
    EllipticityWindow window;
    std::optional<CoupledCoefficients> coupled;
    double Lambda = 1.0;  // diffusivity bound used for the CFL step

    FieldState step(const FieldState& s, double dt) const {
        switch (kind) {
        case ModelKind::Diffusion: return step_diffusion(s, potential, dt);
        case ModelKind::Scalar: return step_scalar(s, scalar_nonlinearity(potential), dt);
        case ModelKind::Coupled:
        case ModelKind::CoupledHeat: return step_coupled(s, *coupled, dt);
        }
        throw Error("unreachable");
    }
};

inline Model make_model(const RunConfig& cfg) {
    Model m;
    m.kind = cfg.kind;
    if (cfg.kind == ModelKind::CoupledHeat) {
        m.potential = potentials::quadratic(cfg.r_max);
        m.window = certify_window(m.potential);
        m.coupled = heat_coefficients(cfg.r_max);
        m.Lambda = 1.0;
        return m;
    }
    m.potential = potential_from_json(cfg.potential, cfg.r_max);
    m.window = certify_window(m.potential);
    m.Lambda = m.window.Lambda;
    if (cfg.kind == ModelKind::Coupled) {
        m.coupled = coupled_decomposition(m.potential, cfg.r_min);
        m.Lambda = std::max(m.Lambda, m.coupled->effective_Lambda());
    }
    return m;
}

/// Step size and step count: the largest dt <= min(CFL, requested) that divides
/// t_end into a whole number of snapshot intervals.
struct StepPlan {
    double dt = 0.0;
    std::size_t steps = 0;
};

inline StepPlan plan_steps(const RunConfig& cfg, double Lambda) {
    double dt = cfl_dt(cfg.grid, Lambda, cfg.cfl_sigma);
    if (cfg.dt) {
        if (!(*cfg.dt > 0.0)) throw ConfigError("dt must be positive");
        if (*cfg.dt > dt * (1.0 + 1e-12))
            throw ConfigError("requested dt " + std::to_string(*cfg.dt) +
                              " exceeds the CFL limit " + std::to_string(dt));
        dt = *cfg.dt;
    }
    if (cfg.t_end == 0.0) return {dt, 0};
    const auto se = static_cast<std::size_t>(cfg.snapshot_every);
    const auto blocks = static_cast<std::size_t>(std::ceil(cfg.t_end / dt / static_cast<double>(se) - 1e-9));
    const std::size_t steps = std::max<std::size_t>(1, blocks) * se;
    return {cfg.t_end / static_cast<double>(steps), steps};
}

/// Canonical text of a config: sorted keys, no whitespace.
inline std::string canonical(const nlohmann::json& j) { return j.dump(); }

/// Rejects initial data outside the certified range before any step is taken.
inline void certify_initial(const FieldState& s, const Model& m) {
    const double r_max = m.coupled ? m.coupled->r_max : m.potential.r_max;
    for (std::size_t p = 0; p < s.points(); ++p) {
        const double r = s.norm_at(p);
        if (!(r <= r_max * (1.0 + 1e-12)))
            throw RangeError("initial data |u| = " + std::to_string(r) + " exceeds r_max = " +
                                 std::to_string(r_max) + " at " + describe_point(s.grid, p),
                             p, r);
    }
}

/// Integrates from an explicit initial state.
inline Trajectory run(const RunConfig& cfg, FieldState initial) {
    cfg.validate();
    const Model model = make_model(cfg);
    const StepPlan plan = plan_steps(cfg, model.Lambda);
    initial.validate();
    certify_initial(initial, model);

    Trajectory traj;
    traj.dt = plan.dt;
    traj.meta = {{"model", to_string(cfg.kind)},
                 {"potential", model.potential.id},
                 {"window", model.window},
                 {"Lambda_cfl", model.Lambda},
                 {"dt", plan.dt},
                 {"steps", plan.steps},
                 {"snapshot_every", cfg.snapshot_every},
                 {"seed", cfg.initial.seed},
                 {"t_end", cfg.t_end},
                 {"tolerances", {{"radial_epsilon", kRadialEpsilon}, {"taylor_radius", kTaylorRadius}}},
                 {"config_hash", content_hash(canonical(run_config_to_json(cfg)))}};
    if (model.coupled) traj.meta["coupled"] = *model.coupled;

    const double t0 = initial.t;
    traj.snapshots.push_back(initial);
    FieldState cur = std::move(initial);
    for (std::size_t k = 1; k <= plan.steps; ++k) {
        try {
            cur = model.step(cur, plan.dt);
        } catch (const RangeError& e) {
            throw RangeError("step " + std::to_string(k) + ": " + e.what(), e.point(), e.magnitude());
        } catch (const NumericalError& e) {
            throw NumericalError("step " + std::to_string(k) + ": " + e.what(), e.point());
        }
        cur.t = t0 + static_cast<double>(k) * plan.dt;
        if (k % static_cast<std::size_t>(cfg.snapshot_every) == 0) traj.snapshots.push_back(cur);
    }
    return traj;
}

inline Trajectory run(const RunConfig& cfg) {
    const FieldState init = make_initial(cfg.grid, cfg.components, cfg.initial, cfg.boundary_values);
    return run(cfg, init);
}

} // namespace pelab

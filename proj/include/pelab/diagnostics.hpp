#pragma once

// Numerical checks of the estimates satisfied by the diffusion and strongly
// coupled flows: H^-1 contraction, sup-norm bounds, entropy subsolution
// residuals, Morrey quotients, reverse Hoelder ratios, local H^2 / L^4 ratios and
// empirical Hoelder seminorms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pelab/error.hpp"
#include "pelab/grid.hpp"
#include "pelab/potential.hpp"
#include "pelab/solver.hpp"

namespace pelab {

// ---------------------------------------------------------------------------
// Reports

/// Outcome of one check. Failing reports carry a witness (location, time or
/// radius of the violation).
struct CheckReport {
    std::string name;
    bool passed = false;
    double tolerance = 0.0;
    nlohmann::json measured = nlohmann::json::object();
    std::map<std::string, std::vector<double>> series;
    nlohmann::json witness = nullptr;
    std::string config_hash;
    std::string note;
};

inline void to_json(nlohmann::json& j, const CheckReport& r) {
    j = nlohmann::json{{"name", r.name},         {"passed", r.passed},
                       {"tolerance", r.tolerance}, {"measured", r.measured},
                       {"series", r.series},     {"witness", r.witness},
                       {"config_hash", r.config_hash}, {"note", r.note}};
}

/// Series as CSV: a comment row naming the check, config hash and tolerance,
/// then a column row and one line per index. Shorter series leave cells empty.
inline std::string series_csv(const CheckReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "# check=" << r.name << ",config_hash=" << r.config_hash
        << ",tolerance=" << r.tolerance << "\n";
    out << "index";
    std::size_t rows = 0;
    for (const auto& [k, v] : r.series) {
        out << "," << k;
        rows = std::max(rows, v.size());
    }
    out << "\n";
    for (std::size_t i = 0; i < rows; ++i) {
        out << i;
        for (const auto& [k, v] : r.series) {
            out << ",";
            if (i < v.size()) out << v[i];
        }
        out << "\n";
    }
    return out.str();
}

inline std::string config_hash_of(const Trajectory& t) {
    return t.meta.contains("config_hash") ? t.meta["config_hash"].get<std::string>() : "";
}

/// Pass iff |fine - coarse| <= rel_tol * |coarse|.
inline CheckReport stability_report(const std::string& name, double coarse, double fine,
                                    double rel_tol) {
    CheckReport r;
    r.name = name;
    r.tolerance = rel_tol;
    const double change = std::abs(fine - coarse) / std::max(std::abs(coarse), 1e-300);
    r.measured = {{"coarse", coarse}, {"fine", fine}, {"relative_change", change}};
    r.passed = std::isfinite(change) && change <= rel_tol;
    if (!r.passed) r.witness = {{"coarse", coarse}, {"fine", fine}};
    return r;
}

/// Largest pointwise difference between matching snapshots of two runs, after
/// applying `transform` (row-major N x N, identity when empty) to the first.
inline double trajectory_sup_difference(const Trajectory& a, const Trajectory& b,
                                        const std::vector<double>& transform = {}) {
    if (a.snapshots.size() != b.snapshots.size())
        throw ShapeError("trajectories have different snapshot counts");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
        const auto& sa = a.snapshots[k];
        const auto& sb = b.snapshots[k];
        if (!(sa.grid == sb.grid) || sa.components != sb.components)
            throw ShapeError("trajectories do not share grid and components");
        const int N = sa.components;
        for (std::size_t p = 0; p < sa.points(); ++p)
            for (int i = 0; i < N; ++i) {
                double va = sa.at(i, p);
                if (!transform.empty()) {
                    va = 0.0;
                    for (int j = 0; j < N; ++j) va += transform[i * N + j] * sa.at(j, p);
                }
                worst = std::max(worst, std::abs(va - sb.at(i, p)));
            }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Discrete Poisson problem and H^-1 norm

/// Result of solving Laplacian_h w = f.
struct PoissonSolution {
    std::vector<double> w;
    double relative_residual = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

/// -Laplacian_h with zero Dirichlet data (boundary layer held at 0) or periodic.
inline void apply_neg_laplacian(const GridSpec& g, const std::vector<double>& x,
                                std::vector<double>& y) {
    const double inv_h2 = 1.0 / (g.h() * g.h());
    for (std::size_t p = 0; p < g.points(); ++p) {
        if (g.on_boundary(p)) {
            y[p] = 0.0;
            continue;
        }
        double acc = 0.0;
        for (int a = 0; a < g.dim(); ++a)
            acc += 2.0 * x[p] - x[g.shifted(p, a, 1)] - x[g.shifted(p, a, -1)];
        y[p] = acc * inv_h2;
    }
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> t(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) t[i] = a[i] * b[i];
    return pairwise_sum(t);
}

inline std::string sci(double x) {
    std::ostringstream o;
    o << std::scientific << std::setprecision(3) << x;
    return o.str();
}

inline void remove_mean(std::vector<double>& x) {
    const double m = pairwise_sum(x) / static_cast<double>(x.size());
    for (double& v : x) v -= m;
}

} // namespace detail

/// Conjugate gradients for Laplacian_h w = f. Dirichlet grids solve on the
/// interior with w = 0 on the boundary layer (f there is ignored); periodic
/// grids solve on the mean-zero subspace after projecting f onto it.
inline PoissonSolution solve_poisson(const GridSpec& g, std::span<const double> f,
                                     double rel_tol = 1e-12) {
    if (f.size() != g.points()) throw ShapeError("poisson: field does not match grid");
    require_finite(f, "poisson right-hand side");
    const std::size_t P = g.points();
    std::vector<double> b(P, 0.0);
    for (std::size_t p = 0; p < P; ++p)
        if (!g.on_boundary(p)) b[p] = -f[p];
    if (g.periodic()) detail::remove_mean(b);

    PoissonSolution sol;
    sol.w.assign(P, 0.0);
    const double bnorm = std::sqrt(detail::dot(b, b));
    if (bnorm == 0.0) return sol;
    std::vector<double> r = b, d = b, Ad(P);
    double rr = detail::dot(r, r);
    const std::size_t max_iter = 20 * P + 100;
    for (std::size_t it = 0; it < max_iter; ++it) {
        detail::apply_neg_laplacian(g, d, Ad);
        if (g.periodic()) detail::remove_mean(Ad);
        const double alpha = rr / detail::dot(d, Ad);
        for (std::size_t p = 0; p < P; ++p) {
            sol.w[p] += alpha * d[p];
            r[p] -= alpha * Ad[p];
        }
        const double rr_new = detail::dot(r, r);
        sol.iterations = it + 1;
        sol.relative_residual = std::sqrt(rr_new) / bnorm;
        if (sol.relative_residual <= rel_tol) break;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t p = 0; p < P; ++p) d[p] = r[p] + beta * d[p];
    }
    // Recompute the true residual; the recursive one drifts.
    detail::apply_neg_laplacian(g, sol.w, Ad);
    if (g.periodic()) detail::remove_mean(Ad);
    for (std::size_t p = 0; p < P; ++p) r[p] = b[p] - Ad[p];
    sol.relative_residual = std::sqrt(detail::dot(r, r)) / bnorm;
    if (sol.relative_residual > 10.0 * rel_tol)
        throw ConvergenceError("Poisson solve stalled at relative residual " +
                                   detail::sci(sol.relative_residual),
                               sol.relative_residual);
    return sol;
}

/// sum over grid edges of ((w_q - w_p)/h)^2 * h^n: the discrete Dirichlet energy.
inline double dirichlet_energy(const GridSpec& g, std::span<const double> w) {
    std::vector<double> terms;
    terms.reserve(g.points() * static_cast<std::size_t>(g.dim()));
    for (std::size_t p = 0; p < g.points(); ++p)
        for (int a = 0; a < g.dim(); ++a) {
            const std::size_t q = g.shifted(p, a, 1);
            if (q == GridSpec::npos) continue;
            const double d = (w[q] - w[p]) / g.h();
            terms.push_back(d * d);
        }
    return pairwise_sum(terms) * g.cell_volume();
}

/// Discrete H^-1 norm of a scalar field: sqrt of the Dirichlet energy of the
/// Poisson solution w with Laplacian_h w = f.
inline double h_minus_one_norm(const GridSpec& g, std::span<const double> f) {
    const auto sol = solve_poisson(g, f);
    return std::sqrt(dirichlet_energy(g, sol.w));
}

/// Vector version: root of the sum of squared component norms.
inline double h_minus_one_norm(const GridSpec& g, std::span<const double> values, int components) {
    if (values.size() != g.points() * static_cast<std::size_t>(components))
        throw ShapeError("h_minus_one_norm: field does not match grid");
    double s = 0.0;
    for (int c = 0; c < components; ++c) {
        const double n = h_minus_one_norm(g, values.subspan(c * g.points(), g.points()));
        s += n * n;
    }
    return std::sqrt(s);
}

/// Discrete L^2 norm over the points a Poisson solve sees (interior on Dirichlet grids).
inline double discrete_l2(const GridSpec& g, std::span<const double> f) {
    std::vector<double> t;
    t.reserve(f.size());
    for (std::size_t p = 0; p < g.points(); ++p)
        if (!g.on_boundary(p)) t.push_back(f[p] * f[p]);
    return std::sqrt(pairwise_sum(t) * g.cell_volume());
}

/// Constant C_P with ||f||_{H^-1} <= C_P ||f||_{L^2}: 1/sqrt of the smallest
/// eigenvalue of -Laplacian_h (on the mean-zero subspace when periodic),
/// measured by inverse iteration and cached per grid.
inline double poincare_constant(const GridSpec& g) {
    using Key = std::tuple<int, std::vector<std::size_t>, double, int>;
    static std::mutex mu;
    static std::map<Key, double> cache;
    const Key key{g.dim(), g.sizes(), g.h(), static_cast<int>(g.boundary())};
    {
        std::lock_guard lock(mu);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    const std::size_t P = g.points();
    std::vector<double> x(P, 0.0), Ax(P);
    for (std::size_t p = 0; p < P; ++p) {
        if (g.on_boundary(p)) continue;
        double v = 1.0;
        for (int a = 0; a < g.dim(); ++a)
            v *= g.periodic() ? std::cos(2.0 * std::numbers::pi * g.position(p, a) / g.length(a)) +
                                    0.1 * std::sin(4.0 * std::numbers::pi * g.position(p, a) / g.length(a))
                              : 1.0;
        x[p] = v;
    }
    if (g.periodic()) detail::remove_mean(x);
    double mu_est = 0.0;
    for (int it = 0; it < 500; ++it) {
        const double n = std::sqrt(detail::dot(x, x));
        for (double& v : x) v /= n;
        detail::apply_neg_laplacian(g, x, Ax);
        const double rq = detail::dot(x, Ax);
        if (it > 0 && std::abs(rq - mu_est) <= 1e-14 * rq) {
            mu_est = rq;
            break;
        }
        mu_est = rq;
        // x <- (-Laplacian)^-1 x, i.e. solve Laplacian w = -x.
        std::vector<double> rhs(x);
        for (double& v : rhs) v = -v;
        x = solve_poisson(g, rhs).w;
        if (g.periodic()) detail::remove_mean(x);
    }
    const double cp = 1.0 / std::sqrt(mu_est);
    std::lock_guard lock(mu);
    cache[key] = cp;
    return cp;
}

// ---------------------------------------------------------------------------
// Contraction and boundedness

/// H^-1 distance between two runs with matching boundary data, checked for
/// monotone non-increase. The weighted series e^{2 lambda t} d(t)^2 and the
/// fitted decay exponent are reported without entering pass/fail.
inline CheckReport contraction_report(const Trajectory& t0, const Trajectory& t1,
                                      const EllipticityWindow& window, double rel_tol = 1e-10) {
    t0.validate();
    t1.validate();
    if (t0.snapshots.size() != t1.snapshots.size())
        throw ShapeError("contraction: runs have different snapshot counts");
    if (!(t0.grid() == t1.grid()) || t0.components() != t1.components())
        throw ShapeError("contraction: runs do not share grid and components");
    if (std::abs(t0.dt - t1.dt) > 1e-15 * std::max(t0.dt, t1.dt))
        throw ShapeError("contraction: runs use different dt");
    if (!t0.grid().periodic() && t0.snapshots[0].boundary_values != t1.snapshots[0].boundary_values)
        throw ShapeError("contraction: runs have different boundary data");
    const auto& g = t0.grid();
    const int N = t0.components();

    CheckReport r;
    r.name = "contraction";
    r.tolerance = rel_tol;
    r.config_hash = config_hash_of(t0);
    std::vector<double> d, times, weighted;
    for (std::size_t k = 0; k < t0.snapshots.size(); ++k) {
        const auto& a = t0.snapshots[k];
        const auto& b = t1.snapshots[k];
        if (std::abs(a.t - b.t) > 1e-12 * std::max(1.0, std::abs(a.t)))
            throw ShapeError("contraction: snapshot times differ at index " + std::to_string(k));
        std::vector<double> diff(a.values.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = b.values[i] - a.values[i];
        const double n = h_minus_one_norm(g, diff, N);
        d.push_back(n);
        times.push_back(a.t);
        weighted.push_back(std::exp(2.0 * window.lambda * a.t) * n * n);
    }
    r.passed = true;
    for (std::size_t k = 1; k < d.size(); ++k)
        if (d[k] > d[k - 1] * (1.0 + rel_tol)) {
            r.passed = false;
            r.witness = {{"snapshot", k}, {"t", times[k]}, {"before", d[k - 1]}, {"after", d[k]}};
            break;
        }
    bool weighted_monotone = true;
    for (std::size_t k = 1; k < weighted.size(); ++k)
        if (weighted[k] > weighted[k - 1] * (1.0 + rel_tol)) weighted_monotone = false;

    // Least-squares slope of log d(t) and the slowest single-interval rate.
    double slope = std::nan(""), slowest = -std::numeric_limits<double>::infinity();
    if (d.size() >= 2 && std::all_of(d.begin(), d.end(), [](double x) { return x > 0.0; })) {
        double st = 0, sl = 0, stt = 0, stl = 0;
        const double m = static_cast<double>(d.size());
        for (std::size_t k = 0; k < d.size(); ++k) {
            const double l = std::log(d[k]);
            st += times[k];
            sl += l;
            stt += times[k] * times[k];
            stl += times[k] * l;
        }
        slope = (m * stl - st * sl) / (m * stt - st * st);
        for (std::size_t k = 1; k < d.size(); ++k)
            slowest = std::max(slowest, std::log(d[k] / d[k - 1]) / (times[k] - times[k - 1]));
    }
    r.measured = {{"initial", d.front()},
                  {"final", d.back()},
                  {"lambda", window.lambda},
                  {"weighted_monotone", weighted_monotone},
                  {"fitted_log_slope", std::isfinite(slope) ? nlohmann::json(slope) : nlohmann::json(nullptr)},
                  {"slowest_interval_rate",
                   std::isfinite(slowest) ? nlohmann::json(slowest) : nlohmann::json(nullptr)}};
    r.series["t"] = times;
    r.series["h_minus_one_distance"] = d;
    r.series["weighted_squared"] = weighted;
    return r;
}

/// sup_x |u(x,t)| against max(initial sup, boundary sup) at every snapshot.
inline CheckReport sup_norm_report(const Trajectory& traj, double abs_tol = 1e-10) {
    traj.validate();
    CheckReport r;
    r.name = "boundedness";
    r.tolerance = abs_tol;
    r.config_hash = config_hash_of(traj);
    const auto sup_of = [](const FieldState& s, std::size_t* where) {
        double m = 0.0;
        for (std::size_t p = 0; p < s.points(); ++p) {
            const double n = s.norm_at(p);
            if (n > m) {
                m = n;
                if (where) *where = p;
            }
        }
        return m;
    };
    const auto& first = traj.snapshots.front();
    double bound = sup_of(first, nullptr);
    if (!first.grid.periodic()) bound = std::max(bound, euclidean_norm(first.boundary_values));
    std::vector<double> sups, times;
    r.passed = true;
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
        std::size_t where = 0;
        const double s = sup_of(traj.snapshots[k], &where);
        sups.push_back(s);
        times.push_back(traj.snapshots[k].t);
        if (r.passed && s > bound + abs_tol) {
            r.passed = false;
            r.witness = {{"snapshot", k},
                         {"t", traj.snapshots[k].t},
                         {"point", where},
                         {"location", describe_point(traj.grid(), where)},
                         {"sup", s},
                         {"bound", bound}};
        }
    }
    bool monotone = true;
    for (std::size_t k = 1; k < sups.size(); ++k)
        if (sups[k] > sups[k - 1] + abs_tol) monotone = false;
    r.measured = {{"bound", bound}, {"final_sup", sups.back()}, {"non_increasing", monotone}};
    r.series["t"] = times;
    r.series["sup"] = sups;
    return r;
}

// ---------------------------------------------------------------------------
// Entropy residuals

/// Summary of a residual field sampled over interior points and time levels.
struct ResidualStats {
    double max_positive = 0.0;
    double p99_positive = 0.0;
    double max_abs = 0.0;
    std::size_t samples = 0;
    std::size_t worst_snapshot = 0;
    std::size_t worst_point = 0;
};

namespace detail {

inline void require_consecutive(const Trajectory& traj) {
    traj.validate();
    if (traj.snapshots.size() < 2) throw DomainError("entropy residual needs at least two snapshots");
    if (std::abs(traj.spacing() - traj.dt) > 1e-9 * traj.dt)
        throw DomainError("entropy residual needs a snapshot after every step (snapshot_every = 1)");
}

inline ResidualStats summarize(const std::vector<std::vector<double>>& levels, const GridSpec& g) {
    ResidualStats st;
    std::vector<double> pos;
    for (std::size_t k = 0; k < levels.size(); ++k)
        for (std::size_t p = 0; p < g.points(); ++p) {
            if (g.on_boundary(p)) continue;
            const double v = levels[k][p];
            ++st.samples;
            st.max_abs = std::max(st.max_abs, std::abs(v));
            const double pp = std::max(v, 0.0);
            pos.push_back(pp);
            if (pp > st.max_positive) {
                st.max_positive = pp;
                st.worst_snapshot = k;
                st.worst_point = p;
            }
        }
    if (!pos.empty()) {
        const std::size_t idx = std::min(pos.size() - 1, static_cast<std::size_t>(0.99 * static_cast<double>(pos.size())));
        std::nth_element(pos.begin(), pos.begin() + static_cast<long>(idx), pos.end());
        st.p99_positive = pos[idx];
    }
    return st;
}

} // namespace detail

/// Residual of phi_t - Laplacian(gamma(phi)) + lambda^2 |grad u|^2 with phi = phi(|u|),
/// one field per pair of consecutive snapshots (forward difference in time,
/// spatial terms at the earlier level).
inline std::vector<std::vector<double>> entropy_residual_fields(const Trajectory& traj,
                                                                const RadialPotential& p,
                                                                const EntropyData& e,
                                                                const EllipticityWindow& window) {
    detail::require_consecutive(traj);
    const auto& g = traj.grid();
    const std::size_t P = g.points();
    const double dts = traj.spacing();
    const double lam2 = window.lambda * window.lambda;
    auto entropy_of = [&](const FieldState& s) {
        std::vector<double> f(P);
        for (std::size_t q = 0; q < P; ++q) {
            const double r = s.norm_at(q);
            check_range(p, r);
            f[q] = p.phi(r);
        }
        return f;
    };
    std::vector<std::vector<double>> out;
    std::vector<double> cur = entropy_of(traj.snapshots[0]);
    for (std::size_t k = 0; k + 1 < traj.snapshots.size(); ++k) {
        const auto next = entropy_of(traj.snapshots[k + 1]);
        std::vector<double> gam(P);
        for (std::size_t q = 0; q < P; ++q) gam[q] = e.gamma(cur[q]);
        const auto lap = laplacian(gam, g);
        const auto grad2 = gradient_sq(traj.snapshots[k]);
        std::vector<double> res(P, 0.0);
        for (std::size_t q = 0; q < P; ++q)
            if (!g.on_boundary(q)) res[q] = (next[q] - cur[q]) / dts - lap[q] + lam2 * grad2[q];
        out.push_back(std::move(res));
        cur = next;
    }
    return out;
}

/// Threshold constant K of tau(h) = K (h^2 + dt), fitted on a quadratic-potential
/// trajectory, where the continuum residual vanishes identically and the whole
/// discrete residual is scheme error.
inline double calibrate_tau_constant(const Trajectory& quadratic_run) {
    const auto p = potentials::quadratic(std::numeric_limits<double>::max());
    RadialPotential bounded = p;
    double rmax = 0.0;
    for (const auto& s : quadratic_run.snapshots)
        for (std::size_t q = 0; q < s.points(); ++q) rmax = std::max(rmax, s.norm_at(q));
    bounded.r_max = std::max(rmax * 1.01, 1e-6);
    const auto e = build_entropy(bounded);
    const auto w = certify_window(bounded);
    const auto st = detail::summarize(entropy_residual_fields(quadratic_run, bounded, e, w),
                                      quadratic_run.grid());
    const double h = quadratic_run.grid().h();
    return st.max_abs / (h * h + quadratic_run.dt);
}

namespace detail {

inline CheckReport residual_report(std::string name, const ResidualStats& st, const Trajectory& traj,
                                   double K) {
    CheckReport r;
    r.name = std::move(name);
    const double h = traj.grid().h();
    const double tau = K * (h * h + traj.dt);
    r.tolerance = tau;
    r.config_hash = config_hash_of(traj);
    r.passed = st.max_positive <= tau;
    r.measured = {{"max_positive", st.max_positive}, {"p99_positive", st.p99_positive},
                  {"max_abs", st.max_abs},           {"samples", st.samples},
                  {"K", K},                          {"tau", tau},
                  {"h", h},                          {"dt", traj.dt}};
    if (!r.passed)
        r.witness = {{"snapshot", st.worst_snapshot},
                     {"t", traj.snapshots[st.worst_snapshot].t},
                     {"point", st.worst_point},
                     {"location", describe_point(traj.grid(), st.worst_point)},
                     {"residual", st.max_positive}};
    return r;
}

} // namespace detail

/// Positive part of the diffusion entropy residual against tau(h) = K (h^2 + dt).
inline CheckReport entropy_residual_diffusion(const Trajectory& traj, const RadialPotential& p,
                                              const EntropyData& e, const EllipticityWindow& window,
                                              double K) {
    const auto st = detail::summarize(entropy_residual_fields(traj, p, e, window), traj.grid());
    return detail::residual_report("entropy_diffusion", st, traj, K);
}

/// Parameters of the entropy v = e^{sH}.
struct EntropyParams {
    double s = 1.0;
    double c = 0.0;
    double lambda = 0.0;     // min of the coefficient ellipticity constants
    double kappa = 0.0;      // coefficient of |grad u|^2 from H_zz a u_x u_x
    double epsilon = 0.0;
    double C_epsilon = 0.0;  // Cauchy-Schwarz constant of the cross term
};

inline void to_json(nlohmann::json& j, const EntropyParams& e) {
    j = nlohmann::json{{"s", e.s},         {"c", e.c},         {"lambda", e.lambda},
                       {"kappa", e.kappa}, {"epsilon", e.epsilon}, {"C_epsilon", e.C_epsilon}};
}

/// Picks s and c so that e^{sH} is a subsolution: epsilon first, then s large.
/// lambda = min(lambda_a, lambda_A, lambda_flux); the |grad u|^2 dissipation is
/// kappa = lambda * lambda_H; C(eps) = (sup|H_zz| sup|c|)^2 n N / (4 eps) with
/// eps = kappa/2; s = max(1, 2 C / lambda); c = (kappa/2) s exp(s inf H).
/// When H vanishes identically there is nothing to absorb: s = 1, c = lambda/2.
inline EntropyParams choose_entropy_params(const CoupledCoefficients& cc, int n, int N) {
    EntropyParams e;
    e.lambda = std::min({cc.lambda_a, cc.lambda_A, cc.lambda_flux});
    if (!(e.lambda > 0.0))
        throw ConfigError("coupled coefficients are not strictly elliptic (lambda = " +
                          std::to_string(e.lambda) + ")");
    if (cc.H_trivial) {
        e.kappa = e.lambda;
        e.epsilon = e.lambda / 2.0;
        e.C_epsilon = 0.0;
        e.s = 1.0;
        e.c = e.lambda / 2.0;
        return e;
    }
    if (!(cc.lambda_H > 0.0))
        throw ConfigError("H is not strictly convex on the certified range (lambda_H = " +
                          std::to_string(cc.lambda_H) + "); raise r_min");
    e.kappa = e.lambda * cc.lambda_H;
    e.epsilon = e.kappa / 2.0;
    const double cs = cc.sup_H_hess * cc.sup_c;
    e.C_epsilon = cs * cs * static_cast<double>(n * N) / (4.0 * e.epsilon);
    e.s = std::max(1.0, 2.0 * e.C_epsilon / e.lambda);
    e.c = 0.5 * e.kappa * e.s * std::exp(e.s * cc.inf_H);
    return e;
}

/// Residual of v_t - (A v_x)_x + c |grad u|^2 with v = e^{sH(u)} and
/// A = a + H_z . c, discretised with face-averaged A.
inline std::vector<std::vector<double>> coupled_residual_fields(const Trajectory& traj,
                                                                const CoupledCoefficients& cc,
                                                                const EntropyParams& ep) {
    detail::require_consecutive(traj);
    if (cc.H_trivial)
        throw ConfigError("H vanishes identically; use the diffusion entropy check instead");
    const auto& g = traj.grid();
    const std::size_t P = g.points();
    const int N = traj.components();
    const double dts = traj.spacing();
    const double inv_h2 = 1.0 / (g.h() * g.h());
    std::vector<double> z(N), cz(N), hz(N);
    auto eval = [&](const FieldState& s, std::vector<double>& v, std::vector<double>& A) {
        v.resize(P);
        A.resize(P);
        for (std::size_t q = 0; q < P; ++q) {
            s.vector_at(q, z);
            const double r = euclidean_norm(z);
            if (r < cc.r_min * (1.0 - 1e-12) || r > cc.r_max * (1.0 + 1e-12))
                throw RangeError("|u| = " + std::to_string(r) + " outside the certified range [" +
                                     std::to_string(cc.r_min) + ", " + std::to_string(cc.r_max) +
                                     "] at " + describe_point(g, q) + ", t = " + std::to_string(s.t),
                                 q, r);
            v[q] = std::exp(ep.s * cc.H(z));
            cc.c(z, cz);
            cc.H_grad(z, hz);
            double hc = 0.0;
            for (int i = 0; i < N; ++i) hc += hz[i] * cz[i];
            A[q] = cc.a(z) + hc;
        }
    };
    std::vector<std::vector<double>> out;
    std::vector<double> v0, A0, v1, A1;
    eval(traj.snapshots[0], v0, A0);
    for (std::size_t k = 0; k + 1 < traj.snapshots.size(); ++k) {
        eval(traj.snapshots[k + 1], v1, A1);
        const auto grad2 = gradient_sq(traj.snapshots[k]);
        std::vector<double> res(P, 0.0);
        for (std::size_t q = 0; q < P; ++q) {
            if (g.on_boundary(q)) continue;
            double div = 0.0;
            for (int a = 0; a < g.dim(); ++a) {
                const std::size_t up = g.shifted(q, a, 1);
                const std::size_t dn = g.shifted(q, a, -1);
                div += 0.5 * (A0[q] + A0[up]) * (v0[up] - v0[q]) -
                       0.5 * (A0[dn] + A0[q]) * (v0[q] - v0[dn]);
            }
            res[q] = (v1[q] - v0[q]) / dts - div * inv_h2 + ep.c * grad2[q];
        }
        out.push_back(std::move(res));
        v0.swap(v1);
        A0.swap(A1);
    }
    return out;
}

inline CheckReport entropy_residual_coupled(const Trajectory& traj, const CoupledCoefficients& cc,
                                            const EntropyParams& ep, double K) {
    const auto st = detail::summarize(coupled_residual_fields(traj, cc, ep), traj.grid());
    auto r = detail::residual_report("entropy_coupled", st, traj, K);
    r.measured["s"] = ep.s;
    r.measured["c"] = ep.c;
    return r;
}

/// Pass iff the fine-grid positive residual is at most coarse / factor.
inline CheckReport refinement_report(const std::string& name, double coarse, double fine,
                                     double factor = 2.0) {
    CheckReport r;
    r.name = name;
    r.tolerance = factor;
    r.passed = fine * factor <= coarse;
    r.measured = {{"coarse", coarse}, {"fine", fine},
                  {"ratio", fine > 0.0 ? nlohmann::json(coarse / fine) : nlohmann::json(nullptr)}};
    if (!r.passed) r.witness = {{"coarse", coarse}, {"fine", fine}};
    return r;
}

// ---------------------------------------------------------------------------
// Morrey quotients

struct MorreyProfile {
    std::vector<double> radii;   // descending
    std::vector<double> values;  // (1/R^exponent) * space-time integral of g over Q_R
};

/// (1/R^exponent) * integral of g over Q(x0, t0, R) for each radius, largest
/// first. The exponent defaults to the dimension n; use n - 2 with g = |grad u|^4
/// for the higher-integrability variant.
inline MorreyProfile morrey_profile(const Trajectory& traj, std::size_t x0, double t0,
                                    std::vector<double> radii, const SnapshotFunctional& g,
                                    std::optional<double> exponent = std::nullopt) {
    const auto& grid = traj.grid();
    const double ex = exponent.value_or(static_cast<double>(grid.dim()));
    std::sort(radii.begin(), radii.end(), std::greater<>());
    MorreyProfile prof;
    for (double R : radii) {
        if (R < 4.0 * grid.h() * (1.0 - 1e-12))
            throw DomainError("Morrey radius " + std::to_string(R) + " is below 4h");
        prof.radii.push_back(R);
        prof.values.push_back(cylinder_integral(traj, {x0, t0, R}, g) / std::pow(R, ex));
    }
    return prof;
}

/// Pass iff the smallest-radius quotient is at most half the largest-radius one.
inline CheckReport morrey_decay_report(const MorreyProfile& prof, std::size_t x0, double t0) {
    CheckReport r;
    r.name = "morrey_decay";
    r.tolerance = 0.5;
    r.series["R"] = prof.radii;
    r.series["quotient"] = prof.values;
    const double big = prof.values.front();
    const double small = prof.values.back();
    r.passed = small <= 0.5 * big;
    r.measured = {{"largest_R", prof.radii.front()}, {"smallest_R", prof.radii.back()},
                  {"quotient_largest", big},        {"quotient_smallest", small}};
    if (!r.passed) r.witness = {{"point", x0}, {"t0", t0}, {"R", prof.radii.back()}};
    return r;
}

// ---------------------------------------------------------------------------
// Reverse Hoelder and local estimate ratios

namespace detail {

/// Caches each snapshot's field so overlapping cylinders evaluate it once.
inline IndexedFunctional memoize(IndexedFunctional g) {
    auto cache = std::make_shared<std::map<std::size_t, std::vector<double>>>();
    return [cache, g = std::move(g)](std::size_t k) {
        auto it = cache->find(k);
        if (it == cache->end()) it = cache->emplace(k, g(k)).first;
        return it->second;
    };
}

} // namespace detail

/// (avg_{Q_R} |grad u|^p)^{1/p} / (avg_{Q_4R} |grad u|^2)^{1/2} per cylinder.
/// Cylinders whose enlarged average vanishes are skipped and counted.
inline CheckReport reverse_holder_report(const Trajectory& traj, const std::vector<Cylinder>& cyls,
                                         double p = 2.5) {
    if (!(p > 2.0)) throw ConfigError("reverse Hoelder exponent must exceed 2");
    CheckReport r;
    r.name = "reverse_holder";
    r.config_hash = config_hash_of(traj);
    const IndexedFunctional g2 =
        detail::memoize([&](std::size_t k) { return gradient_sq(traj.snapshots[k]); });
    const IndexedFunctional gp = detail::memoize([&](std::size_t k) {
        auto f = g2(k);
        for (double& x : f) x = std::pow(x, 0.5 * p);
        return f;
    });
    std::vector<double> ratios;
    std::size_t skipped = 0;
    double worst = 0.0;
    std::size_t worst_idx = 0;
    for (std::size_t i = 0; i < cyls.size(); ++i) {
        const auto& q = cyls[i];
        const double rhs = std::sqrt(cylinder_average(traj, {q.center, q.t0, 4.0 * q.R}, g2));
        if (!(rhs > 0.0)) {
            ++skipped;
            ratios.push_back(std::nan(""));
            continue;
        }
        const double lhs = std::pow(cylinder_average(traj, q, gp), 1.0 / p);
        const double ratio = lhs / rhs;
        ratios.push_back(ratio);
        if (ratio > worst) {
            worst = ratio;
            worst_idx = i;
        }
    }
    const std::size_t used = cyls.size() - skipped;
    r.passed = used > 0 && std::isfinite(worst);
    r.measured = {{"max_ratio", worst}, {"p", p}, {"evaluated", used}, {"skipped", skipped}};
    if (used > 0)
        r.measured["worst_cylinder"] = {{"center", cyls[worst_idx].center},
                                        {"t0", cyls[worst_idx].t0},
                                        {"R", cyls[worst_idx].R}};
    r.series["ratio"] = ratios;
    if (used == 0) r.note = "every cylinder had a vanishing gradient average";
    return r;
}

/// Pair of nested cylinders Q(x, t, r) inside Q(x, t, R).
struct NestedCylinders {
    std::size_t center = 0;
    double t0 = 0.0;
    double r = 0.0;
    double R = 0.0;
};

/// Sum over components and axis pairs of squared second differences of v.
inline std::vector<double> hessian_sq(std::span<const double> values, int components,
                                      const GridSpec& g) {
    const std::size_t P = g.points();
    std::vector<double> out(P, 0.0);
    const double h2 = g.h() * g.h();
    for (int c = 0; c < components; ++c) {
        const double* f = values.data() + c * P;
        for (std::size_t q = 0; q < P; ++q) {
            if (g.on_boundary(q)) continue;
            double acc = 0.0;
            for (int a = 0; a < g.dim(); ++a) {
                const double d2 = (f[g.shifted(q, a, 1)] - 2.0 * f[q] + f[g.shifted(q, a, -1)]) / h2;
                acc += d2 * d2;
                for (int b = a + 1; b < g.dim(); ++b) {
                    const std::size_t up = g.shifted(q, a, 1), dn = g.shifted(q, a, -1);
                    const double m = (f[g.shifted(up, b, 1)] - f[g.shifted(up, b, -1)] -
                                      f[g.shifted(dn, b, 1)] + f[g.shifted(dn, b, -1)]) /
                                     (4.0 * h2);
                    acc += 2.0 * m * m;
                }
            }
            out[q] += acc;
        }
    }
    return out;
}

/// The three normalised local estimate ratios for every nested pair:
///   time derivative:  int_{Q_r} |u_t|^2 (R-r)^2 / int_{Q_R} |grad u|^2
///   Hessian of v:     int_{Q_r} |D^2 grad Phi(u)|^2 (R-r)^2 / int_{Q_R} |grad u|^2
///   L^4 of gradient:  int_{Q_r} |grad u|^4 (R-r)^2 / (||u||_inf^2 int_{Q_R} |grad u|^2)
/// u_t is the forward difference to the next snapshot.
inline CheckReport estimate_ratio_report(const Trajectory& traj, const RadialPotential& pot,
                                         const std::vector<NestedCylinders>& pairs) {
    traj.validate();
    CheckReport r;
    r.name = "estimate_ratios";
    r.config_hash = config_hash_of(traj);
    const auto& g = traj.grid();
    const int N = traj.components();
    const std::size_t P = g.points();
    const double dts = traj.spacing();

    double sup_u = 0.0;
    for (const auto& s : traj.snapshots)
        for (std::size_t q = 0; q < P; ++q) sup_u = std::max(sup_u, s.norm_at(q));

    const IndexedFunctional ut2 = detail::memoize([&](std::size_t k) {
        if (k + 1 >= traj.snapshots.size())
            throw DomainError("time-derivative cylinder reaches the last snapshot");
        const auto& a = traj.snapshots[k];
        const auto& b = traj.snapshots[k + 1];
        std::vector<double> f(P, 0.0);
        for (int c = 0; c < N; ++c)
            for (std::size_t q = 0; q < P; ++q) {
                const double d = (b.at(c, q) - a.at(c, q)) / dts;
                f[q] += d * d;
            }
        return f;
    });
    const IndexedFunctional hess = detail::memoize([&](std::size_t k) {
        const auto& s = traj.snapshots[k];
        std::vector<double> v(s.values.size()), z(N), gz(N);
        for (std::size_t q = 0; q < P; ++q) {
            s.vector_at(q, z);
            grad_Phi(pot, z, gz);
            for (int c = 0; c < N; ++c) v[c * P + q] = gz[c];
        }
        return hessian_sq(v, N, g);
    });
    const IndexedFunctional g2 =
        detail::memoize([&](std::size_t k) { return gradient_sq(traj.snapshots[k]); });
    const IndexedFunctional g4 = detail::memoize([&](std::size_t k) {
        auto f = g2(k);
        for (double& x : f) x *= x;
        return f;
    });

    std::vector<double> rt, rh, r4;
    std::size_t skipped = 0;
    for (const auto& pr : pairs) {
        if (!(pr.r < pr.R)) throw DomainError("nested cylinders need r < R");
        const Cylinder inner{pr.center, pr.t0, pr.r}, outer{pr.center, pr.t0, pr.R};
        const double rhs = cylinder_integral(traj, outer, g2);
        if (!(rhs > 0.0)) {
            ++skipped;
            continue;
        }
        const double w = (pr.R - pr.r) * (pr.R - pr.r);
        rt.push_back(cylinder_integral(traj, inner, ut2) * w / rhs);
        rh.push_back(cylinder_integral(traj, inner, hess) * w / rhs);
        r4.push_back(cylinder_integral(traj, inner, g4) * w / (sup_u * sup_u * rhs));
    }
    auto mx = [](const std::vector<double>& v) {
        return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    };
    r.series["time_derivative"] = rt;
    r.series["hessian"] = rh;
    r.series["l4"] = r4;
    r.measured = {{"max_time_derivative", mx(rt)}, {"max_hessian", mx(rh)}, {"max_l4", mx(r4)},
                  {"sup_u", sup_u},                {"evaluated", rt.size()}, {"skipped", skipped}};
    r.passed = std::isfinite(mx(rt)) && std::isfinite(mx(rh)) && std::isfinite(mx(r4));
    if (rt.empty() && !pairs.empty()) r.note = "every cylinder had a vanishing gradient integral";
    return r;
}

// ---------------------------------------------------------------------------
// Hoelder seminorm

/// Distance band [lo, hi] for pair sampling.
struct DistanceBand {
    double lo = 0.0;
    double hi = 0.0;
};

/// max |u(x) - u(y)| / |x - y|^alpha over pairs with |x - y| in the band.
/// Grids with at most 64 points per axis are searched exhaustively; larger
/// grids use `samples` seeded random pairs.
inline double holder_seminorm(const FieldState& s, double alpha, DistanceBand band,
                              std::size_t samples = 10000, std::uint64_t seed = 1) {
    const auto& g = s.grid;
    const double h = g.h();
    double min_len = g.length(0);
    for (int a = 1; a < g.dim(); ++a) min_len = std::min(min_len, g.length(a));
    if (band.lo < 2.0 * h * (1.0 - 1e-12) || band.hi > min_len / 4.0 * (1.0 + 1e-12) || band.lo > band.hi)
        throw ConfigError("Hoelder band must lie within [2h, L/4]");
    const long m = static_cast<long>(std::floor(band.hi / h + 1e-9));
    const int N = s.components;

    auto quotient = [&](std::size_t p, const std::array<long, 3>& off) -> double {
        double d2 = 0.0;
        std::size_t q = p;
        for (int a = 0; a < g.dim(); ++a) {
            d2 += static_cast<double>(off[a] * off[a]) * h * h;
            q = g.shifted(q, a, off[a]);
            if (q == GridSpec::npos) return -1.0;
        }
        const double d = std::sqrt(d2);
        if (d < band.lo * (1.0 - 1e-12) || d > band.hi * (1.0 + 1e-12)) return -1.0;
        double diff2 = 0.0;
        for (int c = 0; c < N; ++c) {
            const double x = s.at(c, p) - s.at(c, q);
            diff2 += x * x;
        }
        return std::sqrt(diff2) / std::pow(d, alpha);
    };

    double best = 0.0;
    bool small = true;
    for (int a = 0; a < g.dim(); ++a) small = small && g.size(a) <= 64;
    if (small) {
        const long my = g.dim() > 1 ? m : 0, mz = g.dim() > 2 ? m : 0;
        for (std::size_t p = 0; p < g.points(); ++p)
            for (long i = -m; i <= m; ++i)
                for (long j = -my; j <= my; ++j)
                    for (long k = -mz; k <= mz; ++k) best = std::max(best, quotient(p, {i, j, k}));
        return best;
    }
    SeededRandom rng(seed);
    std::size_t accepted = 0;
    for (std::size_t attempt = 0; accepted < samples && attempt < 100 * samples; ++attempt) {
        const auto p = static_cast<std::size_t>(rng.integer(0, static_cast<long>(g.points()) - 1));
        std::array<long, 3> off{0, 0, 0};
        for (int a = 0; a < g.dim(); ++a) off[a] = rng.integer(-m, m);
        const double qv = quotient(p, off);
        if (qv < 0.0) continue;
        ++accepted;
        best = std::max(best, qv);
    }
    return best;
}

} // namespace pelab

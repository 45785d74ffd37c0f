#pragma once

// Radial convex potentials Phi(z) = phi(|z|): derivatives, convexity
// certificates, the scalar entropy nonlinearity gamma with
// gamma(phi(r)) = phi'(r)^2 / 2, and the rewriting of the diffusion system as a
// strongly coupled system a*u_x + c*H_x.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pelab/error.hpp"

namespace pelab {

/// |z| below this is treated as the origin in radial formulas.
inline constexpr double kRadialEpsilon = 1e-12;
/// phi'(r)/r switches to a Taylor extension below this radius.
inline constexpr double kTaylorRadius = 1e-6;

using RealFunction = std::function<double(double)>;

// ---------------------------------------------------------------------------
// Quadrature

namespace detail {

inline double simpson_step(const RealFunction& f, double a, double fa, double b, double fb,
                           double whole, double fm, double tol, int depth, int& evals) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    evals += 2;
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0)
        throw ConvergenceError("adaptive Simpson quadrature did not converge on [" +
                                   std::to_string(a) + ", " + std::to_string(b) + "]",
                               std::abs(delta));
    return simpson_step(f, a, fa, m, fm, left, flm, 0.5 * tol, depth - 1, evals) +
           simpson_step(f, m, fm, b, fb, right, frm, 0.5 * tol, depth - 1, evals);
}

} // namespace detail

/// Adaptive composite Simpson rule with Richardson correction.
inline double adaptive_simpson(const RealFunction& f, double a, double b, double tol,
                               int max_depth = 40) {
    if (a == b) return 0.0;
    int evals = 3;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, fa, b, fb, whole, fm, tol, max_depth, evals);
}

/// Cubic Hermite interpolation table on strictly increasing nodes with exact slopes.
class HermiteTable {
public:
    HermiteTable() = default;
    HermiteTable(std::vector<double> x, std::vector<double> y, std::vector<double> dy)
        : x_(std::move(x)), y_(std::move(y)), dy_(std::move(dy)) {}

    double lo() const { return x_.front(); }
    double hi() const { return x_.back(); }
    std::span<const double> nodes() const { return x_; }
    std::span<const double> values() const { return y_; }

    double operator()(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        if (k + 1 >= x_.size()) k = x_.size() - 2;
        const double w = x_[k + 1] - x_[k];
        const double t = (x - x_[k]) / w;
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * w * dy_[k] +
               (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * w * dy_[k + 1];
    }

private:
    std::vector<double> x_, y_, dy_;
};

// ---------------------------------------------------------------------------
// Radial potentials

/// phi with hand-coded first and second derivatives, certified on [0, r_max].
struct RadialPotential {
    std::string id;
    RealFunction phi;
    RealFunction phi1;
    RealFunction phi2;
    double r_max = 1.0;

    /// phi'(r)/r, extended continuously to r = 0 by phi''. Below kTaylorRadius the
    /// midpoint value phi''(r/2) is used; it matches phi'(r)/r to O(r^2).
    double phi1_over_r(double r) const {
        if (r < kTaylorRadius) return phi2(0.5 * r);
        return phi1(r) / r;
    }
};

/// Normalisation phi(0) = 0, phi'(0) = 0.
inline void check_normalised(const RadialPotential& p) {
    if (!(p.r_max > 0.0) || !std::isfinite(p.r_max))
        throw ConfigError("potential '" + p.id + "' needs a positive finite r_max");
    if (std::abs(p.phi(0.0)) > 1e-14 || std::abs(p.phi1(0.0)) > 1e-14)
        throw ConfigError("potential '" + p.id + "' must satisfy phi(0) = 0 and phi'(0) = 0");
}

namespace potentials {

inline RadialPotential quadratic(double r_max = 1.0) {
    return {"quadratic", [](double r) { return 0.5 * r * r; }, [](double r) { return r; },
            [](double) { return 1.0; }, r_max};
}

inline RadialPotential cosh_minus_one(double r_max = 1.0) {
    return {"cosh", [](double r) { return std::cosh(r) - 1.0; },
            [](double r) { return std::sinh(r); }, [](double r) { return std::cosh(r); }, r_max};
}

/// r^2/2 + r^4/4.
inline RadialPotential quartic_plus(double r_max = 1.0) {
    return {"quartic_plus", [](double r) { return 0.5 * r * r + 0.25 * r * r * r * r; },
            [](double r) { return r + r * r * r; }, [](double r) { return 1.0 + 3.0 * r * r; },
            r_max};
}

/// r^2/2 + eps * r^m: a porous-medium nonlinearity regularised at the origin.
inline RadialPotential porous_smoothed(double eps = 0.1, double m = 3.0, double r_max = 1.0) {
    if (!(m > 2.0)) throw ConfigError("porous_smoothed needs m > 2");
    if (!(eps >= 0.0)) throw ConfigError("porous_smoothed needs eps >= 0");
    return {"porous",
            [=](double r) { return 0.5 * r * r + eps * std::pow(r, m); },
            [=](double r) { return r + eps * m * std::pow(r, m - 1.0); },
            [=](double r) { return 1.0 + eps * m * (m - 1.0) * std::pow(r, m - 2.0); }, r_max};
}

/// r^4/4: convex but degenerate at the origin. Certification rejects it.
inline RadialPotential pure_quartic(double r_max = 1.0) {
    return {"quartic", [](double r) { return 0.25 * r * r * r * r; },
            [](double r) { return r * r * r; }, [](double r) { return 3.0 * r * r; }, r_max};
}

/// Piecewise polynomial phi. On [breaks[k], breaks[k+1]) phi(r) is
/// sum_j coeffs[k][j] * (r - breaks[k])^j; the last piece extends to r_max.
inline RadialPotential piecewise_polynomial(std::string id, std::vector<double> breaks,
                                            std::vector<std::vector<double>> coeffs,
                                            double r_max) {
    if (breaks.empty() || breaks.front() != 0.0)
        throw ConfigError("piecewise potential '" + id + "': first break must be 0");
    if (coeffs.size() != breaks.size())
        throw ConfigError("piecewise potential '" + id + "': one coefficient row per break");
    for (std::size_t k = 1; k < breaks.size(); ++k)
        if (!(breaks[k] > breaks[k - 1]))
            throw ConfigError("piecewise potential '" + id + "': breaks must increase");
    auto table = std::make_shared<const std::pair<std::vector<double>, std::vector<std::vector<double>>>>(
        std::move(breaks), std::move(coeffs));
    auto eval = [table](double r, int deriv) {
        const auto& [b, c] = *table;
        auto it = std::upper_bound(b.begin(), b.end(), r);
        const std::size_t k = it == b.begin() ? 0 : static_cast<std::size_t>(it - b.begin()) - 1;
        const double x = r - b[k];
        double acc = 0.0;
        for (std::size_t j = c[k].size(); j-- > static_cast<std::size_t>(deriv);) {
            double factor = 1.0;
            for (int d = 0; d < deriv; ++d) factor *= static_cast<double>(j - static_cast<std::size_t>(d));
            acc = acc * x + factor * c[k][j];
        }
        return acc;
    };
    return {std::move(id), [eval](double r) { return eval(r, 0); },
            [eval](double r) { return eval(r, 1); }, [eval](double r) { return eval(r, 2); },
            r_max};
}

} // namespace potentials

/// Built-in potential by id: quadratic, cosh, quartic_plus, porous, quartic.
inline RadialPotential make_potential(const std::string& id, double r_max = 1.0) {
    if (id == "quadratic") return potentials::quadratic(r_max);
    if (id == "cosh") return potentials::cosh_minus_one(r_max);
    if (id == "quartic_plus") return potentials::quartic_plus(r_max);
    if (id == "porous") return potentials::porous_smoothed(0.1, 3.0, r_max);
    if (id == "quartic") return potentials::pure_quartic(r_max);
    throw ConfigError("unknown potential id '" + id + "'");
}

inline std::vector<std::string> builtin_potential_ids() {
    return {"quadratic", "cosh", "quartic_plus", "porous"};
}

/// Potential from a JSON description: either an id string or
/// {"id": ..., "r_max": ..., "breaks": [...], "coeffs": [[...], ...]}.
inline RadialPotential potential_from_json(const nlohmann::json& j, double r_max) {
    if (j.is_string()) return make_potential(j.get<std::string>(), r_max);
    const double rm = j.value("r_max", r_max);
    const auto id = j.value("id", std::string("custom"));
    if (j.contains("breaks"))
        return potentials::piecewise_polynomial(
            id, j.at("breaks").get<std::vector<double>>(),
            j.at("coeffs").get<std::vector<std::vector<double>>>(), rm);
    if (id == "porous")
        return potentials::porous_smoothed(j.value("eps", 0.1), j.value("m", 3.0), rm);
    return make_potential(id, rm);
}

// ---------------------------------------------------------------------------
// Gradient and Hessian of Phi

inline double euclidean_norm(std::span<const double> z) {
    double s = 0.0;
    for (double x : z) s += x * x;
    return std::sqrt(s);
}

inline void check_range(const RadialPotential& p, double r) {
    if (!(r <= p.r_max * (1.0 + 1e-12)))
        throw RangeError("|z| = " + std::to_string(r) + " exceeds r_max = " +
                             std::to_string(p.r_max) + " of potential '" + p.id + "'",
                         0, r);
}

/// grad Phi(z) = phi'(|z|) z / |z|, zero at the origin.
inline void grad_Phi(const RadialPotential& p, std::span<const double> z, std::span<double> out) {
    const double r = euclidean_norm(z);
    check_range(p, r);
    if (r < kRadialEpsilon) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const double scale = p.phi1(r) / r;
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * z[i];
}

inline std::vector<double> grad_Phi(const RadialPotential& p, std::span<const double> z) {
    std::vector<double> out(z.size());
    grad_Phi(p, z, out);
    return out;
}

/// Hessian of Phi, row-major N x N: (phi'/r) I + (phi'' - phi'/r) zhat zhat^T.
inline std::vector<double> hessian_Phi(const RadialPotential& p, std::span<const double> z) {
    const std::size_t n = z.size();
    const double r = euclidean_norm(z);
    check_range(p, r);
    std::vector<double> H(n * n, 0.0);
    if (r < kRadialEpsilon) {
        const double d = p.phi2(0.0);
        for (std::size_t i = 0; i < n; ++i) H[i * n + i] = d;
        return H;
    }
    const double tang = p.phi1_over_r(r);
    const double radial = p.phi2(r);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            H[i * n + j] = (i == j ? tang : 0.0) + (radial - tang) * (z[i] / r) * (z[j] / r);
    return H;
}

// ---------------------------------------------------------------------------
// Convexity window

/// Two-sided Hessian bounds lambda <= Phi_zz <= Lambda over |z| <= r_max.
struct EllipticityWindow {
    double lambda = 1.0;
    double Lambda = 1.0;
    double r_max = 1.0;
    std::size_t samples = 0;
    double spacing = 0.0;
    /// Relative widening applied to the sampled extrema.
    double margin = 0.0;
};

inline void to_json(nlohmann::json& j, const EllipticityWindow& w) {
    j = nlohmann::json{{"lambda", w.lambda},   {"Lambda", w.Lambda},   {"r_max", w.r_max},
                       {"samples", w.samples}, {"spacing", w.spacing}, {"margin", w.margin}};
}

/// Samples both Hessian eigenvalue branches, phi''(r) and phi'(r)/r, on a uniform
/// grid of `samples` intervals over [0, r_max]. Throws ConvexityError at the first
/// radius where either branch is not positive or phi' fails to increase.
inline EllipticityWindow certify_window(const RadialPotential& p, std::size_t samples = 10000,
                                        double margin = 0.0) {
    check_normalised(p);
    EllipticityWindow w;
    w.r_max = p.r_max;
    w.samples = samples;
    w.spacing = p.r_max / static_cast<double>(samples);
    w.margin = margin;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double prev_slope = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= samples; ++k) {
        const double r = static_cast<double>(k) * w.spacing;
        const double radial = p.phi2(r);
        const double tang = r == 0.0 ? p.phi2(0.0) : p.phi1_over_r(r);
        const double slope = p.phi1(r);
        if (!(radial > 0.0) || !(tang > 0.0) || !std::isfinite(radial) || !std::isfinite(tang))
            throw ConvexityError("potential '" + p.id + "' is not strictly convex at r = " +
                                     std::to_string(r),
                                 r);
        if (k > 0 && !(slope > prev_slope))
            throw ConvexityError("phi' of potential '" + p.id + "' is not increasing at r = " +
                                     std::to_string(r),
                                 r);
        prev_slope = slope;
        lo = std::min({lo, radial, tang});
        hi = std::max({hi, radial, tang});
    }
    w.lambda = lo * (1.0 - margin);
    w.Lambda = hi * (1.0 + margin);
    return w;
}

// ---------------------------------------------------------------------------
// Scalar entropy gamma

/// Inverse of phi on [0, phi(r_max)] by bisection, bracketed in [lo, hi].
inline double invert_phi(const RadialPotential& p, double value, double lo, double hi,
                         double tol = 1e-12) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (p.phi(mid) < value)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline double invert_phi(const RadialPotential& p, double value) {
    return invert_phi(p, value, 0.0, p.r_max);
}

/// gamma(z) = int_0^z phi''(psi(t)) dt with psi = phi^{-1}, tabulated on the
/// nodes z_k = phi(r_k) of a uniform r-grid and interpolated by cubic Hermite
/// with exact slopes gamma'(z_k) = phi''(r_k).
struct EntropyData {
    RadialPotential potential;
    HermiteTable table;
    /// Largest |gamma(phi(r)) - phi'(r)^2/2| over the certification samples.
    double tol = 0.0;
    std::size_t samples = 0;

    double z_max() const { return table.hi(); }

    double gamma(double z) const {
        if (!(z >= -1e-15) || z > z_max() * (1.0 + 1e-12))
            throw RangeError("entropy argument " + std::to_string(z) + " outside [0, " +
                                 std::to_string(z_max()) + "]",
                             0, z);
        return table(std::clamp(z, 0.0, z_max()));
    }

    /// gamma'(z) = phi''(psi(z)).
    double gamma1(double z) const {
        if (!(z >= -1e-15) || z > z_max() * (1.0 + 1e-12))
            throw RangeError("entropy argument outside its table", 0, z);
        return potential.phi2(invert_phi(potential, std::clamp(z, 0.0, z_max())));
    }
};

struct EntropyOptions {
    std::size_t intervals = 4096;
    std::size_t samples = 1000;
    double quadrature_tol = 1e-10;
    double max_residual = 1e-6;
};

inline EntropyData build_entropy(const RadialPotential& p, const EntropyOptions& opt = {}) {
    certify_window(p);
    const std::size_t K = opt.intervals;
    const double dr = p.r_max / static_cast<double>(K);
    std::vector<double> r(K + 1), z(K + 1), g(K + 1), dg(K + 1);
    for (std::size_t k = 0; k <= K; ++k) {
        r[k] = k == K ? p.r_max : static_cast<double>(k) * dr;
        z[k] = p.phi(r[k]);
        dg[k] = p.phi2(r[k]);
    }
    g[0] = 0.0;
    const double piece_tol = opt.quadrature_tol / static_cast<double>(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double rl = r[k], rh = r[k + 1];
        auto integrand = [&](double t) { return p.phi2(invert_phi(p, t, rl, rh)); };
        g[k + 1] = g[k] + adaptive_simpson(integrand, z[k], z[k + 1], piece_tol);
    }
    EntropyData e{p, HermiteTable(z, g, dg), 0.0, opt.samples + 1};
    double worst = 0.0;
    double worst_r = 0.0;
    for (std::size_t j = 0; j <= opt.samples; ++j) {
        const double rr = p.r_max * static_cast<double>(j) / static_cast<double>(opt.samples);
        const double slope = p.phi1(rr);
        const double res = std::abs(e.gamma(p.phi(rr)) - 0.5 * slope * slope);
        if (res > worst) {
            worst = res;
            worst_r = rr;
        }
    }
    e.tol = worst;
    if (worst > opt.max_residual)
        throw ConstructionError("entropy identity residual " + std::to_string(worst) + " at r = " +
                                std::to_string(worst_r) + " for potential '" + p.id +
                                "': phi and its derivatives are inconsistent");
    return e;
}

// ---------------------------------------------------------------------------
// Strongly coupled coefficients

/// Coefficients of u^i_t = (a u^i_x + c^i H_x)_x with a and c^i scalar multiples
/// of the identity in space, plus their certified bounds over r_min <= |u| <= r_max.
struct CoupledCoefficients {
    std::string id;
    std::function<double(std::span<const double>)> a;
    std::function<void(std::span<const double>, std::span<double>)> c;
    std::function<double(std::span<const double>)> H;
    std::function<void(std::span<const double>, std::span<double>)> H_grad;

    double r_min = 0.0;
    double r_max = 1.0;
    double sup_a = 1.0;
    double sup_c = 1.0;
    double sup_H_grad = 0.0;
    double sup_H_hess = 0.0;
    double inf_H = 0.0;
    /// Lower bound of a.
    double lambda_a = 1.0;
    /// Ellipticity of the full system tensor a delta_ij + c^i H_{z_j}.
    double lambda_A = 1.0;
    /// Lower bound of the scalar flux coefficient a + H_z . c.
    double lambda_flux = 1.0;
    /// Smallest Hessian eigenvalue of H; may be <= 0 (non-convex H).
    double lambda_H = 0.0;
    bool H_trivial = false;

    /// Effective diffusivity bound for the explicit step: sup(a + |c| |H_z|).
    double effective_Lambda() const { return sup_a + sup_c * sup_H_grad; }
};

inline void to_json(nlohmann::json& j, const CoupledCoefficients& cc) {
    j = nlohmann::json{{"id", cc.id},
                       {"r_min", cc.r_min},
                       {"r_max", cc.r_max},
                       {"sup_a", cc.sup_a},
                       {"sup_c", cc.sup_c},
                       {"sup_H_grad", cc.sup_H_grad},
                       {"sup_H_hess", cc.sup_H_hess},
                       {"inf_H", cc.inf_H},
                       {"lambda_a", cc.lambda_a},
                       {"lambda_A", cc.lambda_A},
                       {"lambda_flux", cc.lambda_flux},
                       {"lambda_H", cc.lambda_H},
                       {"H_trivial", cc.H_trivial}};
}

namespace detail {

inline void check_coupled_range(double r, double r_max, const std::string& id) {
    if (!(r <= r_max * (1.0 + 1e-12)))
        throw RangeError("|u| = " + std::to_string(r) + " exceeds r_max = " +
                             std::to_string(r_max) + " of coupled coefficients '" + id + "'",
                         0, r);
}

inline void unit_direction(std::span<const double> z, double r, std::span<double> out) {
    if (r < kRadialEpsilon) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / r;
}

} // namespace detail

/// Radial profile of the coupled decomposition, tabulated once.
struct CoupledProfile {
    RadialPotential potential;
    HermiteTable H;  // H(r) = phi'(r) - int_0^r phi'(s)/s ds

    double a(double r) const { return potential.phi1_over_r(r); }
    double H_prime(double r) const { return potential.phi2(r) - potential.phi1_over_r(r); }
    /// H'' by central differences of the closed-form H'.
    double H_second(double r) const {
        const double d = 1e-5;
        if (r < d) return (H_prime(r + d) - H_prime(r)) / d;
        return (H_prime(r + d) - H_prime(r - d)) / (2.0 * d);
    }
    /// Tangential Hessian eigenvalue of H(|z|): H'(r)/r, extended by H''(0) at 0.
    double H_tangential(double r) const {
        if (r < 1e-4) return H_second(0.5 * r);
        return H_prime(r) / r;
    }
};

inline CoupledProfile coupled_profile(const RadialPotential& p, std::size_t intervals = 4096,
                                      double tol = 1e-10) {
    certify_window(p);
    const std::size_t K = intervals;
    const double dr = p.r_max / static_cast<double>(K);
    std::vector<double> r(K + 1), Hv(K + 1), dH(K + 1);
    double integral = 0.0;
    const double piece_tol = tol / static_cast<double>(K);
    auto ratio = [&](double s) { return p.phi1_over_r(s); };
    for (std::size_t k = 0; k <= K; ++k) {
        r[k] = k == K ? p.r_max : static_cast<double>(k) * dr;
        if (k > 0) integral += adaptive_simpson(ratio, r[k - 1], r[k], piece_tol);
        Hv[k] = p.phi1(r[k]) - integral;
        dH[k] = p.phi2(r[k]) - p.phi1_over_r(r[k]);
    }
    return {p, HermiteTable(r, Hv, dH)};
}

/// Writes the radial diffusion system as a strongly coupled one:
/// a = phi'(r)/r, c^i = u^i/|u|, H = phi'(r) - int_0^r phi'(s)/s ds.
/// Bounds are certified on r_min <= |u| <= r_max.
inline CoupledCoefficients coupled_decomposition(const RadialPotential& p, double r_min = 0.0,
                                                 std::size_t samples = 10000) {
    if (!(r_min >= 0.0) || !(r_min < p.r_max))
        throw ConfigError("coupled decomposition needs 0 <= r_min < r_max");
    auto prof = std::make_shared<const CoupledProfile>(coupled_profile(p));
    const double r_max = p.r_max;
    const std::string id = "decomposition:" + p.id;
    CoupledCoefficients cc;
    cc.id = id;
    cc.r_min = r_min;
    cc.r_max = r_max;
    cc.a = [prof, r_max, id](std::span<const double> z) {
        const double r = euclidean_norm(z);
        detail::check_coupled_range(r, r_max, id);
        return prof->a(r);
    };
    cc.c = [](std::span<const double> z, std::span<double> out) {
        detail::unit_direction(z, euclidean_norm(z), out);
    };
    cc.H = [prof, r_max, id](std::span<const double> z) {
        const double r = euclidean_norm(z);
        detail::check_coupled_range(r, r_max, id);
        return prof->H(std::min(r, r_max));
    };
    cc.H_grad = [prof, r_max, id](std::span<const double> z, std::span<double> out) {
        const double r = euclidean_norm(z);
        detail::check_coupled_range(r, r_max, id);
        detail::unit_direction(z, r, out);
        const double d = prof->H_prime(r);
        for (double& x : out) x *= d;
    };

    double sup_a = 0, inf_a = 1e300, sup_hg = 0, sup_hh = 0, inf_H = 1e300, lam_A = 1e300,
           lam_flux = 1e300, lam_H = 1e300, sup_H = 0;
    for (std::size_t k = 0; k <= samples; ++k) {
        const double r = r_min + (r_max - r_min) * static_cast<double>(k) / static_cast<double>(samples);
        const double a = prof->a(r);
        const double hp = prof->H_prime(r);
        const double h2 = prof->H_second(r);
        const double ht = prof->H_tangential(r);
        const double Hr = prof->H(r);
        sup_a = std::max(sup_a, a);
        inf_a = std::min(inf_a, a);
        sup_hg = std::max(sup_hg, std::abs(hp));
        sup_hh = std::max({sup_hh, std::abs(h2), std::abs(ht)});
        lam_H = std::min({lam_H, h2, ht});
        inf_H = std::min(inf_H, Hr);
        sup_H = std::max(sup_H, std::abs(Hr));
        // Symmetric part of a I + c (H_z)^T with c = zhat, H_z = H' zhat has
        // eigenvalues a + H' (radial) and a (tangential).
        lam_A = std::min({lam_A, a + hp, a});
        lam_flux = std::min(lam_flux, a + hp);
    }
    cc.sup_a = sup_a;
    cc.lambda_a = inf_a;
    cc.sup_c = 1.0;
    cc.sup_H_grad = sup_hg;
    cc.sup_H_hess = sup_hh;
    cc.inf_H = inf_H;
    cc.lambda_A = lam_A;
    cc.lambda_flux = lam_flux;
    cc.lambda_H = lam_H;
    cc.H_trivial = sup_H <= 1e-13 && sup_hg <= 1e-13;
    return cc;
}

/// a = 1, H = 0: the coupled system reduces to N decoupled heat equations.
inline CoupledCoefficients heat_coefficients(double r_max = 1.0) {
    CoupledCoefficients cc;
    cc.id = "heat";
    cc.r_max = r_max;
    cc.a = [](std::span<const double>) { return 1.0; };
    cc.c = [](std::span<const double> z, std::span<double> out) {
        detail::unit_direction(z, euclidean_norm(z), out);
    };
    cc.H = [](std::span<const double>) { return 0.0; };
    cc.H_grad = [](std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    cc.sup_a = cc.lambda_a = cc.lambda_A = cc.lambda_flux = 1.0;
    cc.sup_c = 1.0;
    cc.H_trivial = true;
    return cc;
}

} // namespace pelab

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pelab/diagnostics.hpp"
#include "support.hpp"

using namespace pelab;
using pelab::testing::Gen;
using pelab::testing::stationary;
using pelab::testing::sup_diff;

namespace {

constexpr double kPi = std::numbers::pi;

GridSpec dirichlet_line(std::size_t n) {
    return GridSpec(1, {n}, 1.0 / static_cast<double>(n - 1), Boundary::Dirichlet);
}
GridSpec periodic_line(std::size_t n) {
    return GridSpec(1, {n}, 1.0 / static_cast<double>(n), Boundary::Periodic);
}

// Forward-difference energy summed edge by edge, written independently.
double edge_energy(const GridSpec& g, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t p = 0; p < g.points(); ++p)
        for (int a = 0; a < g.dim(); ++a) {
            const std::size_t q = g.shifted(p, a, 1);
            if (q == GridSpec::npos) continue;
            const double d = (w[q] - w[p]) / g.h();
            s += d * d;
        }
    return s * g.cell_volume();
}

// Random field vanishing on the boundary layer (or mean-zero when periodic).
std::vector<double> random_interior(const GridSpec& g, Gen& gen) {
    std::vector<double> f(g.points(), 0.0);
    for (std::size_t p = 0; p < g.points(); ++p)
        if (!g.on_boundary(p)) f[p] = gen.uniform(-1.0, 1.0);
    if (g.periodic()) {
        const double m = pairwise_sum(f) / static_cast<double>(f.size());
        for (double& x : f) x -= m;
    }
    return f;
}

RunConfig config(const GridSpec& g, int N, double t_end, const char* pot = "quadratic") {
    RunConfig c;
    c.grid = g;
    c.components = N;
    c.t_end = t_end;
    c.potential = pot;
    return c;
}

Trajectory heat_pair_member(double amplitude, double t_end, int every = 20) {
    RunConfig c = config(dirichlet_line(128), 1, t_end);
    c.initial.family = "fourier_mode";
    c.initial.amplitude = amplitude;
    c.snapshot_every = every;
    return run(c);
}

// Stationary Dirichlet trajectory holding u = a x on a line (boundary layer not constant,
// which the cylinder machinery does not require).
Trajectory linear_profile(std::size_t n, double a, std::size_t count, double spacing) {
    const GridSpec g = dirichlet_line(n);
    FieldState s(g, 1);
    for (std::size_t p = 0; p < g.points(); ++p) s.at(0, p) = a * g.position(p, 0);
    return stationary(s, count, spacing);
}

FieldState rotate(const FieldState& s, double angle) {
    FieldState r = s;
    const double c = std::cos(angle), sn = std::sin(angle);
    for (std::size_t p = 0; p < s.points(); ++p) {
        r.at(0, p) = c * s.at(0, p) - sn * s.at(1, p);
        r.at(1, p) = sn * s.at(0, p) + c * s.at(1, p);
    }
    return r;
}

} // namespace

// ---------------------------------------------------------------------------
// H^-1 norm

TEST(HMinusOne, ZeroFieldHasZeroNorm) {
    const auto g = dirichlet_line(33);
    EXPECT_EQ(h_minus_one_norm(g, std::vector<double>(g.points(), 0.0)), 0.0);
}

TEST(HMinusOne, SineModeMatchesAnalyticPoissonSolution) {
    const auto g = dirichlet_line(129);
    std::vector<double> f(g.points());
    for (std::size_t p = 0; p < g.points(); ++p) f[p] = std::sin(kPi * g.position(p, 0));
    const double exact = 1.0 / (std::sqrt(2.0) * kPi);
    EXPECT_NEAR(exact, 0.22508, 1e-5);
    EXPECT_NEAR(h_minus_one_norm(g, f), exact, 10.0 * g.h() * g.h());
}

TEST(HMinusOne, ConstructAndInvert) {
    Gen gen(5);
    for (Boundary b : {Boundary::Dirichlet, Boundary::Periodic})
        for (int trial = 0; trial < 10; ++trial) {
            const GridSpec g = gen.grid(b, 2);
            const auto w = random_interior(g, gen);
            const auto f = laplacian(w, g);
            const double expect = std::sqrt(edge_energy(g, w));
            EXPECT_NEAR(h_minus_one_norm(g, f), expect, 1e-9 * expect) << to_string(b) << " " << trial;
        }
}

TEST(HMinusOne, HomogeneousOfDegreeOne) {
    Gen gen(6);
    for (int trial = 0; trial < 20; ++trial) {
        const GridSpec g = gen.grid(Boundary::Dirichlet, 2);
        const auto f = random_interior(g, gen);
        const double a = gen.uniform(-5.0, 5.0);
        std::vector<double> af(f);
        for (double& x : af) x *= a;
        const double n = h_minus_one_norm(g, f);
        EXPECT_NEAR(h_minus_one_norm(g, af), std::abs(a) * n, 1e-12 * std::abs(a) * n);
    }
}

TEST(HMinusOne, BoundedByPoincareConstantTimesL2) {
    Gen gen(7);
    for (int trial = 0; trial < 20; ++trial) {
        const GridSpec g = gen.grid(Boundary::Dirichlet, 2);
        const auto f = random_interior(g, gen);
        EXPECT_LE(h_minus_one_norm(g, f), poincare_constant(g) * discrete_l2(g, f) * (1.0 + 1e-9));
    }
    // The smallest Dirichlet eigenvector attains the bound.
    const auto g = dirichlet_line(65);
    std::vector<double> f(g.points());
    for (std::size_t p = 0; p < g.points(); ++p) f[p] = std::sin(kPi * g.position(p, 0));
    EXPECT_NEAR(h_minus_one_norm(g, f), poincare_constant(g) * discrete_l2(g, f), 1e-6);
}

TEST(HMinusOne, VectorNormIsRootSumOfSquares) {
    Gen gen(8);
    const GridSpec g(2, {9, 11}, 0.1, Boundary::Dirichlet);
    const auto f0 = random_interior(g, gen), f1 = random_interior(g, gen);
    std::vector<double> both(f0);
    both.insert(both.end(), f1.begin(), f1.end());
    EXPECT_NEAR(h_minus_one_norm(g, both, 2), std::hypot(h_minus_one_norm(g, f0), h_minus_one_norm(g, f1)), 1e-13);
}

TEST(HMinusOne, RejectsNonFiniteInput) {
    const auto g = dirichlet_line(16);
    std::vector<double> f(g.points(), 0.0);
    f[3] = NAN;
    EXPECT_THROW(h_minus_one_norm(g, f), NumericalError);
}

// ---------------------------------------------------------------------------
// contraction_report

TEST(Contraction, IdenticalRunsGiveZeroDistance) {
    const auto a = heat_pair_member(0.5, 0.01);
    const auto r = contraction_report(a, a, certify_window(potentials::quadratic()));
    EXPECT_TRUE(r.passed);
    for (double d : r.series.at("h_minus_one_distance")) EXPECT_EQ(d, 0.0);
}

TEST(Contraction, HeatDifferenceDecaysLikeSlowestMode) {
    const auto a = heat_pair_member(0.5, 0.05), b = heat_pair_member(0.9, 0.05);
    const auto r = contraction_report(a, b, certify_window(potentials::quadratic()));
    EXPECT_TRUE(r.passed);
    const auto& d = r.series.at("h_minus_one_distance");
    const auto& t = r.series.at("t");
    for (std::size_t k = 1; k < d.size(); ++k)
        EXPECT_NEAR(d[k] / d[0], std::exp(-kPi * kPi * t[k]), 0.02 * std::exp(-kPi * kPi * t[k]));
    EXPECT_TRUE(r.measured.at("weighted_monotone").get<bool>());
}

TEST(Contraction, ReversedStepFailsWithWitness) {
    const auto a = heat_pair_member(0.5, 0.01, 1);
    RunConfig c = config(dirichlet_line(128), 1, 0.01);
    c.initial.family = "fourier_mode";
    c.initial.amplitude = 0.9;
    const auto model = make_model(c);
    const auto plan = plan_steps(c, model.Lambda);
    Trajectory b;
    b.dt = plan.dt;
    FieldState cur = make_initial(c.grid, 1, c.initial);
    b.snapshots.push_back(cur);
    for (std::size_t k = 1; k <= plan.steps; ++k) {
        cur = model.step(cur, k == 100 ? -plan.dt : plan.dt);
        cur.t = static_cast<double>(k) * plan.dt;
        b.snapshots.push_back(cur);
    }
    const auto r = contraction_report(a, b, certify_window(potentials::quadratic()));
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.witness.at("snapshot"), 100);
    EXPECT_GT(r.witness.at("after").get<double>(), r.witness.at("before").get<double>());
}

TEST(Contraction, MismatchedRunsAreRejected) {
    const auto a = heat_pair_member(0.5, 0.01), b = heat_pair_member(0.5, 0.02);
    EXPECT_THROW(contraction_report(a, b, certify_window(potentials::quadratic())), ShapeError);
}

// ---------------------------------------------------------------------------
// sup_norm_report

TEST(SupNorm, ConstantStatePasses) {
    FieldState s(periodic_line(16), 2);
    for (std::size_t p = 0; p < s.points(); ++p) {
        s.at(0, p) = 0.3;
        s.at(1, p) = 0.4;
    }
    const auto r = sup_norm_report(stationary(s, 5, 0.1));
    EXPECT_TRUE(r.passed);
    for (double v : r.series.at("sup")) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(SupNorm, CoshRadialBumpIsNonIncreasing) {
    RunConfig c = config(GridSpec::cube(2, 32, 1.0 / 32.0, Boundary::Periodic), 2, 0.01, "cosh");
    c.initial.family = "radial_bump";
    c.initial.amplitude = 0.9;
    c.snapshot_every = 10;
    const auto r = sup_norm_report(run(c));
    EXPECT_TRUE(r.passed);
    EXPECT_TRUE(r.measured.at("non_increasing").get<bool>());
}

TEST(SupNorm, ForcedSnapshotFailsWithWitness) {
    RunConfig c = config(periodic_line(64), 1, 0.01, "cosh");
    c.initial.family = "radial_bump";
    c.initial.amplitude = 0.5;
    c.snapshot_every = 10;
    auto traj = run(c);
    traj.snapshots[3].at(0, 11) = 0.7;
    const auto r = sup_norm_report(traj);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.witness.at("snapshot"), 3);
    EXPECT_EQ(r.witness.at("point"), 11);
}

// ---------------------------------------------------------------------------
// Entropy residuals

TEST(EntropyResidual, ConstantStateGivesZero) {
    const auto p = potentials::cosh_minus_one();
    FieldState s(periodic_line(16), 2);
    for (std::size_t q = 0; q < s.points(); ++q) {
        s.at(0, q) = 0.3;
        s.at(1, q) = -0.2;
    }
    const auto fields = entropy_residual_fields(stationary(s, 4, 1e-3), p, build_entropy(p), certify_window(p));
    ASSERT_EQ(fields.size(), 3u);
    for (const auto& f : fields)
        for (double v : f) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(EntropyResidual, QuadraticScalarResidualScalesWithStepAndSpacing) {
    auto measure = [](std::size_t n) {
        RunConfig c = config(periodic_line(n), 1, 0.005);
        c.initial.family = "band_limited";
        c.initial.amplitude = 0.8;
        c.initial.seed = 7;
        const auto traj = run(c);
        const auto p = potentials::quadratic();
        const auto r = entropy_residual_diffusion(traj, p, build_entropy(p), certify_window(p),
                                                  calibrate_tau_constant(traj));
        EXPECT_TRUE(r.passed);
        const double h = c.grid.h();
        return std::pair{r.measured.at("max_positive").get<double>(),
                         r.measured.at("max_abs").get<double>() / (h * h + traj.dt)};
    };
    const auto [pos64, k64] = measure(64);
    const auto [pos128, k128] = measure(128);
    // The scaled residual stays bounded as the grid is refined.
    EXPECT_LT(k128, 1.5 * k64);
    EXPECT_GT(k128, 0.5 * k64);
    EXPECT_LE(pos64, 1e-12);
    EXPECT_LE(pos128, 1e-12);
}

TEST(EntropyResidual, CoshRefinementAndOverstatedDissipation) {
    auto report = [](std::size_t n, double lambda_scale) {
        RunConfig c = config(periodic_line(n), 1, 0.005, "cosh");
        c.initial.family = "band_limited";
        c.initial.amplitude = 0.8;
        c.initial.seed = 7;
        const auto traj = run(c);
        auto q = c;
        q.potential = "quadratic";
        const double K = calibrate_tau_constant(run(q));
        const auto p = potentials::cosh_minus_one();
        auto w = certify_window(p);
        w.lambda *= lambda_scale;
        return entropy_residual_diffusion(traj, p, build_entropy(p), w, K);
    };
    const auto coarse = report(64, 1.0), fine = report(128, 1.0);
    EXPECT_TRUE(coarse.passed);
    EXPECT_TRUE(fine.passed);
    EXPECT_TRUE(refinement_report("entropy_refinement", coarse.measured.at("max_positive"),
                                  fine.measured.at("max_positive"))
                    .passed);
    const auto bad = report(64, 2.0);
    EXPECT_FALSE(bad.passed);
    EXPECT_TRUE(bad.witness.contains("location"));
}

TEST(EntropyResidual, RequiresConsecutiveSnapshots) {
    RunConfig c = config(periodic_line(32), 1, 0.005);
    c.initial.amplitude = 0.5;
    c.snapshot_every = 5;
    const auto traj = run(c);
    const auto p = potentials::quadratic();
    EXPECT_ANY_THROW(entropy_residual_fields(traj, p, build_entropy(p), certify_window(p)));
}

TEST(EntropyParamsChoice, TrivialHGivesUnitExponent) {
    const auto e = choose_entropy_params(heat_coefficients(), 2, 3);
    EXPECT_EQ(e.s, 1.0);
    EXPECT_EQ(e.C_epsilon, 0.0);
    EXPECT_DOUBLE_EQ(e.c, e.lambda / 2.0);
}

TEST(EntropyParamsChoice, FormulaAndHomogeneity) {
    const auto cc = coupled_decomposition(potentials::cosh_minus_one(), 0.25);
    const auto e = choose_entropy_params(cc, 1, 2);
    const double lambda = std::min({cc.lambda_a, cc.lambda_A, cc.lambda_flux});
    const double kappa = lambda * cc.lambda_H;
    const double C = std::pow(cc.sup_H_hess * cc.sup_c, 2) * 2.0 / (2.0 * kappa);
    EXPECT_NEAR(e.C_epsilon, C, 1e-12 * C);
    EXPECT_NEAR(e.s, std::max(1.0, 2.0 * C / lambda), 1e-12 * e.s);
    EXPECT_NEAR(e.c, 0.5 * kappa * e.s * std::exp(e.s * cc.inf_H), 1e-12 * e.c);
    ASSERT_GT(2.0 * e.C_epsilon / e.lambda, 1.0);
    auto doubled = cc;
    doubled.sup_c *= 2.0;
    EXPECT_NEAR(choose_entropy_params(doubled, 1, 2).s, 4.0 * e.s, 1e-12 * e.s);
}

TEST(EntropyParamsChoice, RejectsDegenerateCoefficients) {
    auto cc = coupled_decomposition(potentials::cosh_minus_one(), 0.25);
    auto flat = cc;
    flat.lambda_H = 0.0;
    EXPECT_THROW(choose_entropy_params(flat, 1, 2), ConfigError);
    auto degenerate = cc;
    degenerate.lambda_a = 0.0;
    EXPECT_THROW(choose_entropy_params(degenerate, 1, 2), ConfigError);
}

TEST(CoupledResidual, ConstantStateGivesZero) {
    const auto cc = coupled_decomposition(potentials::cosh_minus_one(), 0.25);
    const auto ep = choose_entropy_params(cc, 1, 2);
    FieldState s(periodic_line(16), 2);
    for (std::size_t q = 0; q < s.points(); ++q) {
        s.at(0, q) = 0.6;
        s.at(1, q) = 0.1;
    }
    for (const auto& f : coupled_residual_fields(stationary(s, 4, 1e-3), cc, ep))
        for (double v : f) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(CoupledResidual, TrivialHIsRoutedElsewhere) {
    const auto cc = heat_coefficients();
    FieldState s(periodic_line(16), 2);
    EXPECT_THROW(coupled_residual_fields(stationary(s, 3, 1e-3), cc, choose_entropy_params(cc, 1, 2)),
                 ConfigError);
}

TEST(CoupledResidual, RefinementOnSmoothData) {
    auto report = [](std::size_t n) {
        RunConfig c = config(periodic_line(n), 2, 0.005, "cosh");
        c.kind = ModelKind::Coupled;
        c.r_min = 0.25;
        c.initial.family = "band_limited";
        c.initial.amplitude = 0.3;
        c.initial.base = {0.6, 0.0};
        c.initial.seed = 3;
        const auto traj = run(c);
        auto q = c;
        q.kind = ModelKind::Diffusion;
        q.potential = "quadratic";
        q.r_min = 0.0;
        const double K = calibrate_tau_constant(run(q));
        const auto model = make_model(c);
        return entropy_residual_coupled(traj, *model.coupled, choose_entropy_params(*model.coupled, 1, 2), K);
    };
    const auto coarse = report(64), fine = report(128);
    EXPECT_TRUE(coarse.passed);
    EXPECT_TRUE(fine.passed);
    EXPECT_TRUE(refinement_report("coupled_refinement", coarse.measured.at("max_positive"),
                                  fine.measured.at("max_positive"))
                    .passed);
}

TEST(Refinement, RequiresFactorReduction) {
    EXPECT_TRUE(refinement_report("r", 1.0, 0.5).passed);
    EXPECT_FALSE(refinement_report("r", 1.0, 0.6).passed);
    EXPECT_TRUE(refinement_report("r", 0.0, 0.0).passed);
}

// ---------------------------------------------------------------------------
// Morrey profile

TEST(Morrey, ZeroFunctionalGivesZeros) {
    const auto traj = linear_profile(129, 1.0, 40, 1e-3);
    const auto prof = morrey_profile(traj, 64, traj.snapshots.back().t, {16.0 / 128, 8.0 / 128},
                                     [](const FieldState& s) { return std::vector<double>(s.points(), 0.0); });
    for (double v : prof.values) EXPECT_EQ(v, 0.0);
}

TEST(Morrey, LinearProfileQuotientMatchesCylinderVolume) {
    const double a = 0.7, h = 1.0 / 256.0;
    const double R1 = 32.0 * h, R2 = 16.0 * h;
    const double spacing = R2 * R2 / 16.0;  // both time windows hold a whole number of snapshots
    const auto traj = linear_profile(257, a, 70, spacing);
    const double t0 = traj.snapshots.back().t;
    const auto prof = morrey_profile(traj, 128, t0, {R2, R1},
                                     [](const FieldState& s) { return gradient_sq(s); });
    ASSERT_EQ(prof.radii.front(), R1);
    auto expect = [&](double R, double balls, double levels) { return a * a * balls * h * levels * spacing / R; };
    EXPECT_NEAR(prof.values[0], expect(R1, 65, 64), 1e-12);
    EXPECT_NEAR(prof.values[1], expect(R2, 33, 16), 1e-12);
    EXPECT_NEAR(prof.values[1] / prof.values[0], 0.25, 0.01);
}

TEST(Morrey, SmoothHeatProfileDecreases) {
    RunConfig c = config(periodic_line(256), 1, 0.005);
    c.initial.amplitude = 0.5;
    const auto traj = run(c);
    const double h = c.grid.h();
    const auto prof = morrey_profile(traj, 0, traj.snapshots.back().t, {16 * h, 8 * h, 4 * h},
                                     [](const FieldState& s) { return gradient_sq(s); });
    for (std::size_t i = 1; i < prof.values.size(); ++i) EXPECT_LT(prof.values[i], prof.values[i - 1]);
    EXPECT_TRUE(morrey_decay_report(prof, 0, traj.snapshots.back().t).passed);
}

TEST(Morrey, RadiusBelowFourCellsIsRejected) {
    const auto traj = linear_profile(129, 1.0, 40, 1e-4);
    EXPECT_THROW(morrey_profile(traj, 64, traj.snapshots.back().t, {2.0 / 128},
                                [](const FieldState& s) { return gradient_sq(s); }),
                 DomainError);
}

TEST(Morrey, InvariantUnderRotation) {
    RunConfig c = config(GridSpec::cube(2, 64, 1.0 / 64.0, Boundary::Periodic), 2, 0.016, "cosh");
    c.snapshot_every = 5;
    InitialSpec init;
    init.family = "band_limited";
    init.amplitude = 0.6;
    init.seed = 4;
    const auto u0 = make_initial(c.grid, 2, init);
    const auto a = run(c, u0), b = run(c, rotate(u0, 0.9));
    const double h = c.grid.h();
    const auto g2 = [](const FieldState& s) { return gradient_sq(s); };
    for (std::size_t x0 : {std::size_t{0}, std::size_t{1300}, std::size_t{2777}}) {
        const auto pa = morrey_profile(a, x0, 0.016, {8 * h, 4 * h}, g2);
        const auto pb = morrey_profile(b, x0, 0.016, {8 * h, 4 * h}, g2);
        EXPECT_LE(sup_diff(pa.values, pb.values), 1e-10);
    }
}

TEST(Morrey, DecayReportWitness) {
    const MorreyProfile flat{{0.2, 0.1}, {1.0, 0.9}};
    const auto r = morrey_decay_report(flat, 5, 0.3);
    EXPECT_FALSE(r.passed);
    EXPECT_EQ(r.witness.at("point"), 5);
    EXPECT_EQ(r.witness.at("R"), 0.1);
}

// ---------------------------------------------------------------------------
// Reverse Hoelder

TEST(ReverseHolder, LinearProfileGivesRatioOne) {
    const double h = 1.0 / 256.0, R = 8.0 * h;
    const auto traj = linear_profile(257, -1.3, 40, (4 * R) * (4 * R) / 32.0);
    const auto r = reverse_holder_report(traj, {{128, traj.snapshots.back().t, R}});
    EXPECT_TRUE(r.passed);
    EXPECT_NEAR(r.measured.at("max_ratio").get<double>(), 1.0, 1e-12);
}

TEST(ReverseHolder, ConstantTrajectoryIsSkipped) {
    FieldState s(periodic_line(128), 1);
    for (double& v : s.values) v = 0.2;
    const auto traj = stationary(s, 40, 1e-3);
    const auto r = reverse_holder_report(traj, {{64, traj.snapshots.back().t, 4.0 / 128}});
    EXPECT_EQ(r.measured.at("skipped"), 1);
    EXPECT_EQ(r.measured.at("evaluated"), 0);
    EXPECT_FALSE(r.note.empty());
}

TEST(ReverseHolder, ExponentMustExceedTwo) {
    const auto traj = linear_profile(129, 1.0, 10, 1e-3);
    EXPECT_THROW(reverse_holder_report(traj, {}, 2.0), ConfigError);
}

// ---------------------------------------------------------------------------
// Local estimate ratios

TEST(EstimateRatios, ConstantTrajectoryGivesZero) {
    FieldState s(periodic_line(128), 1);
    for (double& v : s.values) v = 0.2;
    const auto traj = stationary(s, 40, 1e-4);
    const auto r = estimate_ratio_report(traj, potentials::quadratic(), {{64, 0.003, 2.0 / 128, 4.0 / 128}});
    EXPECT_EQ(r.measured.at("max_time_derivative"), 0.0);
    EXPECT_EQ(r.measured.at("max_hessian"), 0.0);
    EXPECT_EQ(r.measured.at("max_l4"), 0.0);
}

TEST(EstimateRatios, HeatRunMatchesDirectSummation) {
    RunConfig c = config(periodic_line(128), 1, 0.006);
    c.initial.amplitude = 0.6;
    const auto traj = run(c);
    const double h = c.grid.h(), dt = traj.spacing();
    const std::size_t centre = 10;
    const double r_in = 4 * h, R_out = 8 * h, t0 = 0.005;
    const auto rep = estimate_ratio_report(traj, potentials::quadratic(), {{centre, t0, r_in, R_out}});

    auto u = [&](std::size_t k, long i) { return traj.snapshots[k].at(0, static_cast<std::size_t>((i + 128) % 128)); };
    auto sum_over = [&](double R, const std::function<double(std::size_t, long)>& f) {
        const long m = static_cast<long>(std::floor(R / h + 1e-9));
        double s = 0.0;
        for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
            const double t = traj.snapshots[k].t;
            if (!(t > t0 - R * R + 1e-9 * dt && t <= t0 + 1e-9 * dt)) continue;
            for (long i = -m; i <= m; ++i) s += f(k, static_cast<long>(centre) + i);
        }
        return s * h * dt;
    };
    const double rhs = sum_over(R_out, [&](std::size_t k, long i) {
        const double d = (u(k, i + 1) - u(k, i - 1)) / (2 * h);
        return d * d;
    });
    const double ut = sum_over(r_in, [&](std::size_t k, long i) {
        const double d = (u(k + 1, i) - u(k, i)) / dt;
        return d * d;
    });
    const double hess = sum_over(r_in, [&](std::size_t k, long i) {
        const double d = (u(k, i + 1) - 2 * u(k, i) + u(k, i - 1)) / (h * h);
        return d * d;
    });
    const double w = (R_out - r_in) * (R_out - r_in);
    EXPECT_NEAR(rep.measured.at("max_time_derivative").get<double>(), ut * w / rhs, 1e-12 * ut * w / rhs);
    EXPECT_NEAR(rep.measured.at("max_hessian").get<double>(), hess * w / rhs, 1e-12 * hess * w / rhs);
    EXPECT_TRUE(rep.passed);
}

TEST(EstimateRatios, RejectsInvertedPair) {
    const auto traj = linear_profile(129, 1.0, 40, 1e-4);
    EXPECT_THROW(estimate_ratio_report(traj, potentials::quadratic(), {{64, 0.003, 8.0 / 128, 4.0 / 128}}),
                 DomainError);
}

// ---------------------------------------------------------------------------
// Hoelder seminorm

TEST(Holder, ConstantFieldIsZero) {
    FieldState s(periodic_line(64), 2);
    for (double& v : s.values) v = 0.4;
    EXPECT_EQ(holder_seminorm(s, 0.5, {2.0 / 64, 8.0 / 64}), 0.0);
}

TEST(Holder, LinearFieldWithUnitExponentIsOne) {
    const auto g = dirichlet_line(65);
    FieldState s(g, 1);
    for (std::size_t p = 0; p < g.points(); ++p) s.at(0, p) = g.position(p, 0);
    EXPECT_NEAR(holder_seminorm(s, 1.0, {2 * g.h(), 10 * g.h()}), 1.0, 1e-12);
}

TEST(Holder, SineAgainstExhaustiveSearchAndBound) {
    auto brute = [](const FieldState& s, double alpha, DistanceBand band) {
        const std::size_t n = s.points();
        const double h = s.grid.h();
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t di = std::min((i + n - j) % n, (j + n - i) % n);
                const double d = static_cast<double>(di) * h;
                if (d < band.lo - 1e-12 || d > band.hi + 1e-12) continue;
                best = std::max(best, std::abs(s.at(0, i) - s.at(0, j)) / std::pow(d, alpha));
            }
        return best;
    };
    for (std::size_t n : {64u, 256u}) {
        const auto g = periodic_line(n);
        FieldState s(g, 1);
        for (std::size_t p = 0; p < g.points(); ++p) s.at(0, p) = std::sin(2 * kPi * g.position(p, 0));
        const DistanceBand band{2 * g.h(), 0.25};
        const double got = holder_seminorm(s, 0.5, band, 20000, 3);
        const double exact = brute(s, 0.5, band);
        EXPECT_LE(got, 2 * kPi * std::sqrt(band.hi));
        if (n <= 64)
            EXPECT_NEAR(got, exact, 1e-14);
        else {
            EXPECT_LE(got, exact + 1e-14);
            EXPECT_GE(got, 0.95 * exact);
        }
    }
}

TEST(Holder, BandOutsideRangeIsRejected) {
    FieldState s(periodic_line(64), 1);
    EXPECT_THROW(holder_seminorm(s, 0.5, {0.5 / 64, 0.1}), ConfigError);
    EXPECT_THROW(holder_seminorm(s, 0.5, {0.05, 0.5}), ConfigError);
}

// ---------------------------------------------------------------------------
// Report plumbing

TEST(Reports, SeriesCsvHeaderNamesCheckHashAndTolerance) {
    CheckReport r;
    r.name = "demo";
    r.config_hash = "abc";
    r.tolerance = 0.5;
    r.series["x"] = {1.0, 2.0};
    r.series["y"] = {3.0};
    const auto csv = series_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "# check=demo,config_hash=abc,tolerance=0.5");
    EXPECT_NE(csv.find("index,x,y\n0,1,3\n1,2,\n"), std::string::npos);
}

TEST(Reports, StabilityReport) {
    EXPECT_TRUE(stability_report("s", 1.0, 1.05, 0.1).passed);
    EXPECT_FALSE(stability_report("s", 1.0, 1.5, 0.1).passed);
}

TEST(Reports, TrajectorySupDifferenceHonoursTransform) {
    FieldState s(periodic_line(8), 2);
    for (std::size_t p = 0; p < 8; ++p) {
        s.at(0, p) = 1.0;
        s.at(1, p) = 0.0;
    }
    FieldState t = s;
    for (std::size_t p = 0; p < 8; ++p) {
        t.at(0, p) = 0.0;
        t.at(1, p) = 1.0;
    }
    const auto a = stationary(s, 2, 0.1), b = stationary(t, 2, 0.1);
    EXPECT_NEAR(trajectory_sup_difference(a, b), 1.0, 1e-15);
    EXPECT_NEAR(trajectory_sup_difference(a, b, {0.0, -1.0, 1.0, 0.0}), 0.0, 1e-15);
}

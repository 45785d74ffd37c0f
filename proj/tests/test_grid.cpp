#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "pelab/grid.hpp"
#include "support.hpp"

using namespace pelab;
using pelab::testing::Gen;

namespace {

GridSpec line(std::size_t n, double h, Boundary b = Boundary::Periodic) { return GridSpec(1, {n}, h, b); }

FieldState scalar_field(const GridSpec& g, const std::function<double(std::size_t)>& f) {
    FieldState s(g, 1);
    for (std::size_t p = 0; p < g.points(); ++p) s.at(0, p) = f(p);
    if (!g.periodic()) s.boundary_values = {s.at(0, g.boundary_layer().front())};
    return s;
}

} // namespace

TEST(GridSpec, RejectsInvalidShapes) {
    EXPECT_THROW(GridSpec(0, {}, 0.1, Boundary::Periodic), ShapeError);
    EXPECT_THROW(GridSpec(4, {4, 4, 4, 4}, 0.1, Boundary::Periodic), ShapeError);
    EXPECT_THROW(GridSpec(1, {3}, 0.1, Boundary::Periodic), ShapeError);
    EXPECT_THROW(GridSpec(2, {8}, 0.1, Boundary::Periodic), ShapeError);
    EXPECT_THROW(GridSpec(1, {8}, 0.0, Boundary::Periodic), ShapeError);
    EXPECT_THROW(GridSpec(1, {8}, -1.0, Boundary::Dirichlet), ShapeError);
    EXPECT_THROW(GridSpec(1, {8}, std::nan(""), Boundary::Dirichlet), ShapeError);
}

TEST(GridSpec, BoundaryLayerAndInteriorPartitionDirichletGrid) {
    const GridSpec g(2, {5, 7}, 0.2, Boundary::Dirichlet);
    auto in = g.interior();
    auto bd = g.boundary_layer();
    EXPECT_EQ(in.size(), 3u * 5u);
    EXPECT_EQ(in.size() + bd.size(), g.points());
    std::vector<int> seen(g.points(), 0);
    for (auto p : in) ++seen[p];
    for (auto p : bd) ++seen[p];
    for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(GridSpec, PeriodicGridHasNoBoundaryLayer) {
    const GridSpec g(3, {4, 5, 6}, 0.1, Boundary::Periodic);
    EXPECT_TRUE(g.boundary_layer().empty());
    EXPECT_EQ(g.interior().size(), g.points());
}

TEST(GridSpec, ShiftWrapsOnPeriodicAndStopsOnDirichlet) {
    const auto p = line(8, 0.1);
    EXPECT_EQ(p.shifted(0, 0, -1), 7u);
    EXPECT_EQ(p.shifted(7, 0, 1), 0u);
    const auto d = line(8, 0.1, Boundary::Dirichlet);
    EXPECT_EQ(d.shifted(0, 0, -1), GridSpec::npos);
    EXPECT_EQ(d.shifted(6, 0, 1), 7u);
}

TEST(GridSpec, JsonRoundTrip) {
    const GridSpec g(2, {6, 9}, 0.125, Boundary::Dirichlet);
    const nlohmann::json j = g;
    EXPECT_EQ(j.get<GridSpec>(), g);
    EXPECT_EQ(j["boundary"], "dirichlet");
}

TEST(PairwiseSum, BeatsNaiveAccumulationOnManySmallTerms) {
    std::vector<double> v(1 << 20, 0.1);
    const double exact = 0.1 * static_cast<double>(v.size());
    EXPECT_NEAR(pairwise_sum(v), exact, 1e-9);
}

// ---------------------------------------------------------------------------
// laplacian

TEST(Laplacian, ConstantFieldGivesZero) {
    for (auto b : {Boundary::Periodic, Boundary::Dirichlet}) {
        const GridSpec g(2, {6, 8}, 0.3, b);
        std::vector<double> f(g.points(), 4.25);
        for (double x : laplacian(f, g)) EXPECT_EQ(x, 0.0);
    }
}

TEST(Laplacian, ExactOnQuadraticAtInteriorPoints) {
    const double h = 0.37;
    const auto g = line(11, h, Boundary::Dirichlet);
    std::vector<double> f(g.points());
    for (std::size_t p = 0; p < g.points(); ++p) f[p] = g.position(p, 0) * g.position(p, 0);
    const auto L = laplacian(f, g);
    for (std::size_t p : g.interior()) EXPECT_NEAR(L[p], 2.0, 1e-12);
    for (std::size_t p : g.boundary_layer()) EXPECT_EQ(L[p], 0.0);
}

TEST(Laplacian, PeriodicSineIsDiscreteEigenfield) {
    const std::size_t n = 128;
    const double h = 1.0 / 128.0;
    const auto g = line(n, h);
    std::vector<double> f(n);
    for (std::size_t p = 0; p < n; ++p) f[p] = std::sin(2.0 * std::numbers::pi * p * h);
    const double mu = -(4.0 / (h * h)) * std::pow(std::sin(std::numbers::pi * h), 2);
    EXPECT_NEAR(mu, -39.4705, 1e-4);
    const auto L = laplacian(f, g);
    for (std::size_t p = 0; p < n; ++p) {
        const double direct = (f[(p + 1) % n] - 2.0 * f[p] + f[(p + n - 1) % n]) / (h * h);
        EXPECT_NEAR(L[p], mu * f[p], 1e-10);
        EXPECT_NEAR(L[p], direct, 1e-10);
    }
}

TEST(Laplacian, RejectsShapeMismatchAndNonFiniteInput) {
    const auto g = line(8, 0.1);
    std::vector<double> f(7, 0.0);
    EXPECT_THROW(laplacian(f, g), ShapeError);
    std::vector<double> bad(8, 0.0);
    bad[3] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(laplacian(bad, g), NumericalError);
}

// ---------------------------------------------------------------------------
// gradient_sq

TEST(GradientSq, ConstantFieldGivesZero) {
    const GridSpec g(2, {5, 5}, 0.2, Boundary::Dirichlet);
    FieldState s(g, 2);
    for (double& v : s.values) v = 0.7;
    for (double x : gradient_sq(s)) EXPECT_EQ(x, 0.0);
}

TEST(GradientSq, LinearProfileGivesSlopeSquared) {
    const auto g = line(12, 0.1, Boundary::Dirichlet);
    const auto s = scalar_field(g, [&](std::size_t p) { return 3.0 * g.position(p, 0); });
    const auto gs = gradient_sq(s);
    for (std::size_t p : g.interior()) EXPECT_NEAR(gs[p], 9.0, 1e-12);
    // One-sided differences are also exact on linear data.
    for (std::size_t p : g.boundary_layer()) EXPECT_NEAR(gs[p], 9.0, 1e-12);
}

TEST(GradientSq, MatchesNaiveLoopOnRandomFields) {
    Gen gen(42);
    for (int trial = 0; trial < 20; ++trial) {
        const auto b = trial % 2 ? Boundary::Periodic : Boundary::Dirichlet;
        const auto g = gen.grid(b);
        const int N = static_cast<int>(gen.integer(1, 3));
        const auto vals = gen.vec(g.points() * N, -1.0, 1.0);
        const auto got = gradient_sq(vals, N, g);
        for (std::size_t p = 0; p < g.points(); ++p) {
            const auto c = g.coords(p);
            double ref = 0.0;
            for (int comp = 0; comp < N; ++comp)
                for (int a = 0; a < g.dim(); ++a) {
                    auto at = [&](long i) {
                        auto cc = c;
                        const long s = static_cast<long>(g.size(a));
                        cc[a] = static_cast<std::size_t>(((i % s) + s) % s);
                        return vals[comp * g.points() + g.flat(cc)];
                    };
                    const long i = static_cast<long>(c[a]);
                    const long last = static_cast<long>(g.size(a)) - 1;
                    double d;
                    if (g.periodic() || (i > 0 && i < last))
                        d = (at(i + 1) - at(i - 1)) / (2.0 * g.h());
                    else if (i == 0)
                        d = (at(1) - at(0)) / g.h();
                    else
                        d = (at(last) - at(last - 1)) / g.h();
                    ref += d * d;
                }
            EXPECT_NEAR(got[p], ref, 1e-14 * std::max(1.0, ref));
            EXPECT_GE(got[p], 0.0);
        }
    }
}

TEST(GradientSq, RejectsNonFiniteInput) {
    const auto g = line(8, 0.1);
    FieldState s(g, 1);
    s.values[2] = std::nan("");
    EXPECT_THROW(gradient_sq(s), NumericalError);
}

// ---------------------------------------------------------------------------
// cylinders

TEST(CylinderAverage, OnesAverageToOne) {
    const GridSpec g(2, {16, 16}, 0.1, Boundary::Periodic);
    const auto traj = pelab::testing::stationary(FieldState(g, 1), 6, 0.01);
    const SnapshotFunctional one = [&](const FieldState&) { return std::vector<double>(g.points(), 1.0); };
    EXPECT_DOUBLE_EQ(cylinder_average(traj, {g.flat({8, 8, 0}), 0.05, 0.2}, one), 1.0);
}

TEST(CylinderAverage, IndicatorGivesPointCountRatio) {
    const auto g = line(64, 0.01);
    const auto traj = pelab::testing::stationary(FieldState(g, 1), 21, 1e-3);
    const std::size_t centre = 32;
    const double R = 0.1;
    const auto ball = ball_points(g, centre, R);
    const SnapshotFunctional half = [&](const FieldState&) {
        std::vector<double> f(g.points(), 0.0);
        for (std::size_t p = 0; p <= centre; ++p) f[p] = 1.0;
        return f;
    };
    const auto times = window_snapshots(traj, 0.015, R);
    ASSERT_GE(times.size(), 2u);
    std::size_t inside = 0;
    for (std::size_t p : ball) inside += p <= centre;
    EXPECT_NEAR(cylinder_average(traj, {centre, 0.015, R}, half),
                static_cast<double>(inside) / static_cast<double>(ball.size()), 1e-15);
}

TEST(CylinderAverage, StationaryQuadraticMatchesNaiveSum) {
    const double h = 1.0 / 64.0;
    const auto g = line(64, h);
    const auto s = scalar_field(g, [&](std::size_t p) {
        const double x = g.position(p, 0) - 0.5;
        return x * x;
    });
    const auto traj = pelab::testing::stationary(s, 200, 1e-4);
    const SnapshotFunctional g2 = [](const FieldState& f) { return gradient_sq(f); };
    const auto grad = gradient_sq(s);
    for (double R : {4 * h, 8 * h}) {
        const double t0 = 0.0199;
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& snap : traj.snapshots) {
            if (!(snap.t > t0 - R * R + 1e-13 && snap.t <= t0 + 1e-13)) continue;
            for (std::size_t p = 0; p < g.points(); ++p)
                if (std::abs(g.position(p, 0) - g.position(32, 0)) <= R + 1e-12) {
                    sum += grad[p];
                    ++count;
                }
        }
        EXPECT_NEAR(cylinder_average(traj, {32, t0, R}, g2), sum / count, 1e-14 * sum / count);
        EXPECT_NEAR(cylinder_integral(traj, {32, t0, R}, g2), sum * h * 1e-4, 1e-14 * sum * h * 1e-4);
    }
}

TEST(CylinderAverage, ReportsWhichBoundFailed) {
    const auto g = line(32, 0.1);
    const auto traj = pelab::testing::stationary(FieldState(g, 1), 5, 0.01);
    const SnapshotFunctional one = [&](const FieldState&) { return std::vector<double>(g.points(), 1.0); };
    try {
        cylinder_average(traj, {16, 0.02, 0.3}, one);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("before the first snapshot"), std::string::npos);
    }
    try {
        cylinder_average(traj, {16, 0.5, 0.1}, one);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("after the last snapshot"), std::string::npos);
    }
    // A window holding a single snapshot cannot be averaged.
    EXPECT_THROW(cylinder_average(traj, {16, 0.04, 0.05}, one), DomainError);
    // Spatial ball larger than the periodic box.
    EXPECT_THROW(cylinder_average(traj, {16, 0.04, 2.0}, one), DomainError);
    // Ball leaving a Dirichlet grid.
    const auto d = line(32, 0.1, Boundary::Dirichlet);
    EXPECT_THROW(ball_points(d, 1, 0.2), DomainError);
}

TEST(BallPoints, CountsMatchEuclideanMembership) {
    const GridSpec g(2, {21, 21}, 0.1, Boundary::Periodic);
    const auto centre = g.flat({10, 10, 0});
    const auto ball = ball_points(g, centre, 0.3);
    std::size_t expected = 0;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j) expected += i * i + j * j <= 9;
    EXPECT_EQ(ball.size(), expected);
}

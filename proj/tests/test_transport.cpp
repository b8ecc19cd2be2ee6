#include <gtest/gtest.h>

#include <cmath>

#include "diffgeo/catalog.hpp"
#include "diffgeo/transport.hpp"

using namespace diffgeo;

namespace {

Vec pt2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

const double kLambda = std::exp(2.0 * kPi);

// Oracle: transport once around the latitude θ = θ0 solves a constant-
// coefficient linear system dv/ds = A v with A² = -(2π cosθ0)² Id, so the
// matrix exponential has the closed form cos(ω) Id + sin(ω)/ω A.
Mat latitude_holonomy_closed_form(double theta0) {
    double w = 2.0 * kPi * std::cos(theta0);
    Mat a(2, 2);
    a << 0.0, 2.0 * kPi * std::sin(theta0) * std::cos(theta0),
        -2.0 * kPi * std::cos(theta0) / std::sin(theta0), 0.0;
    if (std::abs(w) < 1e-14) return Mat::Identity(2, 2) + a;
    return std::cos(w) * Mat::Identity(2, 2) + (std::sin(w) / w) * a;
}

TEST(ParallelTransport, FlatConnectionLeavesVectorsUnchanged) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    ConnPtr flat = flat_connection(m);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        Curve loop = random_contractible_loop(m.atlas->chart("square"), rng);
        Vec v0 = pt2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        Vec v1 = parallel_transport(*flat, loop, v0);
        EXPECT_EQ((v1 - v0).norm(), 0.0);
    }
}

TEST(ParallelTransport, SphereLatitudeMatchesClosedForm) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    for (double theta0 : {kPi / 3.0, 1.0, 2.0}) {
        Curve loop = latitude_loop(theta0);
        Mat want = latitude_holonomy_closed_form(theta0);
        Mat got = holonomy(*conn, loop).matrix;
        EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-7) << "theta0=" << theta0;
    }
    // θ0 = π/3: rotation by 2π(1-cos θ0) = π, i.e. the antipodal map on the
    // tangent plane
    Mat h = holonomy(*conn, latitude_loop(kPi / 3.0)).matrix;
    EXPECT_LT((h + Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ParallelTransport, EquatorHolonomyIsIdentity) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    Mat h = holonomy(*conn, latitude_loop(kPi / 2.0)).matrix;
    EXPECT_LT((h - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ParallelTransport, LinearityProperty) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    Rng rng(11);
    OdeOptions opt;
    for (int i = 0; i < 10; ++i) {
        Curve loop = random_contractible_loop(m.atlas->chart("spherical"), rng);
        Vec u = pt2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        Vec w = pt2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        Vec lhs = parallel_transport(*conn, loop, (a * u + b * w).eval(), opt);
        Vec rhs = a * parallel_transport(*conn, loop, u, opt) +
                  b * parallel_transport(*conn, loop, w, opt);
        EXPECT_LT((lhs - rhs).norm(), 10.0 * opt.rtol * std::max(1.0, rhs.norm()));
    }
}

TEST(ParallelTransport, ReversalReturnsInput) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    Rng rng(13);
    OdeOptions opt;
    for (int i = 0; i < 10; ++i) {
        Curve loop = random_contractible_loop(m.atlas->chart("spherical"), rng);
        Curve back = reverse_curve(*m.atlas, loop);
        Vec v0 = pt2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        Vec v1 = parallel_transport(*conn, back, parallel_transport(*conn, loop, v0, opt), opt);
        EXPECT_LT((v1 - v0).norm(), 10.0 * opt.rtol * std::max(1.0, v0.norm()));
    }
}

TEST(ParallelTransport, MetricPreservation) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    MetricPtr bump = conformal_metric(m.metric, builtin_bump_factor(m, 0.3), "bumpy_sphere");
    Rng rng(17);
    OdeOptions opt;
    for (double t : {1.0, 0.5}) {
        MetricPtr gt = metric_interpolate(m.metric, bump, t);
        ConnPtr conn = levi_civita(gt);
        for (int i = 0; i < 8; ++i) {
            Curve loop = random_contractible_loop(m.atlas->chart("spherical"), rng);
            Vec base = m.atlas->chart("spherical").normalized(loop.base_point());
            Vec v0 = pt2(rng.uniform(-1, 1), rng.uniform(-1, 1));
            Vec v1 = parallel_transport(*conn, loop, v0, opt);
            Mat g = gt->value("spherical", base);
            double before = v0.dot(g * v0);
            double after = v1.dot(g * v1);
            EXPECT_LT(std::abs(after - before), 10.0 * opt.rtol * std::max(1.0, before));
        }
    }
}

TEST(ParallelTransport, HolonomyIsGOrthogonalAtBase) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    Curve loop = latitude_loop(1.1);
    HolonomyElement h = holonomy(*conn, loop);
    Mat g = m.metric->value(h.chart, h.base);
    EXPECT_LT((h.matrix.transpose() * g * h.matrix - g).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_GT(std::abs(h.matrix.determinant()), 1e-10);
}

TEST(TransportPair, EndpointsAndFlatCase) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    MetricPtr bumpy = conformal_metric(m.metric, builtin_bump_factor(m, 0.3), "bumpy");
    ConnPtr d = levi_civita(bumpy);
    Curve loop = bump_circle_loop("square", pt2(kPi, kPi), 1.1, 0.2, 2, 0.4);
    Vec a = pt2(0.7, -0.4);

    auto [v1, w1] = transport_pair(loop, *d, 1.0, a);
    EXPECT_LT((v1 - w1).norm(), 1e-10);

    auto [v0, w0] = transport_pair(loop, *d, 0.0, a);
    EXPECT_EQ((v0 - a).norm(), 0.0);  // zero right-hand side
    EXPECT_LT((w0 - w1).norm(), 1e-9);

    ConnPtr flat = flat_connection(m);
    auto [fv, fw] = transport_pair(loop, *flat, 0.63, a);
    EXPECT_EQ((fv - a).norm(), 0.0);
    EXPECT_EQ((fw - a).norm(), 0.0);
}

TEST(TransportPair, MatchesScaledConnectionTransport) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    MetricPtr bumpy = conformal_metric(m.metric, builtin_bump_factor(m, 0.3), "bumpy");
    ConnPtr d = levi_civita(bumpy);
    ConnPtr nabla = flat_connection(m);
    Curve loop = bump_circle_loop("square", pt2(3.0, 3.0), 1.0, 0.15, 3, 1.0);
    Vec a = pt2(1.0, 0.3);
    double t = 0.4;
    auto [v, w] = transport_pair(loop, *d, t, a);
    Vec v_conn = parallel_transport(*convex_combine(nabla, d, t), loop, a);
    Vec w_conn = parallel_transport(*d, loop, a);
    EXPECT_LT((v - v_conn).norm(), 1e-9);
    EXPECT_LT((w - w_conn).norm(), 1e-9);
}

TEST(TransportPair, Errors) {
    ChartedManifold sphere = builtin_manifold("round_sphere_2d");
    ConnPtr lc = levi_civita(sphere.metric);
    EXPECT_THROW(transport_pair(latitude_loop(1.0), *lc, 0.5, pt2(1, 0)), Error);  // non-affine

    ChartedManifold torus = builtin_manifold("flat_torus_2d");
    ConnPtr flat = flat_connection(torus);
    Curve open;
    open.segments = {line_segment("square", pt2(1, 1), pt2(2, 2))};
    open.junctions = {};
    open.closed = false;
    EXPECT_THROW(transport_pair(open, *flat, 0.5, pt2(1, 0)), Error);
}

TEST(Holonomy, FlatContractibleLoopsAreTrivial) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    ConnPtr flat = flat_connection(m);
    Rng rng(19);
    for (int i = 0; i < 100; ++i) {
        Curve loop = random_contractible_loop(m.atlas->chart("square"), rng);
        Mat h = holonomy(*flat, loop).matrix;
        EXPECT_LE((h - Mat::Identity(2, 2)).norm(), 1e-6);
    }
}

TEST(Holonomy, HopfCoreLoopIsDeckScaling) {
    // oracle: trivial in-chart transport composed with the deck jacobian
    ChartedManifold m = builtin_manifold("hopf_torus_2d");
    Curve core = radial_core_loop(*m.atlas, 1.5);
    CurveValidation cv = validate_curve(*m.atlas, core);
    EXPECT_LT(cv.max_junction_defect, 1e-10);
    EXPECT_LT(cv.max_velocity_defect, 1e-6);

    Mat h = holonomy(*m.flat_conn, core).matrix;
    EXPECT_LT((h - std::exp(-2.0 * kPi) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);

    Mat hrev = holonomy(*m.flat_conn, reverse_curve(*m.atlas, core)).matrix;
    EXPECT_LT((hrev - std::exp(2.0 * kPi) * Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LT((hrev * h - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Holonomy, CompositionIsMatrixProduct) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    Curve loop = bump_circle_loop("spherical", pt2(1.4, 2.0), 0.5, 0.2, 2, 0.3);
    Mat h = holonomy(*conn, loop).matrix;
    Mat twice = holonomy(*conn, concatenate(loop, loop)).matrix;
    EXPECT_LT((twice - h * h).cwiseAbs().maxCoeff(), 1e-7);
    Mat cancel = holonomy(*conn, concatenate(loop, reverse_curve(*m.atlas, loop))).matrix;
    EXPECT_LT((cancel - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Holonomy, ParametrizationIndependence) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    Curve loop = bump_circle_loop("spherical", pt2(1.5, 3.0), 0.6, 0.25, 3, 1.1);
    auto warp = [](double s) { return s * s; };
    auto dwarp = [](double s) { return 2.0 * s; };
    Mat a = holonomy(*conn, loop).matrix;
    Mat b = holonomy(*conn, reparametrize(loop, warp, dwarp)).matrix;
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(HolonomyMap, FlatDeformationIsTrivial) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    ConnPtr flat = flat_connection(m);
    std::vector<Curve> loops;
    Vec base = pt2(4.0, kPi);
    for (int i = 0; i < 3; ++i)
        loops.push_back(co_based_bump_loop("square", base, 0.8 + 0.2 * i, 0.1 * i, i + 1, 0.3));
    HolonomyMapReport rep = holonomy_map_experiment(flat, flat, 0.5, loops);
    EXPECT_GT(rep.well_defined.size(), 0u);
    EXPECT_LT(rep.max_well_defined_defect, 1e-10);
    EXPECT_LT(rep.max_injectivity_defect, 1e-10);
    EXPECT_LT(rep.max_homomorphism_defect, 1e-10);
}

TEST(HolonomyMap, DeformedVersusFullEvidence) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    ConnPtr nabla = flat_connection(m);
    ConnPtr d = levi_civita(conformal_metric(m.metric, builtin_bump_factor(m, 0.3), "bumpy"));
    std::vector<Curve> loops;
    Vec base = pt2(4.0, kPi);
    for (int i = 0; i < 3; ++i)
        loops.push_back(co_based_bump_loop("square", base, 0.7 + 0.25 * i, 0.08 * i, i + 1, 0.9));

    HolonomyMapReport rep = holonomy_map_experiment(nabla, d, 0.5, loops);
    // reparametrized twins guarantee coincident deformed holonomies whose full
    // counterparts must then agree
    EXPECT_GE(rep.well_defined.size(), loops.size());
    EXPECT_LT(rep.max_well_defined_defect, 1e-7);
    EXPECT_LT(rep.max_injectivity_defect, 1e-7);
    EXPECT_LT(rep.max_homomorphism_defect, 1e-7);

    HolonomyMapReport t1 = holonomy_map_experiment(nabla, d, 1.0, loops);
    for (int i = 0; i < t1.loop_count; ++i)
        EXPECT_LT((t1.h_deformed[i] - t1.h_full[i]).norm(), 1e-9);

    std::vector<Curve> bad = loops;
    bad.push_back(bump_circle_loop("square", pt2(2.0, 2.0), 0.5, 0.0, 1, 0.0));
    EXPECT_THROW(holonomy_map_experiment(nabla, d, 0.5, bad), Error);
}

TEST(Geodesic, FlatTorusReachesHorizonExactly) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    ConnPtr flat = flat_connection(m);
    Vec x0 = pt2(1.0, 2.0), v0 = pt2(0.3, 0.7);
    double horizon = 100.0;
    GeodesicRecord rec = geodesic_integrate(*flat, "square", x0, v0, horizon);
    EXPECT_EQ(rec.status, GeodesicStatus::completed_horizon);
    EXPECT_DOUBLE_EQ(rec.end_parameter, horizon);
    EXPECT_EQ(rec.max_residual, 0.0);
    const GeodesicSample& last = rec.samples.back();
    Vec expect = m.atlas->chart("square").normalized(x0 + horizon * v0);
    EXPECT_LT(m.atlas->chart("square").displacement(last.x, expect).norm(), 1e-7);
    EXPECT_EQ((last.v - v0).norm(), 0.0);
}

TEST(Geodesic, HopfInwardRadialEscapesAtUnitParameter) {
    ChartedManifold m = builtin_manifold("hopf_torus_2d");
    GeodesicRecord rec =
        geodesic_integrate(*m.flat_conn, "annulus", pt2(1.0, 0.0), pt2(-1.0, 0.0), 10.0);
    EXPECT_EQ(rec.status, GeodesicStatus::escaped);
    EXPECT_NEAR(rec.escape_parameter, 1.0, 1e-6);
    EXPECT_GT(rec.transitions, 2);
}

TEST(Geodesic, HopfOutwardRadialIsComplete) {
    // fast outward geodesic crosses the outer chart boundary and renormalizes
    ChartedManifold m = builtin_manifold("hopf_torus_2d");
    GeodesicRecord rec =
        geodesic_integrate(*m.flat_conn, "annulus", pt2(1.0, 0.0), pt2(50.0, 0.0), 300.0);
    EXPECT_EQ(rec.status, GeodesicStatus::completed_horizon);
    EXPECT_GE(rec.transitions, 1);
    EXPECT_EQ(rec.max_residual, 0.0);
}

TEST(Geodesic, SphereEquatorClosesAfterFullTurn) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    Vec x0 = pt2(kPi / 2.0, 0.0), v0 = pt2(0.0, 1.0);
    GeodesicRecord rec = geodesic_integrate(*conn, "spherical", x0, v0, 2.0 * kPi);
    EXPECT_EQ(rec.status, GeodesicStatus::completed_horizon);
    const GeodesicSample& last = rec.samples.back();
    EXPECT_LT(m.atlas->chart("spherical").displacement(last.x, x0).norm(), 1e-6);
    EXPECT_LT(rec.max_residual, 1e-8);
}

TEST(Geodesic, TiltedGreatCircleResidualIsSmall) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    OdeOptions opt;
    GeodesicRecord rec =
        geodesic_integrate(*conn, "spherical", pt2(1.2, 0.5), pt2(0.4, 0.9), 3.0, opt);
    EXPECT_EQ(rec.status, GeodesicStatus::completed_horizon);
    EXPECT_LT(rec.max_residual, 10.0 * opt.rtol);
    // metric norm of the velocity is a first integral
    Mat g0 = m.metric->value("spherical", rec.samples.front().x);
    Mat g1 = m.metric->value("spherical", rec.samples.back().x);
    double e0 = rec.samples.front().v.dot(g0 * rec.samples.front().v);
    double e1 = rec.samples.back().v.dot(g1 * rec.samples.back().v);
    EXPECT_NEAR(e1, e0, 1e-7 * e0);
}

TEST(Geodesic, ExplicitEquatorCurveHasZeroResidual) {
    // oracle for the closed-geodesic example: plug the analytic great circle
    // into the geodesic expression directly
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr conn = levi_civita(m.metric);
    for (double s : {0.0, 0.7, 2.0, 5.0}) {
        Vec c = pt2(kPi / 2.0, s);
        Vec cdot = pt2(0.0, 1.0);
        Christoffel g = conn->gamma("spherical", m.atlas->chart("spherical").normalized(c));
        Vec res = Vec::Zero(2);  // c'' = 0 along this parametrization
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) res[k] += g(k, i, j) * cdot[i] * cdot[j];
        EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Geodesic, Errors) {
    ChartedManifold m = builtin_manifold("hopf_torus_2d");
    EXPECT_THROW(geodesic_integrate(*m.flat_conn, "annulus", pt2(0.01, 0.0), pt2(1, 0), 1.0),
                 Error);  // start outside chart
    EXPECT_THROW(geodesic_integrate(*m.flat_conn, "annulus", pt2(1.5, 0.0), pt2(1, 0), 0.0),
                 Error);  // zero horizon
}

TEST(ParallelFrame, FlatTorusCertifiesGlobalFrame) {
    ChartedManifold m = builtin_manifold("flat_torus_2d");
    ConnPtr flat = flat_connection(m);
    Rng rng(29);
    std::vector<Curve> probes;
    for (int i = 0; i < 100; ++i)
        probes.push_back(random_contractible_loop(m.atlas->chart("square"), rng));
    ParallelFrameReport rep =
        build_parallel_frame(flat, "square", pt2(kPi, kPi), Mat::Identity(2, 2), probes);
    EXPECT_EQ(rep.loops_checked, 100);
    EXPECT_LE(rep.path_independence_defect, 1e-10);
    EXPECT_LE(rep.max_coeff_rate, 1e-8);
}

TEST(ParallelFrame, HopfCoreLoopObstructsGlobalization) {
    ChartedManifold m = builtin_manifold("hopf_torus_2d");
    std::vector<Curve> probes{radial_core_loop(*m.atlas, 1.5)};
    ParallelFrameReport rep = build_parallel_frame(m.flat_conn, "annulus", pt2(1.5, 0.0),
                                                   Mat::Identity(2, 2), probes);
    double expected = (std::exp(-2.0 * kPi) * Mat::Identity(2, 2) - Mat::Identity(2, 2)).norm();
    EXPECT_NEAR(rep.path_independence_defect, expected, 1e-6);
    EXPECT_GT(rep.path_independence_defect, 1e-6);  // the frame does not globalize
}

TEST(ParallelFrame, RejectsCurvedConnectionAndSingularFrame) {
    ChartedManifold m = builtin_manifold("round_sphere_2d");
    ConnPtr lc = levi_civita(m.metric);
    EXPECT_THROW(build_parallel_frame(lc, "spherical", pt2(1.5, 1.0), Mat::Identity(2, 2), {}),
                 Error);
    ChartedManifold torus = builtin_manifold("flat_torus_2d");
    EXPECT_THROW(build_parallel_frame(flat_connection(torus), "square", pt2(1, 1),
                                      Mat::Zero(2, 2), {}),
                 Error);
}

}  // namespace

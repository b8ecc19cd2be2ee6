#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diffgeo/connection.hpp"
#include "diffgeo/curve.hpp"
#include "diffgeo/manifold.hpp"

namespace diffgeo {

struct OdeOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double max_step = 1e-2;
    double min_step = 1e-12;
    double boundary_eps = 1e-9;
    int max_transitions = 1000000;
    int max_samples = 2048;
};

namespace detail {

using Rhs = std::function<Vec(double, const Vec&)>;

inline Vec rk4_step(const Rhs& f, double s, const Vec& y, double h) {
    Vec k1 = f(s, y);
    Vec k2 = f(s + 0.5 * h, y + 0.5 * h * k1);
    Vec k3 = f(s + 0.5 * h, y + 0.5 * h * k2);
    Vec k4 = f(s + h, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One step-doubled RK4 trial: full step vs two half steps, Richardson error
/// estimate, locally extrapolated result.
struct Trial {
    Vec y;
    double err;
};

inline Trial doubled_step(const Rhs& f, double s, const Vec& y, double h) {
    Vec big = rk4_step(f, s, y, h);
    Vec half = rk4_step(f, s + 0.5 * h, rk4_step(f, s, y, 0.5 * h), 0.5 * h);
    double err = (half - big).cwiseAbs().maxCoeff() / 15.0;
    return {half + (half - big) / 15.0, err};
}

inline double step_growth(double err, double tol_h) {
    if (err <= 0.0) return 5.0;
    return std::clamp(0.9 * std::pow(tol_h / err, 0.25), 0.2, 5.0);
}

/// Error-controlled integration over [s0, s1]; error per unit parameter kept
/// below atol + rtol*|y|. Used where the path cannot leave the chart.
template <typename Callback>
void integrate_adaptive(const Rhs& f, double s0, double s1, Vec& y, const OdeOptions& opt,
                        Callback&& on_accept) {
    double s = s0;
    double h = std::min(opt.max_step, s1 - s0);
    while (s < s1) {
        h = std::min(h, s1 - s);
        Trial t = doubled_step(f, s, y, h);
        double tol_h = h * (opt.atol + opt.rtol * std::max(1.0, y.cwiseAbs().maxCoeff()));
        if (t.err <= tol_h) {
            s += h;
            y = t.y;
            on_accept(s, y);
            h = std::min(opt.max_step, h * step_growth(t.err, tol_h));
        } else {
            h *= step_growth(t.err, tol_h);
            if (h < opt.min_step) throw Error("ode: step underflow without meeting tolerance");
        }
    }
}

}  // namespace detail

/// Parallel transport of v along the curve: dw^k/ds = -Γ^k_ij (dc^i/ds) w^j
/// per segment, junction transitions pushing the vector by their jacobian.
inline Vec parallel_transport(const ChristoffelField& conn, const Curve& curve, Vec v,
                              const OdeOptions& opt = {}) {
    const Atlas& atlas = *conn.atlas();
    if (curve.segments.empty()) throw Error("parallel_transport: empty curve");
    if (v.size() != atlas.dim()) throw Error("parallel_transport: vector dimension mismatch");
    size_t n_junctions = curve.junctions.size();
    for (size_t i = 0; i < curve.segments.size(); ++i) {
        const CurveSegment& seg = curve.segments[i];
        const Chart& chart = atlas.chart(seg.chart);
        if (!conn.covers(seg.chart))
            throw Error("parallel_transport: connection undefined on chart " + seg.chart);
        detail::Rhs f = [&](double s, const Vec& w) {
            Vec x = chart.normalized(seg.point(s));
            Christoffel g = conn.gamma(seg.chart, x);
            Vec xdot = seg.velocity(s);
            Vec out = Vec::Zero(w.size());
            for (int k = 0; k < w.size(); ++k) {
                double acc = 0.0;
                for (int a = 0; a < w.size(); ++a)
                    for (int b = 0; b < w.size(); ++b) acc += g(k, a, b) * xdot[a] * w[b];
                out[k] = -acc;
            }
            return out;
        };
        detail::integrate_adaptive(f, seg.s0, seg.s1, v, opt, [](double, const Vec&) {});
        if (i < n_junctions && !curve.junctions[i].empty()) {
            const TransitionMap& t = atlas.transition(curve.junctions[i]);
            Vec end = chart.normalized(seg.point(seg.s1));
            v = t.jacobian(end) * v;
        }
    }
    return v;
}

/// The two transport solutions of the convexly deformed pair: v follows the
/// t-scaled coefficients, w the full ones, both from a. Requires a closed
/// loop inside one affine chart.
inline std::pair<Vec, Vec> transport_pair(const Curve& gamma, const ChristoffelField& conn_d,
                                          double t, const Vec& a, const OdeOptions& opt = {}) {
    const Atlas& atlas = *conn_d.atlas();
    if (!gamma.closed) throw Error("transport_pair: curve is not closed");
    const std::string& chart_id = gamma.base_chart();
    const Chart& chart = atlas.chart(chart_id);
    if (chart.kind != CoordinateKind::affine)
        throw Error("transport_pair: loop must lie in an affine chart");
    for (const CurveSegment& seg : gamma.segments) {
        if (seg.chart != chart_id) throw Error("transport_pair: loop leaves the chart");
        for (int k = 0; k <= 16; ++k) {
            double s = seg.s0 + (seg.s1 - seg.s0) * k / 16.0;
            if (!chart.contains(chart.normalized(seg.point(s))))
                throw Error("transport_pair: loop leaves the chart");
        }
    }
    for (const std::string& j : gamma.junctions)
        if (!j.empty()) throw Error("transport_pair: loop must not cross transitions");

    auto transport_scaled = [&](double scale) {
        Vec w = a;
        for (const CurveSegment& seg : gamma.segments) {
            detail::Rhs f = [&](double s, const Vec& y) {
                Vec x = chart.normalized(seg.point(s));
                Christoffel g = conn_d.gamma(chart_id, x);
                Vec xdot = seg.velocity(s);
                Vec out = Vec::Zero(y.size());
                for (int k = 0; k < y.size(); ++k) {
                    double acc = 0.0;
                    for (int p = 0; p < y.size(); ++p)
                        for (int q = 0; q < y.size(); ++q) acc += g(k, p, q) * xdot[p] * y[q];
                    out[k] = -scale * acc;
                }
                return out;
            };
            detail::integrate_adaptive(f, seg.s0, seg.s1, w, opt, [](double, const Vec&) {});
        }
        return w;
    };
    if (!(t >= 0.0 && t <= 1.0)) throw Error("transport_pair: t outside [0,1]");
    return {transport_scaled(t), transport_scaled(1.0)};
}

struct HolonomyElement {
    Mat matrix;  // action on tangent vectors in the base chart's coordinate frame
    std::string chart;
    Vec base;
};

/// Transport the coordinate basis around a closed loop and assemble the
/// holonomy matrix.
inline HolonomyElement holonomy(const ChristoffelField& conn, const Curve& loop,
                                const OdeOptions& opt = {}) {
    if (!loop.closed) throw Error("holonomy: curve is not closed");
    const Atlas& atlas = *conn.atlas();
    int n = atlas.dim();
    Mat h(n, n);
    for (int j = 0; j < n; ++j) h.col(j) = parallel_transport(conn, loop, Vec::Unit(n, j), opt);
    if (std::abs(h.determinant()) <= 1e-10)
        throw Error("holonomy: transport produced a singular matrix");
    const Chart& chart = atlas.chart(loop.base_chart());
    return {h, loop.base_chart(), chart.normalized(loop.base_point())};
}

struct HolonomyMapReport {
    double t = 0.0;
    double eps = 0.0;
    int loop_count = 0;
    std::vector<Mat> h_deformed;  // holonomies of the t-deformed connection
    std::vector<Mat> h_full;      // holonomies of the undeformed connection
    struct PairDefect {
        int i, j;
        double input_gap;
        double defect;
    };
    std::vector<PairDefect> well_defined;  // close deformed pair -> full-pair gap
    std::vector<PairDefect> injectivity;   // close full pair -> deformed-pair gap
    struct ConcatDefect {
        int i, j;
        double defect_deformed;
        double defect_full;
    };
    std::vector<ConcatDefect> homomorphism;
    double max_well_defined_defect = 0.0;
    double max_injectivity_defect = 0.0;
    double max_homomorphism_defect = 0.0;
};

/// Holonomy-comparison evidence for the deformed pair (t-scaled vs full
/// coefficients): well-definedness, injectivity and homomorphism defects over
/// a family of co-based loops. A smooth reparametrization of each loop is
/// added so the pair lists are never vacuous.
inline HolonomyMapReport holonomy_map_experiment(ConnPtr conn_nabla, ConnPtr conn_d, double t,
                                                 const std::vector<Curve>& loops,
                                                 const OdeOptions& opt = {}, double eps = 1e-8,
                                                 bool add_reparametrized = true) {
    if (conn_nabla->atlas() != conn_d->atlas())
        throw Error("holonomy_map_experiment: mismatched atlases");
    if (loops.empty()) throw Error("holonomy_map_experiment: no loops");
    const Atlas& atlas = *conn_d->atlas();
    const std::string chart_id = loops.front().base_chart();
    const Chart& chart = atlas.chart(chart_id);
    Vec base = chart.normalized(loops.front().base_point());
    for (const Curve& loop : loops) {
        if (!loop.closed) throw Error("holonomy_map_experiment: open curve in loop family");
        if (loop.base_chart() != chart_id ||
            chart.displacement(chart.normalized(loop.base_point()), base).norm() > 1e-9)
            throw Error("holonomy_map_experiment: loops are not co-based");
    }

    std::vector<Curve> family = loops;
    if (add_reparametrized) {
        auto warp = [](double s) { return s * s * (3.0 - 2.0 * s); };
        auto dwarp = [](double s) { return 6.0 * s * (1.0 - s); };
        for (const Curve& loop : loops)
            if (loop.segments.size() == 1) family.push_back(reparametrize(loop, warp, dwarp));
    }

    ConnPtr deformed = convex_combine(conn_nabla, conn_d, t);
    HolonomyMapReport rep;
    rep.t = t;
    rep.eps = eps;
    rep.loop_count = static_cast<int>(family.size());
    for (const Curve& loop : family) {
        rep.h_deformed.push_back(holonomy(*deformed, loop, opt).matrix);
        rep.h_full.push_back(holonomy(*conn_d, loop, opt).matrix);
    }
    int m = rep.loop_count;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            double gap_def = (rep.h_deformed[i] - rep.h_deformed[j]).norm();
            double gap_full = (rep.h_full[i] - rep.h_full[j]).norm();
            if (gap_def <= eps) {
                rep.well_defined.push_back({i, j, gap_def, gap_full});
                rep.max_well_defined_defect = std::max(rep.max_well_defined_defect, gap_full);
            }
            if (gap_full <= eps) {
                rep.injectivity.push_back({i, j, gap_full, gap_def});
                rep.max_injectivity_defect = std::max(rep.max_injectivity_defect, gap_def);
            }
        }
    // homomorphism evidence on concatenations of single-chart loops
    int pairs = std::min(m, static_cast<int>(loops.size()));
    for (int i = 0; i < pairs; ++i)
        for (int j = 0; j < pairs; ++j) {
            if (i == j) continue;
            Curve cat = concatenate(loops[i], loops[j]);
            double d1 = (holonomy(*deformed, cat, opt).matrix -
                         rep.h_deformed[j] * rep.h_deformed[i]).norm();
            double d2 = (holonomy(*conn_d, cat, opt).matrix -
                         rep.h_full[j] * rep.h_full[i]).norm();
            rep.homomorphism.push_back({i, j, d1, d2});
            rep.max_homomorphism_defect = std::max({rep.max_homomorphism_defect, d1, d2});
        }
    return rep;
}

enum class GeodesicStatus { completed_horizon, escaped, step_underflow };

struct GeodesicSample {
    double s;
    std::string chart;
    Vec x;
    Vec v;
};

struct GeodesicRecord {
    GeodesicStatus status = GeodesicStatus::completed_horizon;
    double end_parameter = 0.0;
    double escape_parameter = 0.0;  // meaningful when escaped
    double max_residual = 0.0;      // midpoint defect |c'' + Γ(c')(c')| per accepted step
    long steps = 0;
    long transitions = 0;
    std::vector<GeodesicSample> samples;
    std::string detail;
};

namespace detail {

/// Midpoint residual of the quintic Hermite reconstruction of an accepted
/// step; an a-posteriori check that the trajectory satisfies the geodesic
/// equation between knots.
inline double hermite_midpoint_residual(const Chart& chart,
                                        const std::function<Vec(const Vec&, const Vec&)>& accel,
                                        const Vec& x0, const Vec& v0, const Vec& x1, const Vec& v1,
                                        double h) {
    Vec a0 = accel(x0, v0);
    Vec a1 = accel(x1, v1);
    Vec xm = 0.5 * (x0 + x1) + 0.15625 * h * (v0 - v1) + 0.015625 * h * h * (a0 + a1);
    Vec vm = 1.875 * (x1 - x0) / h - 0.4375 * (v0 + v1) + 0.03125 * h * (a1 - a0);
    Vec am = 1.5 * (v1 - v0) / h - 0.25 * (a0 + a1);
    Vec res = am - accel(chart.normalized(xm), vm);
    return res.cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Geodesic integration c''^k + Γ^k_ij c'^i c'^j = 0 with adaptive RK4 and
/// chart switching. A step leaving the chart is bisected to the boundary and
/// the registered transition applied; escape is declared when no transition
/// covers the exit, or when transitions fire but the affine parameter stalls
/// (the incomplete case: s converges while the trajectory renormalizes
/// forever).
inline GeodesicRecord geodesic_integrate(const ChristoffelField& conn, std::string chart_id,
                                         Vec x, Vec v, double horizon,
                                         const OdeOptions& opt = {}) {
    const Atlas& atlas = *conn.atlas();
    if (!(horizon > 0.0)) throw Error("geodesic_integrate: horizon must be positive");
    const Chart* chart = &atlas.chart(chart_id);
    x = chart->normalized(x);
    if (!chart->contains(x)) throw Error("geodesic_integrate: start outside chart");
    if (v.size() != atlas.dim()) throw Error("geodesic_integrate: velocity dimension mismatch");

    int n = atlas.dim();
    GeodesicRecord rec;
    double s = 0.0;
    double h = opt.max_step;
    int micro_steps = 0;  // consecutive accepted steps below min_step
    int sample_stride = 1;

    auto accel = [&](const Vec& pos, const Vec& vel) {
        Christoffel g = conn.gamma(chart->id, chart->normalized(pos));
        Vec out(n);
        for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) acc += g(k, i, j) * vel[i] * vel[j];
            out[k] = -acc;
        }
        return out;
    };
    detail::Rhs f = [&](double, const Vec& y) {
        Vec out(2 * n);
        out.head(n) = y.tail(n);
        out.tail(n) = accel(y.head(n), y.tail(n));
        return out;
    };
    auto push_sample = [&](double sp, const Vec& xp, const Vec& vp) {
        if (rec.steps % sample_stride != 0) return;
        rec.samples.push_back({sp, chart->id, xp, vp});
        if (static_cast<int>(rec.samples.size()) >= 2 * opt.max_samples) {
            std::vector<GeodesicSample> thin;
            for (size_t i = 0; i < rec.samples.size(); i += 2) thin.push_back(rec.samples[i]);
            rec.samples.swap(thin);
            sample_stride *= 2;
        }
    };
    push_sample(0.0, x, v);

    auto commit = [&](double h_used, const Vec& x_new, const Vec& v_new) {
        // the 1/h factors in the Hermite reconstruction amplify roundoff on
        // sub-microscopic steps; those steps are exact to working precision
        if (h_used > 1e-5)
            rec.max_residual = std::max(rec.max_residual,
                                        detail::hermite_midpoint_residual(*chart, accel, x, v,
                                                                          x_new, v_new, h_used));
        s += h_used;
        x = chart->normalized(x_new);
        v = v_new;
        ++rec.steps;
        micro_steps = (h_used < opt.min_step) ? micro_steps + 1 : 0;
        push_sample(s, x, v);
    };

    while (s < horizon - 1e-14 * std::max(1.0, std::abs(s))) {
        if (micro_steps > 50) {
            // the affine parameter has converged while the trajectory keeps
            // renormalizing: numerical evidence of geodesic incompleteness
            rec.status = rec.transitions > 0 ? GeodesicStatus::escaped
                                             : GeodesicStatus::step_underflow;
            rec.end_parameter = s;
            rec.escape_parameter = s;
            rec.detail = "affine parameter stalled below minimum step";
            return rec;
        }
        double h_try = std::min(h, horizon - s);
        if (chart->safe_step) {
            double cap = 0.5 * chart->safe_step(x) / std::max(v.norm(), 1e-300);
            h_try = std::min(h_try, cap);
        }
        Vec y(2 * n);
        y << x, v;
        detail::Trial trial = detail::doubled_step(f, s, y, h_try);
        double tol_h = h_try * (opt.atol + opt.rtol * std::max(1.0, y.cwiseAbs().maxCoeff()));
        if (trial.err > tol_h) {
            h = h_try * detail::step_growth(trial.err, tol_h);
            if (h < opt.min_step) {
                rec.status = GeodesicStatus::step_underflow;
                rec.end_parameter = s;
                rec.detail = "tolerance not met above minimum step";
                return rec;
            }
            continue;
        }
        Vec x_new = trial.y.head(n);
        if (chart->contains(x_new)) {
            commit(h_try, x_new, trial.y.tail(n));
            h = std::min(opt.max_step, h_try * detail::step_growth(trial.err, tol_h));
            continue;
        }

        // bisect the step fraction to the chart boundary
        double lo = 0.0, hi = 1.0;
        Vec y_lo = y;
        for (int it = 0;
             it < 200 && hi - lo > 1e-15 &&
             (hi - lo) * h_try * std::max(1.0, v.norm()) > opt.boundary_eps;
             ++it) {
            double mid = 0.5 * (lo + hi);
            detail::Trial sub = detail::doubled_step(f, s, y, mid * h_try);
            if (chart->contains(sub.y.head(n))) {
                lo = mid;
                y_lo = sub.y;
            } else {
                hi = mid;
            }
        }
        double h_sub = lo * h_try;
        if (h_sub > 0.0) commit(h_sub, y_lo.head(n), y_lo.tail(n));
        else micro_steps += 1;  // pinned at the boundary

        const TransitionMap* t = atlas.transition_at(chart->id, x);
        if (!t) {
            rec.status = GeodesicStatus::escaped;
            rec.end_parameter = s;
            rec.escape_parameter = s;
            rec.detail = "no transition covers the exit near chart boundary";
            return rec;
        }
        const Chart& target = atlas.chart(t->to);
        Vec moved = target.normalized(t->forward(x));
        Vec pushed = t->jacobian(x) * v;
        if (!target.contains(moved)) {
            rec.status = GeodesicStatus::escaped;
            rec.end_parameter = s;
            rec.escape_parameter = s;
            rec.detail = "transition image left chart '" + t->to + "'";
            return rec;
        }
        chart = &target;
        x = moved;
        v = pushed;
        ++rec.transitions;
        if (rec.transitions > opt.max_transitions)
            throw Error("geodesic_integrate: transition budget exhausted");
    }
    rec.status = GeodesicStatus::completed_horizon;
    rec.end_parameter = s;
    return rec;
}

struct ParallelFrameReport {
    double path_independence_defect = 0.0;  // max over probe loops of |H - Id|_F
    int loops_checked = 0;
    double max_coeff_rate = 0.0;  // max |a_k'(s)| along the probe geodesic
};

/// Certify a global parallel frame numerically: transport frame0 from the
/// base along canonical axis-ordered paths, measure holonomy defects over the
/// probe loops, and check that geodesic velocity coefficients in the
/// transported frame stay constant.
inline ParallelFrameReport build_parallel_frame(ConnPtr conn, const std::string& chart_id,
                                                const Vec& base, const Mat& frame0,
                                                const std::vector<Curve>& probe_loops,
                                                const OdeOptions& opt = {},
                                                double flatness_tol = 1e-8) {
    const Atlas& atlas = *conn->atlas();
    const Chart& chart = atlas.chart(chart_id);
    int n = atlas.dim();
    if (std::abs(frame0.determinant()) < 1e-12)
        throw Error("build_parallel_frame: frame is singular");

    Rng rng(101);
    for (const Chart& c : atlas.charts()) {
        if (!conn->covers(c.id)) continue;
        for (int i = 0; i < 25; ++i) {
            Vec p = atlas.sample_point(c, rng, 0.05);
            if (riemann_tensor(*conn, c.id, p).max_abs() > flatness_tol)
                throw Error("build_parallel_frame: connection is not flat at samples");
        }
    }

    // canonical path from base to p: one axis at a time, shortest wrap
    auto frame_at = [&](const Vec& p) {
        Mat frame = frame0;
        Vec from = base;
        Vec delta = chart.displacement(p, base);
        for (int axis = 0; axis < n; ++axis) {
            if (delta[axis] == 0.0) continue;
            Vec to = from;
            to[axis] += delta[axis];
            Curve leg;
            leg.segments = {line_segment(chart_id, from, to)};
            leg.junctions = {};
            for (int col = 0; col < n; ++col)
                frame.col(col) = parallel_transport(*conn, leg, frame.col(col), opt);
            from = to;
        }
        return frame;
    };

    ParallelFrameReport rep;
    for (const Curve& loop : probe_loops) {
        Mat h = holonomy(*conn, loop, opt).matrix;
        rep.path_independence_defect =
            std::max(rep.path_independence_defect, (h - Mat::Identity(n, n)).norm());
        ++rep.loops_checked;
    }

    // geodesic coefficient constancy: a(s) = E(c(s))^{-1} c'(s)
    Vec v0 = frame0 * Vec::Ones(n) * (0.37 + 0.13 / n);
    double span = 0.0;
    for (int i = 0; i < n; ++i) span = std::max(span, chart.domain[i].length());
    OdeOptions gopt = opt;
    gopt.max_samples = 256;
    GeodesicRecord rec = geodesic_integrate(*conn, chart_id, base, v0, 3.0 * span, gopt);
    std::vector<Vec> coeffs;
    std::vector<double> params;
    for (const GeodesicSample& sample : rec.samples) {
        if (sample.chart != chart_id) continue;
        Mat e = frame_at(sample.x);
        coeffs.push_back(e.colPivHouseholderQr().solve(sample.v));
        params.push_back(sample.s);
    }
    for (size_t i = 1; i < coeffs.size(); ++i) {
        double ds = params[i] - params[i - 1];
        if (ds <= 0.0) continue;
        rep.max_coeff_rate =
            std::max(rep.max_coeff_rate, (coeffs[i] - coeffs[i - 1]).cwiseAbs().maxCoeff() / ds);
    }
    return rep;
}

}  // namespace diffgeo

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diffgeo/atlas.hpp"

namespace diffgeo {

struct CurveSegment {
    std::string chart;
    double s0 = 0.0;
    double s1 = 1.0;
    std::function<Vec(double)> point;
    std::function<Vec(double)> velocity;
};

/// Piecewise-smooth curve. junctions[i] names the transition applied after
/// segment i ("" = none); closed curves carry a final junction back to the
/// first segment.
struct Curve {
    std::vector<CurveSegment> segments;
    std::vector<std::string> junctions;
    bool closed = false;

    const std::string& base_chart() const { return segments.front().chart; }
    Vec base_point() const { return segments.front().point(segments.front().s0); }
};

inline CurveSegment line_segment(std::string chart, const Vec& a, const Vec& b) {
    Vec d = b - a;
    return {std::move(chart), 0.0, 1.0, [a, d](double s) { return (a + s * d).eval(); },
            [d](double) { return d; }};
}

/// Axis-aligned rectangle traversed counterclockwise from `corner`.
inline Curve rectangle_loop(const std::string& chart, const Vec& corner, double w, double h) {
    Vec a = corner, b = corner, c = corner, d = corner;
    b[0] += w;
    c[0] += w;
    c[1] += h;
    d[1] += h;
    Curve loop;
    loop.segments = {line_segment(chart, a, b), line_segment(chart, b, c),
                     line_segment(chart, c, d), line_segment(chart, d, a)};
    loop.junctions = {"", "", "", ""};
    loop.closed = true;
    return loop;
}

/// Smooth closed loop: circle of radius r around `center`, modulated by a
/// sinusoidal bump amp·sin(k·angle + phase).
inline Curve bump_circle_loop(const std::string& chart, const Vec& center, double r, double amp,
                              int k, double phase) {
    auto radius = [r, amp, k, phase](double a) { return r * (1.0 + amp * std::sin(k * a + phase)); };
    auto dradius = [r, amp, k, phase](double a) { return r * amp * k * std::cos(k * a + phase); };
    CurveSegment seg;
    seg.chart = chart;
    seg.point = [center, radius](double s) {
        double a = 2.0 * kPi * s;
        Vec p = center;
        p[0] += radius(a) * std::cos(a);
        p[1] += radius(a) * std::sin(a);
        return p;
    };
    seg.velocity = [radius, dradius](double s) {
        double a = 2.0 * kPi * s;
        Vec v(2);
        v[0] = 2.0 * kPi * (dradius(a) * std::cos(a) - radius(a) * std::sin(a));
        v[1] = 2.0 * kPi * (dradius(a) * std::sin(a) + radius(a) * std::cos(a));
        return v;
    };
    Curve loop;
    loop.segments = {seg};
    loop.junctions = {""};
    loop.closed = true;
    return loop;
}

/// Bump circle shifted so the loop starts (and is based) at `base`.
inline Curve co_based_bump_loop(const std::string& chart, const Vec& base, double r, double amp,
                                int k, double phase) {
    Vec center = base;
    center[0] -= r * (1.0 + amp * std::sin(phase));
    return bump_circle_loop(chart, center, r, amp, k, phase);
}

/// Latitude circle θ = θ0 on the spherical chart, traversed once in φ.
inline Curve latitude_loop(double theta0, const std::string& chart = "spherical") {
    CurveSegment seg;
    seg.chart = chart;
    seg.point = [theta0](double s) {
        Vec p(2);
        p << theta0, 2.0 * kPi * s;
        return p;
    };
    seg.velocity = [](double) {
        Vec v(2);
        v << 0.0, 2.0 * kPi;
        return v;
    };
    Curve loop;
    loop.segments = {seg};
    loop.junctions = {""};
    loop.closed = true;
    return loop;
}

/// Radial loop on a Hopf annulus chart: from (r0, 0) out to (lambda*r0, 0),
/// closed by the deck rescaling. Crosses the deck transition exactly once.
inline Curve radial_core_loop(const Atlas& atlas, double r0) {
    if (!atlas.deck()) throw Error("radial_core_loop: atlas has no deck group");
    double lambda = atlas.deck()->lambda;
    const Chart& ann = atlas.chart("annulus");
    Vec a = Vec::Zero(ann.dim), b = Vec::Zero(ann.dim);
    a[0] = r0;
    b[0] = lambda * r0;
    if (!ann.contains(a) || !ann.contains(b))
        throw Error("radial_core_loop: base radius leaves the annulus chart");
    Curve loop;
    loop.segments = {line_segment("annulus", a, b)};
    loop.junctions = {"deck_down"};
    loop.closed = true;
    return loop;
}

/// Concatenation a then b; both must be closed and co-based.
inline Curve concatenate(const Curve& a, const Curve& b) {
    if (!a.closed || !b.closed) throw Error("concatenate: both curves must be closed loops");
    Curve out;
    out.segments = a.segments;
    out.segments.insert(out.segments.end(), b.segments.begin(), b.segments.end());
    // a's closing junction now leads into b; b's closing junction closes the loop
    out.junctions = a.junctions;
    out.junctions.insert(out.junctions.end(), b.junctions.begin(), b.junctions.end());
    out.closed = true;
    return out;
}

/// Orientation reversal; junction transitions are replaced by their inverses.
inline Curve reverse_curve(const Atlas& atlas, const Curve& c) {
    auto inverse_of = [&atlas](const std::string& id) -> std::string {
        if (id.empty()) return "";
        const TransitionMap& t = atlas.transition(id);
        if (t.inverse_id.empty())
            throw Error("reverse_curve: transition " + id + " has no registered inverse");
        return t.inverse_id;
    };
    size_t n = c.segments.size();
    Curve out;
    out.closed = c.closed;
    for (size_t k = 0; k < n; ++k) {
        const CurveSegment& seg = c.segments[n - 1 - k];
        CurveSegment rev;
        rev.chart = seg.chart;
        rev.s0 = seg.s0;
        rev.s1 = seg.s1;
        double lo = seg.s0, hi = seg.s1;
        auto p = seg.point;
        auto v = seg.velocity;
        rev.point = [p, lo, hi](double s) { return p(lo + hi - s); };
        rev.velocity = [v, lo, hi](double s) { return (-v(lo + hi - s)).eval(); };
        out.segments.push_back(std::move(rev));
    }
    if (c.closed) {
        for (size_t k = 0; k + 1 < n; ++k)
            out.junctions.push_back(inverse_of(c.junctions[n - 2 - k]));
        out.junctions.push_back(inverse_of(c.junctions[n - 1]));
    } else {
        for (size_t k = 0; k + 1 < n; ++k)
            out.junctions.push_back(inverse_of(c.junctions[n - 2 - k]));
    }
    return out;
}

/// Smooth reparametrization of a single-segment curve on [0,1].
inline Curve reparametrize(const Curve& c, std::function<double(double)> warp,
                           std::function<double(double)> dwarp) {
    if (c.segments.size() != 1 || c.segments[0].s0 != 0.0 || c.segments[0].s1 != 1.0)
        throw Error("reparametrize: expects a single segment on [0,1]");
    Curve out = c;
    auto p = c.segments[0].point;
    auto v = c.segments[0].velocity;
    out.segments[0].point = [p, warp](double s) { return p(warp(s)); };
    out.segments[0].velocity = [v, warp, dwarp](double s) { return (dwarp(s) * v(warp(s))).eval(); };
    return out;
}

/// Seeded smooth contractible loop inside the chart box.
inline Curve random_contractible_loop(const Chart& chart, Rng& rng, double margin = 0.08) {
    Vec center(chart.dim);
    double max_r = 1e300;
    for (int i = 0; i < chart.dim; ++i) {
        double pad = margin * chart.domain[i].length();
        center[i] = rng.uniform(chart.domain[i].lo + 3.0 * pad, chart.domain[i].hi - 3.0 * pad);
        max_r = std::min({max_r, center[i] - chart.domain[i].lo - pad,
                          chart.domain[i].hi - pad - center[i]});
    }
    double amp = rng.uniform(0.0, 0.35);
    double r = rng.uniform(0.3, 0.9) * max_r / (1.0 + amp);
    int k = rng.uniform_int(1, 4);
    double phase = rng.uniform(0.0, 2.0 * kPi);
    return bump_circle_loop(chart.id, center, r, amp, k, phase);
}

struct CurveValidation {
    double max_junction_defect = 0.0;
    double max_velocity_defect = 0.0;  // relative to velocity scale
};

/// Junction continuity (through declared transitions, wrap-aware) and
/// velocity-vs-path finite difference agreement.
inline CurveValidation validate_curve(const Atlas& atlas, const Curve& c,
                                      int velocity_samples = 32, double fd_step = 1e-6) {
    CurveValidation out;
    size_t n = c.segments.size();
    if (n == 0) throw Error("validate_curve: empty curve");
    if (c.junctions.size() != (c.closed ? n : n - 1))
        throw Error("validate_curve: junction list has wrong arity");

    for (size_t i = 0; i < c.junctions.size(); ++i) {
        const CurveSegment& seg = c.segments[i];
        const CurveSegment& next = c.segments[(i + 1) % n];
        const Chart& end_chart = atlas.chart(seg.chart);
        Vec end = end_chart.normalized(seg.point(seg.s1));
        std::string chart_after = seg.chart;
        if (!c.junctions[i].empty()) {
            const TransitionMap& t = atlas.transition(c.junctions[i]);
            if (t.from != seg.chart)
                throw Error("validate_curve: junction transition leaves wrong chart");
            end = transition_point(atlas, t, end);
            chart_after = t.to;
        }
        if (chart_after != next.chart)
            throw Error("validate_curve: segments change chart without a transition");
        const Chart& target = atlas.chart(next.chart);
        Vec start = target.normalized(next.point(next.s0));
        double defect = target.displacement(end, start).norm();
        out.max_junction_defect = std::max(out.max_junction_defect, defect);
    }

    for (const CurveSegment& seg : c.segments) {
        for (int k = 1; k < velocity_samples; ++k) {
            double s = seg.s0 + (seg.s1 - seg.s0) * k / velocity_samples;
            Vec v = seg.velocity(s);
            Vec fd = (seg.point(s + fd_step) - seg.point(s - fd_step)) / (2.0 * fd_step);
            double scale = std::max(1.0, v.norm());
            out.max_velocity_defect = std::max(out.max_velocity_defect, (fd - v).norm() / scale);
        }
    }
    return out;
}

}  // namespace diffgeo

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diffgeo/core.hpp"

namespace diffgeo {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    bool periodic = false;
    double length() const { return hi - lo; }
};

enum class CoordinateKind { affine, general };

/// One coordinate chart: an open axis-aligned box (periodic axes identify
/// lo with hi) plus an optional extra membership predicate for domains that
/// are not boxes, e.g. an annulus in Cartesian coordinates.
struct Chart {
    std::string id;
    int dim = 0;
    std::vector<Interval> domain;
    std::vector<std::string> coords;
    CoordinateKind kind = CoordinateKind::general;
    int orientation = +1;
    std::function<bool(const Vec&)> membership;  // optional, checked after the box
    // optional: largest coordinate displacement from x below which a straight
    // step cannot leave and re-enter the domain undetected (guards integration
    // against skipping over holes in non-convex domains)
    std::function<double(const Vec&)> safe_step;

    bool in_box(const Vec& x) const {
        for (int i = 0; i < dim; ++i) {
            if (domain[i].periodic) continue;
            if (!(x[i] > domain[i].lo && x[i] < domain[i].hi)) return false;
        }
        return true;
    }
    bool contains(const Vec& x) const {
        if (static_cast<int>(x.size()) != dim) return false;
        if (!in_box(x)) return false;
        return !membership || membership(x);
    }
    /// Wrap periodic axes into [lo, hi).
    Vec normalized(Vec x) const {
        for (int i = 0; i < dim; ++i) {
            if (!domain[i].periodic) continue;
            double L = domain[i].length();
            double y = std::fmod(x[i] - domain[i].lo, L);
            if (y < 0) y += L;
            x[i] = domain[i].lo + y;
        }
        return x;
    }
    /// Smallest coordinate displacement a-b respecting periodic wrap.
    Vec displacement(const Vec& a, const Vec& b) const {
        Vec d = a - b;
        for (int i = 0; i < dim; ++i) {
            if (!domain[i].periodic) continue;
            double L = domain[i].length();
            d[i] = std::remainder(d[i], L);
        }
        return d;
    }

    void validate() const {
        if (dim <= 0) throw Error("chart '" + id + "': dimension must be positive");
        if (static_cast<int>(domain.size()) != dim || static_cast<int>(coords.size()) != dim)
            throw Error("chart '" + id + "': domain/coords arity mismatch");
        for (const Interval& iv : domain) {
            if (!(iv.hi > iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
                throw Error("chart '" + id + "': empty or non-finite interval");
        }
        if (orientation != 1 && orientation != -1)
            throw Error("chart '" + id + "': orientation must be +1 or -1");
    }
};

struct TransitionMap {
    std::string id;
    std::string from;
    std::string to;
    std::function<bool(const Vec&)> overlap_test;  // on source coordinates
    std::function<Vec(const Vec&)> forward;
    std::function<Mat(const Vec&)> jacobian;
    std::string inverse_id;  // empty when no inverse is registered
};

/// Cyclic deck group generated by x -> lambda x on the punctured space,
/// with fundamental annulus radii (inner, lambda*inner).
struct DeckGroup {
    double lambda = 0.0;
    double inner_radius = 1.0;

    double outer_radius() const { return lambda * inner_radius; }
    Mat generator(int ambient_dim) const {
        return lambda * Mat::Identity(ambient_dim, ambient_dim);
    }
    void validate() const {
        if (!(lambda > 1.0)) throw Error("deck group: scaling factor must exceed 1");
        if (!(inner_radius > 0.0)) throw Error("deck group: inner radius must be positive");
    }
};

struct QuadraturePiece {
    std::string chart;
    std::function<double(const Vec&)> weight;  // nonnegative; sums to 1 on overlaps
    std::vector<int> resolution;               // grid points per axis
};

struct QuadratureCover {
    std::vector<QuadraturePiece> pieces;
};

/// A chart complex: charts, transitions, optional quadrature cover, optional
/// deck group. Immutable once built; evaluators must be pure.
class Atlas {
public:
    Atlas(std::string name, std::vector<Chart> charts, std::vector<TransitionMap> transitions,
          std::optional<QuadratureCover> cover = {}, std::optional<DeckGroup> deck = {})
        : name_(std::move(name)),
          charts_(std::move(charts)),
          transitions_(std::move(transitions)),
          cover_(std::move(cover)),
          deck_(std::move(deck)) {
        if (charts_.empty()) throw Error("atlas '" + name_ + "': needs at least one chart");
        dim_ = charts_.front().dim;
        for (const Chart& c : charts_) {
            c.validate();
            if (c.dim != dim_) throw Error("atlas '" + name_ + "': charts of mixed dimension");
            if (index_.count(c.id)) throw Error("atlas '" + name_ + "': duplicate chart id " + c.id);
            index_[c.id] = &c - charts_.data();
        }
        for (const TransitionMap& t : transitions_) {
            if (!index_.count(t.from) || !index_.count(t.to))
                throw Error("atlas '" + name_ + "': transition " + t.id + " references unknown chart");
        }
        if (deck_) deck_->validate();
    }

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    const std::vector<Chart>& charts() const { return charts_; }
    const std::vector<TransitionMap>& transitions() const { return transitions_; }
    const std::optional<QuadratureCover>& cover() const { return cover_; }
    const std::optional<DeckGroup>& deck() const { return deck_; }

    bool has_chart(const std::string& id) const { return index_.count(id) != 0; }
    const Chart& chart(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw Error("atlas '" + name_ + "': no chart '" + id + "'");
        return charts_[it->second];
    }
    const TransitionMap& transition(const std::string& id) const {
        for (const TransitionMap& t : transitions_)
            if (t.id == id) return t;
        throw Error("atlas '" + name_ + "': no transition '" + id + "'");
    }
    /// First registered transition leaving `chart` whose overlap covers x.
    const TransitionMap* transition_at(const std::string& chart_id, const Vec& x) const {
        for (const TransitionMap& t : transitions_)
            if (t.from == chart_id && t.overlap_test && t.overlap_test(x)) return &t;
        return nullptr;
    }
    bool all_affine() const {
        return std::all_of(charts_.begin(), charts_.end(),
                           [](const Chart& c) { return c.kind == CoordinateKind::affine; });
    }

    /// Uniform sample in the chart box shrunk by `margin` per axis (fraction of
    /// the axis length), rejecting points outside the membership predicate.
    Vec sample_point(const Chart& c, Rng& rng, double margin = 0.02) const {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Vec x(c.dim);
            for (int i = 0; i < c.dim; ++i) {
                double pad = margin * c.domain[i].length();
                x[i] = rng.uniform(c.domain[i].lo + pad, c.domain[i].hi - pad);
            }
            if (c.contains(x)) return x;
        }
        throw Error("atlas '" + name_ + "': sampling failed in chart '" + c.id + "'");
    }

private:
    std::string name_;
    int dim_ = 0;
    std::vector<Chart> charts_;
    std::vector<TransitionMap> transitions_;
    std::optional<QuadratureCover> cover_;
    std::optional<DeckGroup> deck_;
    std::map<std::string, size_t> index_;
};

using AtlasPtr = std::shared_ptr<const Atlas>;

/// Apply a transition to a point. Fails when the point is outside the
/// registered overlap or the image misses the target chart.
inline Vec transition_point(const Atlas& atlas, const TransitionMap& map, const Vec& x) {
    if (map.overlap_test && !map.overlap_test(x))
        throw Error("transition " + map.id + ": point outside overlap");
    Vec y = map.forward(x);
    const Chart& target = atlas.chart(map.to);
    y = target.normalized(y);
    if (!target.contains(y))
        throw Error("transition " + map.id + ": image left chart '" + map.to + "'");
    return y;
}

/// Covering projection of the punctured space onto the sphere times circle:
/// x -> (x/|x|, log|x| mod 2*pi). Equivariant under x -> e^{2*pi} x.
inline std::pair<Vec, double> hopf_covering_point(const Vec& x) {
    double r = x.norm();
    if (!(r > 0.0)) throw Error("hopf_covering_point: zero vector");
    double angle = std::fmod(std::log(r), 2.0 * kPi);
    if (angle < 0) angle += 2.0 * kPi;
    return {x / r, angle};
}

/// Max over the given overlap points of |jacobian - central difference of
/// forward|, relative to the jacobian scale. Diagnostic for TransitionMap.
inline double transition_jacobian_defect(const Atlas& atlas, const TransitionMap& map,
                                         std::span<const Vec> points, double step = 1e-6) {
    const Chart& src = atlas.chart(map.from);
    const Chart& dst = atlas.chart(map.to);
    double worst = 0.0;
    int found = 0;
    for (const Vec& x : points) {
        if (map.overlap_test && !map.overlap_test(x)) continue;
        ++found;
        Mat jac = map.jacobian(x);
        double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
        for (int j = 0; j < src.dim; ++j) {
            Vec xp = x, xm = x;
            xp[j] += step;
            xm[j] -= step;
            // wrap-aware difference, so periodic targets do not fake a jump
            Vec col = dst.displacement(map.forward(xp), map.forward(xm)) / (2.0 * step);
            worst = std::max(worst, (col - jac.col(j)).cwiseAbs().maxCoeff() / scale);
        }
    }
    if (found == 0) throw Error("transition " + map.id + ": no overlap points sampled");
    return worst;
}

/// Convenience overload sampling overlap points uniformly in the source box.
inline double transition_jacobian_defect(const Atlas& atlas, const TransitionMap& map, Rng& rng,
                                         int samples = 1000, double step = 1e-6) {
    const Chart& src = atlas.chart(map.from);
    std::vector<Vec> pts;
    for (int s = 0; s < samples * 20 && static_cast<int>(pts.size()) < samples; ++s) {
        Vec x = atlas.sample_point(src, rng);
        if (map.overlap_test && !map.overlap_test(x)) continue;
        pts.push_back(std::move(x));
    }
    return transition_jacobian_defect(atlas, map, pts, step);
}

}  // namespace diffgeo

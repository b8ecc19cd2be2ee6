#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "diffgeo/atlas.hpp"
#include "diffgeo/core.hpp"

namespace diffgeo {

struct Provenance {
    enum class Kind { flat_affine, levi_civita, convex_combination, analytic, interpolated, custom };
    Kind kind = Kind::custom;
    double t = 0.0;     // convex_combination / interpolated parameter
    std::string a, b;   // referenced field ids

    std::string describe() const {
        switch (kind) {
            case Kind::flat_affine: return "flat_affine";
            case Kind::levi_civita: return "levi_civita(" + a + ")";
            case Kind::convex_combination:
                return "convex_combination(t=" + std::to_string(t) + ", " + a + ", " + b + ")";
            case Kind::analytic: return "analytic";
            case Kind::interpolated:
                return "interpolated(t=" + std::to_string(t) + ", " + a + ", " + b + ")";
            default: return "custom";
        }
    }
};

/// Symmetric positive definite metric g_ij as a per-chart evaluator, with
/// optional analytic first and second derivatives. Missing derivatives fall
/// back to central differences of the value.
class MetricField {
public:
    struct ChartFns {
        std::function<Mat(const Vec&)> value;
        std::function<Mat(const Vec&, int)> d1;       // ∂_k g, optional
        std::function<Mat(const Vec&, int, int)> d2;  // ∂_k ∂_l g, optional
    };

    MetricField(AtlasPtr atlas, std::string id, std::map<std::string, ChartFns> per_chart,
                Provenance provenance, double fd_step = 1e-5)
        : atlas_(std::move(atlas)),
          id_(std::move(id)),
          per_chart_(std::move(per_chart)),
          provenance_(provenance),
          fd_step_(fd_step) {
        for (const auto& [cid, fns] : per_chart_) {
            if (!atlas_->has_chart(cid)) throw Error("metric '" + id_ + "': unknown chart " + cid);
            if (!fns.value) throw Error("metric '" + id_ + "': chart " + cid + " has no evaluator");
        }
    }

    const AtlasPtr& atlas() const { return atlas_; }
    const std::string& id() const { return id_; }
    const Provenance& provenance() const { return provenance_; }
    double fd_step() const { return fd_step_; }
    bool covers(const std::string& chart) const { return per_chart_.count(chart) != 0; }

    Mat value(const std::string& chart, const Vec& x) const { return fns(chart).value(x); }

    Mat d1(const std::string& chart, const Vec& x, int k) const {
        const ChartFns& f = fns(chart);
        if (f.d1) return f.d1(x, k);
        Vec xp = x, xm = x;
        xp[k] += fd_step_;
        xm[k] -= fd_step_;
        return (f.value(xp) - f.value(xm)) / (2.0 * fd_step_);
    }

    Mat d2(const std::string& chart, const Vec& x, int k, int l) const {
        const ChartFns& f = fns(chart);
        if (f.d2) return f.d2(x, k, l);
        Vec xp = x, xm = x;
        xp[l] += fd_step_;
        xm[l] -= fd_step_;
        return (d1(chart, xp, k) - d1(chart, xm, k)) / (2.0 * fd_step_);
    }

private:
    const ChartFns& fns(const std::string& chart) const {
        auto it = per_chart_.find(chart);
        if (it == per_chart_.end())
            throw Error("metric '" + id_ + "': not defined on chart '" + chart + "'");
        return it->second;
    }

    AtlasPtr atlas_;
    std::string id_;
    std::map<std::string, ChartFns> per_chart_;
    Provenance provenance_;
    double fd_step_;
};

using MetricPtr = std::shared_ptr<const MetricField>;

/// Christoffel coefficients Γ^k_ij as a per-chart evaluator, with optional
/// analytic partial derivatives ∂_m Γ.
class ChristoffelField {
public:
    struct ChartFns {
        std::function<Christoffel(const Vec&)> value;
        std::function<Christoffel(const Vec&, int)> d1;  // ∂_m Γ, optional
    };

    ChristoffelField(AtlasPtr atlas, std::string id, std::map<std::string, ChartFns> per_chart,
                     bool symmetric, Provenance provenance, double fd_step = 1e-5)
        : atlas_(std::move(atlas)),
          id_(std::move(id)),
          per_chart_(std::move(per_chart)),
          symmetric_(symmetric),
          provenance_(provenance),
          fd_step_(fd_step) {
        for (const auto& [cid, fns] : per_chart_) {
            if (!atlas_->has_chart(cid))
                throw Error("connection '" + id_ + "': unknown chart " + cid);
            if (!fns.value) throw Error("connection '" + id_ + "': chart " + cid + " lacks evaluator");
        }
    }

    const AtlasPtr& atlas() const { return atlas_; }
    const std::string& id() const { return id_; }
    bool symmetric() const { return symmetric_; }
    const Provenance& provenance() const { return provenance_; }
    bool covers(const std::string& chart) const { return per_chart_.count(chart) != 0; }

    Christoffel gamma(const std::string& chart, const Vec& x) const { return fns(chart).value(x); }

    Christoffel dgamma(const std::string& chart, const Vec& x, int m) const {
        const ChartFns& f = fns(chart);
        if (f.d1) return f.d1(x, m);
        Vec xp = x, xm = x;
        xp[m] += fd_step_;
        xm[m] -= fd_step_;
        Christoffel d = f.value(xp);
        Christoffel lo = f.value(xm);
        d += -1.0 * lo;
        d *= 1.0 / (2.0 * fd_step_);
        return d;
    }

    /// All-zero coefficients in every chart; the flat field of an affine atlas.
    static std::shared_ptr<const ChristoffelField> zero(AtlasPtr atlas, std::string id) {
        std::map<std::string, ChartFns> fns;
        int n = atlas->dim();
        for (const Chart& c : atlas->charts()) {
            fns[c.id] = ChartFns{[n](const Vec&) { return Christoffel(n); },
                                 [n](const Vec&, int) { return Christoffel(n); }};
        }
        return std::make_shared<ChristoffelField>(std::move(atlas), std::move(id), std::move(fns),
                                                  true, Provenance{Provenance::Kind::flat_affine});
    }

private:
    const ChartFns& fns(const std::string& chart) const {
        auto it = per_chart_.find(chart);
        if (it == per_chart_.end())
            throw Error("connection '" + id_ + "': not defined on chart '" + chart + "'");
        return it->second;
    }

    AtlasPtr atlas_;
    std::string id_;
    std::map<std::string, ChartFns> per_chart_;
    bool symmetric_;
    Provenance provenance_;
    double fd_step_;
};

using ConnPtr = std::shared_ptr<const ChristoffelField>;

struct Differentiation {
    enum class Mode { analytic, finite_difference };
    Mode mode = Mode::analytic;
    double step = 1e-5;

    static Differentiation analytic() { return {Mode::analytic, 1e-5}; }
    static Differentiation finite_difference(double step) {
        return {Mode::finite_difference, step};
    }
};

namespace detail {

inline Mat pd_inverse(const Mat& g, const std::string& what, double cond_limit = 1e12) {
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) throw Error(what + ": metric not positive definite");
    if (hi / lo > cond_limit) throw Error(what + ": metric matrix ill-conditioned");
    return g.inverse();
}

inline Christoffel levi_civita_at(const Mat& g, const std::vector<Mat>& dg,
                                  const std::string& what) {
    int n = g.rows();
    Mat inv = pd_inverse(g, what);
    Christoffel gamma(n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double s = 0.0;
                for (int l = 0; l < n; ++l)
                    s += inv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
                gamma(k, i, j) = 0.5 * s;
                gamma(k, j, i) = gamma(k, i, j);
            }
    return gamma;
}

}  // namespace detail

/// Levi-Civita connection of a metric:
///   Γ^k_ij = 1/2 g^{kl} (∂_i g_jl + ∂_j g_il − ∂_l g_ij).
/// Analytic mode also derives ∂Γ from the metric's second derivatives; the
/// finite-difference mode differences the metric (and Γ) at the given step.
inline ConnPtr levi_civita(MetricPtr metric, Differentiation diff = Differentiation::analytic()) {
    AtlasPtr atlas = metric->atlas();
    std::map<std::string, ChristoffelField::ChartFns> fns;
    bool fd = diff.mode == Differentiation::Mode::finite_difference;
    double step = diff.step;
    std::string id = "levi_civita(" + metric->id() + ")";

    for (const Chart& c : atlas->charts()) {
        if (!metric->covers(c.id)) continue;
        const std::string cid = c.id;
        const int n = atlas->dim();

        auto gamma_fn = [metric, cid, n, fd, step, id](const Vec& x) {
            Mat g = metric->value(cid, x);
            std::vector<Mat> dg(n);
            for (int k = 0; k < n; ++k) {
                if (fd) {
                    Vec xp = x, xm = x;
                    xp[k] += step;
                    xm[k] -= step;
                    dg[k] = (metric->value(cid, xp) - metric->value(cid, xm)) / (2.0 * step);
                } else {
                    dg[k] = metric->d1(cid, x, k);
                }
            }
            return detail::levi_civita_at(g, dg, id);
        };

        ChristoffelField::ChartFns cf;
        cf.value = gamma_fn;
        if (!fd) {
            cf.d1 = [metric, cid, n, id](const Vec& x, int m) {
                Mat g = metric->value(cid, x);
                Mat inv = detail::pd_inverse(g, id);
                Mat dgm = metric->d1(cid, x, m);
                Mat dinv = -inv * dgm * inv;
                std::vector<Mat> dg(n), ddg(n);
                for (int k = 0; k < n; ++k) {
                    dg[k] = metric->d1(cid, x, k);
                    ddg[k] = metric->d2(cid, x, k, m);  // ∂_m ∂_k g
                }
                Christoffel out(n);
                for (int k = 0; k < n; ++k)
                    for (int i = 0; i < n; ++i)
                        for (int j = i; j < n; ++j) {
                            double s = 0.0;
                            for (int l = 0; l < n; ++l) {
                                s += dinv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
                                s += inv(k, l) * (ddg[i](j, l) + ddg[j](i, l) - ddg[l](i, j));
                            }
                            out(k, i, j) = 0.5 * s;
                            out(k, j, i) = out(k, i, j);
                        }
                return out;
            };
        }
        fns[cid] = std::move(cf);
    }
    if (fns.empty()) throw Error("levi_civita: metric covers no chart");
    return std::make_shared<ChristoffelField>(
        atlas, id, std::move(fns), true,
        Provenance{Provenance::Kind::levi_civita, 0.0, metric->id(), ""},
        fd ? step : metric->fd_step());
}

/// Pointwise convex combination (1-t)·Γ_nabla + t·Γ_d of two symmetric fields
/// on the same atlas.
inline ConnPtr convex_combine(ConnPtr nabla, ConnPtr d, double t) {
    if (nabla->atlas() != d->atlas()) throw Error("convex_combine: mismatched atlases");
    if (!(t >= 0.0 && t <= 1.0)) throw Error("convex_combine: t outside [0,1]");
    if (!nabla->symmetric() || !d->symmetric())
        throw Error("convex_combine: both connections must be symmetric");
    AtlasPtr atlas = nabla->atlas();
    std::map<std::string, ChristoffelField::ChartFns> fns;
    for (const Chart& c : atlas->charts()) {
        if (!nabla->covers(c.id) || !d->covers(c.id)) continue;
        const std::string cid = c.id;
        fns[cid] = ChristoffelField::ChartFns{
            [nabla, d, t, cid](const Vec& x) {
                Christoffel g = nabla->gamma(cid, x);
                g *= (1.0 - t);
                Christoffel h = d->gamma(cid, x);
                h *= t;
                return g + h;
            },
            [nabla, d, t, cid](const Vec& x, int m) {
                Christoffel g = nabla->dgamma(cid, x, m);
                g *= (1.0 - t);
                Christoffel h = d->dgamma(cid, x, m);
                h *= t;
                return g + h;
            }};
    }
    if (fns.empty()) throw Error("convex_combine: no common chart");
    return std::make_shared<ChristoffelField>(
        atlas, "combine(" + nabla->id() + "," + d->id() + ")", std::move(fns), true,
        Provenance{Provenance::Kind::convex_combination, t, nabla->id(), d->id()});
}

/// Pointwise metric interpolation t·g + (1-t)·h; positive definite for all t
/// by convexity of the PD cone.
inline MetricPtr metric_interpolate(MetricPtr g, MetricPtr h, double t) {
    if (g->atlas() != h->atlas()) throw Error("metric_interpolate: mismatched atlases");
    if (!(t >= 0.0 && t <= 1.0)) throw Error("metric_interpolate: t outside [0,1]");
    AtlasPtr atlas = g->atlas();
    std::map<std::string, MetricField::ChartFns> fns;
    for (const Chart& c : atlas->charts()) {
        if (!g->covers(c.id) || !h->covers(c.id)) continue;
        const std::string cid = c.id;
        fns[cid] = MetricField::ChartFns{
            [g, h, t, cid](const Vec& x) {
                return (t * g->value(cid, x) + (1.0 - t) * h->value(cid, x)).eval();
            },
            [g, h, t, cid](const Vec& x, int k) {
                return (t * g->d1(cid, x, k) + (1.0 - t) * h->d1(cid, x, k)).eval();
            },
            [g, h, t, cid](const Vec& x, int k, int l) {
                return (t * g->d2(cid, x, k, l) + (1.0 - t) * h->d2(cid, x, k, l)).eval();
            }};
    }
    if (fns.empty()) throw Error("metric_interpolate: no common chart");
    return std::make_shared<MetricField>(
        atlas, "interp(t=" + std::to_string(t) + "," + g->id() + "," + h->id() + ")",
        std::move(fns), Provenance{Provenance::Kind::interpolated, t, g->id(), h->id()},
        std::min(g->fd_step(), h->fd_step()));
}

/// Scalar conformal factor with optional analytic derivatives, per chart.
struct ScalarField {
    struct ChartFns {
        std::function<double(const Vec&)> value;
        std::function<double(const Vec&, int)> d1;
        std::function<double(const Vec&, int, int)> d2;
    };
    std::map<std::string, ChartFns> per_chart;
};

/// Metric scaled pointwise by a positive factor, derivatives by product rule.
inline MetricPtr conformal_metric(MetricPtr base, const ScalarField& factor, std::string id) {
    AtlasPtr atlas = base->atlas();
    std::map<std::string, MetricField::ChartFns> fns;
    for (const auto& [cid_, sf] : factor.per_chart) {
        const std::string cid = cid_;
        if (!base->covers(cid)) continue;
        const ScalarField::ChartFns f = sf;
        if (!f.value || !f.d1 || !f.d2)
            throw Error("conformal_metric: factor needs value, d1 and d2 on chart " + cid);
        fns[cid] = MetricField::ChartFns{
            [base, f, cid](const Vec& x) { return (f.value(x) * base->value(cid, x)).eval(); },
            [base, f, cid](const Vec& x, int k) {
                return (f.d1(x, k) * base->value(cid, x) + f.value(x) * base->d1(cid, x, k)).eval();
            },
            [base, f, cid](const Vec& x, int k, int l) {
                return (f.d2(x, k, l) * base->value(cid, x) + f.d1(x, k) * base->d1(cid, x, l) +
                        f.d1(x, l) * base->d1(cid, x, k) + f.value(x) * base->d2(cid, x, k, l))
                    .eval();
            }};
    }
    if (fns.empty()) throw Error("conformal_metric: no common chart");
    return std::make_shared<MetricField>(atlas, std::move(id), std::move(fns),
                                         Provenance{Provenance::Kind::analytic}, base->fd_step());
}

struct CompatibilityReport {
    double max_defect = 0.0;
    std::string chart;
    Vec point;
    int samples = 0;
};

/// Max over samples of |∂_k g_ij − Γ^l_ki g_lj − Γ^l_kj g_il|; zero for a
/// metric-compatible connection.
inline CompatibilityReport check_locally_metric(const ChristoffelField& conn,
                                                const MetricField& metric, int samples = 200,
                                                uint64_t seed = 7) {
    if (conn.atlas() != metric.atlas())
        throw Error("check_locally_metric: mismatched atlases");
    const Atlas& atlas = *conn.atlas();
    int n = atlas.dim();
    Rng rng(seed);
    CompatibilityReport rep;
    for (const Chart& c : atlas.charts()) {
        if (!conn.covers(c.id) || !metric.covers(c.id)) continue;
        for (int s = 0; s < samples; ++s) {
            Vec x = atlas.sample_point(c, rng);
            Mat g = metric.value(c.id, x);
            Christoffel gamma = conn.gamma(c.id, x);
            for (int k = 0; k < n; ++k) {
                Mat dg = metric.d1(c.id, x, k);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        double defect = dg(i, j);
                        for (int l = 0; l < n; ++l)
                            defect -= gamma(l, k, i) * g(l, j) + gamma(l, k, j) * g(i, l);
                        if (std::abs(defect) > rep.max_defect) {
                            rep.max_defect = std::abs(defect);
                            rep.chart = c.id;
                            rep.point = x;
                        }
                    }
            }
            ++rep.samples;
        }
    }
    return rep;
}

/// Coordinate curvature tensor assembled from Γ and ∂Γ:
///   R^l_kij = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik.
inline Riemann riemann_tensor(const ChristoffelField& conn, const std::string& chart,
                              const Vec& x) {
    int n = conn.atlas()->dim();
    Christoffel gamma = conn.gamma(chart, x);
    std::vector<Christoffel> dgamma(n);
    for (int m = 0; m < n; ++m) dgamma[m] = conn.dgamma(chart, x, m);
    Riemann r(n);
    for (int l = 0; l < n; ++l)
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double v = dgamma[i](l, j, k) - dgamma[j](l, i, k);
                    for (int m = 0; m < n; ++m)
                        v += gamma(l, i, m) * gamma(m, j, k) - gamma(l, j, m) * gamma(m, i, k);
                    r(l, k, i, j) = v;
                }
    return r;
}

}  // namespace diffgeo

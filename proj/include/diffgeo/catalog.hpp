#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "diffgeo/manifold.hpp"

namespace diffgeo {

struct BuiltinParams {
    double torus_side = 2.0 * kPi;
    double sphere_radius = 1.0;
    double deck_lambda = std::exp(2.0 * kPi);
};

namespace detail {

inline MetricPtr constant_metric(AtlasPtr atlas, const std::string& id,
                                 const std::vector<std::string>& charts, const Mat& g) {
    std::map<std::string, MetricField::ChartFns> fns;
    int n = g.rows();
    for (const std::string& cid : charts) {
        fns[cid] = MetricField::ChartFns{[g](const Vec&) { return g; },
                                         [n](const Vec&, int) { return Mat::Zero(n, n).eval(); },
                                         [n](const Vec&, int, int) { return Mat::Zero(n, n).eval(); }};
    }
    return std::make_shared<MetricField>(std::move(atlas), id, std::move(fns),
                                         Provenance{Provenance::Kind::analytic});
}

inline ChartedManifold make_flat_torus(double side) {
    if (!(side > 0.0)) throw Error("flat_torus_2d: side must be positive");
    Chart square;
    square.id = "square";
    square.dim = 2;
    square.domain = {{0.0, side, true}, {0.0, side, true}};
    square.coords = {"x", "y"};
    square.kind = CoordinateKind::affine;

    TransitionMap wrap;
    wrap.id = "wrap";
    wrap.from = wrap.to = "square";
    wrap.overlap_test = [](const Vec&) { return true; };
    wrap.forward = [side](const Vec& x) {
        Vec y = x;
        for (int i = 0; i < 2; ++i) {
            y[i] = std::fmod(y[i], side);
            if (y[i] < 0) y[i] += side;
        }
        return y;
    };
    wrap.jacobian = [](const Vec&) { return Mat::Identity(2, 2).eval(); };
    wrap.inverse_id = "wrap";

    QuadratureCover cover;
    cover.pieces.push_back({"square", [](const Vec&) { return 1.0; }, {200, 200}});

    auto atlas = std::make_shared<Atlas>("flat_torus_2d", std::vector<Chart>{square},
                                         std::vector<TransitionMap>{wrap}, cover);
    ChartedManifold m;
    m.key = "flat_torus_2d";
    m.atlas = atlas;
    m.metric = constant_metric(atlas, "euclidean", {"square"}, Mat::Identity(2, 2));
    m.local_metric = m.metric;
    m.flat_conn = ChristoffelField::zero(atlas, "flat_torus_2d:flat");
    return m;
}

inline ChartedManifold make_round_sphere(double radius) {
    if (!(radius > 0.0)) throw Error("round_sphere_2d: radius must be positive");
    Chart sph;
    sph.id = "spherical";
    sph.dim = 2;
    sph.domain = {{0.0, kPi, false}, {0.0, 2.0 * kPi, true}};
    sph.coords = {"theta", "phi"};
    sph.kind = CoordinateKind::general;

    TransitionMap wrap;
    wrap.id = "wrap_phi";
    wrap.from = wrap.to = "spherical";
    wrap.overlap_test = [](const Vec& x) { return x[0] > 0.0 && x[0] < kPi; };
    wrap.forward = [](const Vec& x) {
        Vec y = x;
        y[1] = std::fmod(y[1], 2.0 * kPi);
        if (y[1] < 0) y[1] += 2.0 * kPi;
        return y;
    };
    wrap.jacobian = [](const Vec&) { return Mat::Identity(2, 2).eval(); };
    wrap.inverse_id = "wrap_phi";

    QuadratureCover cover;
    cover.pieces.push_back({"spherical", [](const Vec&) { return 1.0; }, {400, 200}});

    auto atlas = std::make_shared<Atlas>("round_sphere_2d", std::vector<Chart>{sph},
                                         std::vector<TransitionMap>{wrap}, cover);

    const double R2 = radius * radius;
    std::map<std::string, MetricField::ChartFns> fns;
    fns["spherical"] = MetricField::ChartFns{
        [R2](const Vec& x) {
            Mat g = Mat::Zero(2, 2);
            g(0, 0) = R2;
            g(1, 1) = R2 * std::sin(x[0]) * std::sin(x[0]);
            return g;
        },
        [R2](const Vec& x, int k) {
            Mat d = Mat::Zero(2, 2);
            if (k == 0) d(1, 1) = 2.0 * R2 * std::sin(x[0]) * std::cos(x[0]);
            return d;
        },
        [R2](const Vec& x, int k, int l) {
            Mat d = Mat::Zero(2, 2);
            if (k == 0 && l == 0) d(1, 1) = 2.0 * R2 * std::cos(2.0 * x[0]);
            return d;
        }};

    ChartedManifold m;
    m.key = "round_sphere_2d";
    m.atlas = atlas;
    m.metric = std::make_shared<MetricField>(atlas, "round", std::move(fns),
                                             Provenance{Provenance::Kind::analytic});
    return m;
}

/// Quotient of the punctured space R^{n+1} \ {0} by x -> lambda x. Affine
/// coordinates live on the fundamental annulus; an auxiliary log-polar chart
/// (box domain, both axes periodic) exists in dimension 2 and carries the
/// quadrature cover.
inline ChartedManifold make_hopf(int n_sphere, double lambda) {
    if (n_sphere <= 0) throw Error("hopf_manifold: sphere dimension must be positive");
    if (!(lambda > 1.0)) throw Error("hopf_manifold: deck scalar must exceed 1");
    const int m_dim = n_sphere + 1;
    const double r_lo = std::pow(lambda, -0.5);
    const double r_hi = std::pow(lambda, 1.5);
    const double log_lambda = std::log(lambda);
    const bool two_d = (m_dim == 2);

    Chart annulus;
    annulus.id = "annulus";
    annulus.dim = m_dim;
    annulus.kind = CoordinateKind::affine;
    for (int i = 0; i < m_dim; ++i) {
        annulus.domain.push_back({-1.01 * r_hi, 1.01 * r_hi, false});
        annulus.coords.push_back("x" + std::to_string(i + 1));
    }
    annulus.membership = [r_lo, r_hi](const Vec& x) {
        double r = x.norm();
        return r > r_lo && r < r_hi;
    };
    // a displacement below max(0.9(r - r_lo), r_lo) can neither skip the
    // central hole nor fully traverse it
    annulus.safe_step = [r_lo](const Vec& x) {
        return std::max(0.9 * (x.norm() - r_lo), r_lo);
    };

    std::vector<Chart> charts{annulus};
    std::vector<TransitionMap> transitions;

    TransitionMap down;
    down.id = "deck_down";
    down.from = down.to = "annulus";
    down.overlap_test = [lambda](const Vec& x) { return x.norm() > lambda; };
    down.forward = [lambda](const Vec& x) { return (x / lambda).eval(); };
    down.jacobian = [lambda, m_dim](const Vec&) {
        return (Mat::Identity(m_dim, m_dim) / lambda).eval();
    };
    down.inverse_id = "deck_up";
    transitions.push_back(down);

    TransitionMap up;
    up.id = "deck_up";
    up.from = up.to = "annulus";
    up.overlap_test = [](const Vec& x) { return x.norm() < 1.0; };
    up.forward = [lambda](const Vec& x) { return (lambda * x).eval(); };
    up.jacobian = [lambda, m_dim](const Vec&) {
        return (lambda * Mat::Identity(m_dim, m_dim)).eval();
    };
    up.inverse_id = "deck_down";
    transitions.push_back(up);

    std::optional<QuadratureCover> cover;
    if (two_d) {
        Chart logpolar;
        logpolar.id = "logpolar";
        logpolar.dim = 2;
        logpolar.domain = {{0.0, log_lambda, true}, {0.0, 2.0 * kPi, true}};
        logpolar.coords = {"u", "v"};
        logpolar.kind = CoordinateKind::general;
        charts.push_back(logpolar);

        TransitionMap to_log;
        to_log.id = "log";
        to_log.from = "annulus";
        to_log.to = "logpolar";
        to_log.overlap_test = [r_lo, r_hi](const Vec& x) {
            double r = x.norm();
            return r > r_lo && r < r_hi;
        };
        to_log.forward = [](const Vec& x) {
            Vec y(2);
            y[0] = std::log(x.norm());
            y[1] = std::atan2(x[1], x[0]);
            return y;
        };
        to_log.jacobian = [](const Vec& x) {
            double r2 = x.squaredNorm();
            Mat j(2, 2);
            j(0, 0) = x[0] / r2;
            j(0, 1) = x[1] / r2;
            j(1, 0) = -x[1] / r2;
            j(1, 1) = x[0] / r2;
            return j;
        };
        to_log.inverse_id = "exp";
        transitions.push_back(to_log);

        TransitionMap to_ann;
        to_ann.id = "exp";
        to_ann.from = "logpolar";
        to_ann.to = "annulus";
        to_ann.overlap_test = [](const Vec&) { return true; };
        to_ann.forward = [](const Vec& uv) {
            Vec y(2);
            y[0] = std::exp(uv[0]) * std::cos(uv[1]);
            y[1] = std::exp(uv[0]) * std::sin(uv[1]);
            return y;
        };
        to_ann.jacobian = [](const Vec& uv) {
            double eu = std::exp(uv[0]);
            Mat j(2, 2);
            j(0, 0) = eu * std::cos(uv[1]);
            j(0, 1) = -eu * std::sin(uv[1]);
            j(1, 0) = eu * std::sin(uv[1]);
            j(1, 1) = eu * std::cos(uv[1]);
            return j;
        };
        to_ann.inverse_id = "log";
        transitions.push_back(to_ann);

        cover = QuadratureCover{};
        cover->pieces.push_back({"logpolar", [](const Vec&) { return 1.0; }, {200, 200}});
    }

    std::string key = two_d ? "hopf_torus_2d" : ("hopf_manifold(" + std::to_string(n_sphere) + ")");
    auto atlas = std::make_shared<Atlas>(key, std::move(charts), std::move(transitions), cover,
                                         DeckGroup{lambda, 1.0});

    ChartedManifold m;
    m.key = key;
    m.atlas = atlas;
    if (m_dim % 2 == 1) m.notes = "odd total dimension: Euler ops disabled";

    // flat structure: Euclidean coefficients of the covering space
    {
        std::map<std::string, ChristoffelField::ChartFns> fns;
        fns["annulus"] =
            ChristoffelField::ChartFns{[m_dim](const Vec&) { return Christoffel(m_dim); },
                                       [m_dim](const Vec&, int) { return Christoffel(m_dim); }};
        if (two_d) {
            // pushforward of the Euclidean connection under (x,y) = (e^u cos v, e^u sin v)
            fns["logpolar"] = ChristoffelField::ChartFns{[](const Vec&) {
                                                             Christoffel g(2);
                                                             g(0, 0, 0) = 1.0;   // Γ^u_uu
                                                             g(0, 1, 1) = -1.0;  // Γ^u_vv
                                                             g(1, 0, 1) = 1.0;   // Γ^v_uv
                                                             g(1, 1, 0) = 1.0;
                                                             return g;
                                                         },
                                                         [](const Vec&, int) { return Christoffel(2); }};
        }
        m.flat_conn = std::make_shared<ChristoffelField>(
            atlas, key + ":flat", std::move(fns), true, Provenance{Provenance::Kind::flat_affine});
    }

    // local metric of the affine charts: Euclidean on the annulus, conformal
    // e^{2u} in log-polar coordinates; compatible with the flat structure but
    // not deck-invariant
    {
        std::map<std::string, MetricField::ChartFns> fns;
        fns["annulus"] = MetricField::ChartFns{
            [m_dim](const Vec&) { return Mat::Identity(m_dim, m_dim).eval(); },
            [m_dim](const Vec&, int) { return Mat::Zero(m_dim, m_dim).eval(); },
            [m_dim](const Vec&, int, int) { return Mat::Zero(m_dim, m_dim).eval(); }};
        if (two_d) {
            fns["logpolar"] = MetricField::ChartFns{
                [](const Vec& uv) { return (std::exp(2.0 * uv[0]) * Mat::Identity(2, 2)).eval(); },
                [](const Vec& uv, int k) {
                    if (k != 0) return Mat::Zero(2, 2).eval();
                    return (2.0 * std::exp(2.0 * uv[0]) * Mat::Identity(2, 2)).eval();
                },
                [](const Vec& uv, int k, int l) {
                    if (k != 0 || l != 0) return Mat::Zero(2, 2).eval();
                    return (4.0 * std::exp(2.0 * uv[0]) * Mat::Identity(2, 2)).eval();
                }};
        }
        m.local_metric = std::make_shared<MetricField>(atlas, key + ":local_euclidean",
                                                       std::move(fns),
                                                       Provenance{Provenance::Kind::analytic});
    }

    // global product metric |x|^{-2} δ on the quotient (deck-invariant)
    {
        std::map<std::string, MetricField::ChartFns> fns;
        fns["annulus"] = MetricField::ChartFns{
            [m_dim](const Vec& x) {
                return (Mat::Identity(m_dim, m_dim) / x.squaredNorm()).eval();
            },
            [m_dim](const Vec& x, int k) {
                double r2 = x.squaredNorm();
                return (-2.0 * x[k] / (r2 * r2) * Mat::Identity(m_dim, m_dim)).eval();
            },
            [m_dim](const Vec& x, int k, int l) {
                double r2 = x.squaredNorm();
                double c = -2.0 * (k == l ? 1.0 : 0.0) / (r2 * r2) +
                           8.0 * x[k] * x[l] / (r2 * r2 * r2);
                return (c * Mat::Identity(m_dim, m_dim)).eval();
            }};
        if (two_d) {
            fns["logpolar"] = MetricField::ChartFns{
                [](const Vec&) { return Mat::Identity(2, 2).eval(); },
                [](const Vec&, int) { return Mat::Zero(2, 2).eval(); },
                [](const Vec&, int, int) { return Mat::Zero(2, 2).eval(); }};
        }
        m.metric = std::make_shared<MetricField>(atlas, key + ":product", std::move(fns),
                                                 Provenance{Provenance::Kind::analytic});
    }
    return m;
}

}  // namespace detail

/// Catalog lookup. Keys: flat_torus_2d, round_sphere_2d, hopf_torus_2d,
/// hopf_manifold(n).
inline ChartedManifold builtin_manifold(const std::string& name, BuiltinParams params = {}) {
    if (name == "flat_torus_2d") return detail::make_flat_torus(params.torus_side);
    if (name == "round_sphere_2d") return detail::make_round_sphere(params.sphere_radius);
    if (name == "hopf_torus_2d") return detail::make_hopf(1, params.deck_lambda);
    if (name.rfind("hopf_manifold(", 0) == 0 && name.back() == ')') {
        int n = 0;
        try {
            n = std::stoi(name.substr(14, name.size() - 15));
        } catch (const std::exception&) {
            throw Error("builtin_manifold: malformed key '" + name + "'");
        }
        return detail::make_hopf(n, params.deck_lambda);
    }
    throw Error("builtin_manifold: unknown key '" + name + "'");
}

struct CatalogEntry {
    std::string key;
    int dim;
    bool affine;
    bool has_metric;
    std::string notes;
};

/// Deterministic catalog listing (sorted by key).
inline std::vector<CatalogEntry> list_catalog() {
    std::vector<CatalogEntry> entries;
    for (const std::string& key : {"flat_torus_2d", "hopf_manifold(2)", "hopf_manifold(3)",
                                   "hopf_torus_2d", "round_sphere_2d"}) {
        ChartedManifold m = builtin_manifold(key);
        entries.push_back({m.key, m.atlas->dim(), m.has_affine_structure(),
                           m.metric != nullptr, m.notes});
    }
    return entries;
}

/// Smooth positive conformal factor used as the default metric perturbation in
/// deformation experiments; periodic/ambient-smooth on each built-in.
inline ScalarField builtin_bump_factor(const ChartedManifold& m, double amp = 0.3) {
    ScalarField f;
    if (m.key == "flat_torus_2d") {
        f.per_chart["square"] = ScalarField::ChartFns{
            [amp](const Vec& x) { return 1.0 + amp * std::sin(x[0]) * std::sin(x[1]); },
            [amp](const Vec& x, int k) {
                return k == 0 ? amp * std::cos(x[0]) * std::sin(x[1])
                              : amp * std::sin(x[0]) * std::cos(x[1]);
            },
            [amp](const Vec& x, int k, int l) {
                if (k == l)
                    return -amp * std::sin(x[0]) * std::sin(x[1]);
                return amp * std::cos(x[0]) * std::cos(x[1]);
            }};
    } else if (m.key == "round_sphere_2d") {
        // restriction of the ambient linear function: smooth across the poles
        f.per_chart["spherical"] = ScalarField::ChartFns{
            [amp](const Vec& x) { return 1.0 + amp * std::sin(x[0]) * std::cos(x[1]); },
            [amp](const Vec& x, int k) {
                return k == 0 ? amp * std::cos(x[0]) * std::cos(x[1])
                              : -amp * std::sin(x[0]) * std::sin(x[1]);
            },
            [amp](const Vec& x, int k, int l) {
                if (k == 0 && l == 0) return -amp * std::sin(x[0]) * std::cos(x[1]);
                if (k == 1 && l == 1) return -amp * std::sin(x[0]) * std::cos(x[1]);
                return -amp * std::cos(x[0]) * std::sin(x[1]);
            }};
    } else if (m.key == "hopf_torus_2d") {
        double period = m.atlas->chart("logpolar").domain[0].length();
        double w = 2.0 * kPi / period;
        f.per_chart["logpolar"] = ScalarField::ChartFns{
            [amp, w](const Vec& x) { return 1.0 + amp * std::sin(w * x[0]) * std::sin(x[1]); },
            [amp, w](const Vec& x, int k) {
                return k == 0 ? amp * w * std::cos(w * x[0]) * std::sin(x[1])
                              : amp * std::sin(w * x[0]) * std::cos(x[1]);
            },
            [amp, w](const Vec& x, int k, int l) {
                if (k == 0 && l == 0) return -amp * w * w * std::sin(w * x[0]) * std::sin(x[1]);
                if (k == 1 && l == 1) return -amp * std::sin(w * x[0]) * std::sin(x[1]);
                return amp * w * std::cos(w * x[0]) * std::cos(x[1]);
            }};
    } else {
        throw Error("builtin_bump_factor: no default perturbation for '" + m.key + "'");
    }
    return f;
}

}  // namespace diffgeo

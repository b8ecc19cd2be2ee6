#pragma once

#include <memory>
#include <string>
#include <utility>

#include "diffgeo/atlas.hpp"
#include "diffgeo/connection.hpp"

namespace diffgeo {

/// A wired manifold: atlas plus whatever structure it carries. Affine
/// built-ins carry a flat connection and the locally compatible metric of
/// their affine charts; metric built-ins carry a global metric.
struct ChartedManifold {
    std::string key;
    AtlasPtr atlas;
    ConnPtr flat_conn;       // flat affine structure, optional
    MetricPtr metric;        // global metric, optional
    MetricPtr local_metric;  // local metric compatible with flat_conn, optional
    std::string notes;

    bool has_affine_structure() const { return flat_conn != nullptr; }
};

/// The flat connection of an affine atlas (Γ ≡ 0 in affine coordinates).
/// Manifolds wired with a flat structure return it; otherwise the atlas must
/// consist of affine charts only.
inline ConnPtr flat_connection(const ChartedManifold& m) {
    if (m.flat_conn) return m.flat_conn;
    if (!m.atlas->all_affine())
        throw Error("flat_connection: atlas contains a non-affine chart");
    return ChristoffelField::zero(m.atlas, m.key + ":flat");
}

}  // namespace diffgeo

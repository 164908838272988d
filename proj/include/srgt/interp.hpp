#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/gll.hpp"
#include "srgt/mesh.hpp"
#include "srgt/neighborhood.hpp"
#include "srgt/snapshot.hpp"

namespace srgt {

struct InterpConfig {
    int k_interp = 4;          // neighbors per interpolated point
    double epsilon_d = 1e-12;  // distance regularizer (m)
    double match_tol = 1e-12;  // exact-coincidence tolerance (m)
};

// Inverse-distance-weighted KNN interpolation. A query point coinciding with a
// source point (within match_tol, first match by source index) copies that
// source's values bit-exactly; otherwise the k_interp nearest sources are
// averaged with weights 1/(d + epsilon_d), normalized to sum 1.
inline std::vector<double> knn_interpolate(const std::vector<std::array<double, 2>>& source_points,
                                           const std::vector<double>& source_values, int nf,
                                           const std::vector<std::array<double, 2>>& query_points,
                                           const InterpConfig& cfg) {
    const int m = static_cast<int>(source_points.size());
    if (cfg.k_interp < 1) throw config_error("knn_interpolate: k_interp must be >= 1");
    if (m < cfg.k_interp)
        throw config_error("knn_interpolate: " + std::to_string(m) + " source points < k_interp = " +
                           std::to_string(cfg.k_interp));
    if (source_values.size() != static_cast<size_t>(m) * nf)
        throw config_error("knn_interpolate: source value array has wrong length");

    std::vector<double> out(query_points.size() * static_cast<size_t>(nf), 0.0);
    std::vector<std::pair<double, int>> dist(static_cast<size_t>(m));
    const double tol2 = cfg.match_tol * cfg.match_tol;
    for (size_t q = 0; q < query_points.size(); ++q) {
        const double qx = query_points[q][0];
        const double qy = query_points[q][1];
        int match = -1;
        for (int s = 0; s < m; ++s) {
            const double dx = source_points[static_cast<size_t>(s)][0] - qx;
            const double dy = source_points[static_cast<size_t>(s)][1] - qy;
            const double d2 = dx * dx + dy * dy;
            dist[static_cast<size_t>(s)] = {d2, s};
            if (match < 0 && d2 <= tol2) match = s;
        }
        double* row = out.data() + q * static_cast<size_t>(nf);
        if (match >= 0) {
            const double* src = source_values.data() + static_cast<size_t>(match) * nf;
            std::copy(src, src + nf, row);
            continue;
        }
        std::partial_sort(dist.begin(), dist.begin() + cfg.k_interp, dist.end());
        double wsum = 0.0;
        for (int j = 0; j < cfg.k_interp; ++j) wsum += 1.0 / (std::sqrt(dist[static_cast<size_t>(j)].first) + cfg.epsilon_d);
        for (int j = 0; j < cfg.k_interp; ++j) {
            const double w = 1.0 / (std::sqrt(dist[static_cast<size_t>(j)].first) + cfg.epsilon_d) / wsum;
            const double* src = source_values.data() + static_cast<size_t>(dist[static_cast<size_t>(j)].second) * nf;
            for (int f = 0; f < nf; ++f) row[f] += w * src[f];
        }
    }
    return out;
}

// Gathers the coarse GLL point cloud of the query element and its neighbors:
// coordinates and values in token order (query first), points in GLL order.
inline void gather_sources(const Mesh& mesh, const Snapshot& coarse, const Neighborhood& nbh,
                           std::vector<std::array<double, 2>>& points, std::vector<double>& values) {
    const int npts = coarse.points_per_element();
    const int nf = coarse.n_features();
    points.clear();
    values.clear();
    points.reserve(static_cast<size_t>(nbh.n_tokens()) * npts);
    values.reserve(static_cast<size_t>(nbh.n_tokens()) * npts * nf);
    auto add = [&](int e) {
        const auto coords = element_gll_coords(mesh, e);
        points.insert(points.end(), coords.begin(), coords.end());
        const auto ev = coarse.element(e);
        values.insert(values.end(), ev.begin(), ev.end());
    };
    add(nbh.query);
    for (int e : nbh.neighbors) add(e);
}

// KNN-interpolated fine (p=3) field of the query element, built from the
// coarse query + neighborhood point cloud. Returns 16*nf values in snapshot
// layout (GLL point major, feature fastest). The four fine corner points
// coincide with coarse query points and are copied bit-exactly.
inline std::vector<double> interp_element(const Mesh& mesh, const Snapshot& coarse,
                                          const Neighborhood& nbh, const std::vector<double>& gll3,
                                          const InterpConfig& cfg) {
    std::vector<std::array<double, 2>> points;
    std::vector<double> values;
    gather_sources(mesh, coarse, nbh, points, values);
    const auto fine_coords =
        element_point_coords(mesh.centroids[static_cast<size_t>(nbh.query)], mesh.spacing(), gll3);
    return knn_interpolate(points, values, coarse.n_features(), fine_coords, cfg);
}

}  // namespace srgt

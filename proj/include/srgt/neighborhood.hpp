#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/dense.hpp"
#include "srgt/mesh.hpp"

namespace srgt {

// K nearest elements to a query element by centroid distance. Order is
// ascending distance with ties broken by ascending element index, so lattice
// meshes get deterministic neighborhoods.
struct Neighborhood {
    int query = 0;
    std::vector<int> neighbors;

    int K() const { return static_cast<int>(neighbors.size()); }
    int n_tokens() const { return 1 + K(); }
};

inline Neighborhood knn_neighbors(const Mesh& mesh, int query, int K) {
    const int n = mesh.n_elements();
    if (query < 0 || query >= n)
        throw config_error("knn_neighbors: query element out of range");
    if (K < 0 || K > n - 1)
        throw config_error("knn_neighbors: K = " + std::to_string(K) + " exceeds available elements (" +
                           std::to_string(n - 1) + ")");
    const auto& q = mesh.centroids[static_cast<size_t>(query)];
    std::vector<std::pair<double, int>> dist;
    dist.reserve(static_cast<size_t>(n) - 1);
    for (int e = 0; e < n; ++e) {
        if (e == query) continue;
        const auto& c = mesh.centroids[static_cast<size_t>(e)];
        const double dx = c[0] - q[0];
        const double dy = c[1] - q[1];
        dist.emplace_back(dx * dx + dy * dy, e);
    }
    std::partial_sort(dist.begin(), dist.begin() + K, dist.end());
    Neighborhood nbh;
    nbh.query = query;
    nbh.neighbors.reserve(static_cast<size_t>(K));
    for (int i = 0; i < K; ++i) nbh.neighbors.push_back(dist[static_cast<size_t>(i)].second);
    return nbh;
}

// Rows of (u_x, u_y, d): unit displacement and distance from the query
// centroid to each token's centroid. Row 0 is the query itself, encoded as
// ((0,0), 0).
using PositionMatrix = Mat;

inline PositionMatrix relative_positions(const Mesh& mesh, const Neighborhood& nbh) {
    PositionMatrix pos = PositionMatrix::Zero(nbh.n_tokens(), 3);
    const auto& q = mesh.centroids[static_cast<size_t>(nbh.query)];
    for (int j = 0; j < nbh.K(); ++j) {
        const auto& c = mesh.centroids[static_cast<size_t>(nbh.neighbors[static_cast<size_t>(j)])];
        const double dx = c[0] - q[0];
        const double dy = c[1] - q[1];
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d == 0.0)
            throw config_error("relative_positions: neighbor " +
                               std::to_string(nbh.neighbors[static_cast<size_t>(j)]) +
                               " has the same centroid as the query (degenerate geometry)");
        pos(j + 1, 0) = dx / d;
        pos(j + 1, 1) = dy / d;
        pos(j + 1, 2) = d;
    }
    return pos;
}

}  // namespace srgt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/dense.hpp"
#include "srgt/snapshot.hpp"

namespace srgt {

// k-means segmentation of a coarse flow-field in standardized
// (P, T, rho, Y_H2O) space, plus balanced per-cluster element sampling.
struct ClusterModel {
    int k = 0;
    Mat centroids;             // k x 4, standardized space
    Vec feature_means;         // 4
    Vec feature_stds;          // 4
    std::vector<uint8_t> assignments;
};

inline constexpr int kClusterFeatures = 4;

// Per-element clustering features: mean over the element's GLL points of
// (P, T, rho, Y_H2O), with rho = P/(R_s T) recomputed pointwise.
inline Mat element_cluster_features(const Snapshot& coarse, double r_gas) {
    if (coarse.p != 1) throw config_error("element_cluster_features: snapshot must be p=1");
    const int n = coarse.n_elements();
    const int npts = coarse.points_per_element();
    Mat features(n, kClusterFeatures);
    for (int e = 0; e < n; ++e) {
        double sp = 0.0, st = 0.0, srho = 0.0, sy = 0.0;
        for (int j = 0; j < npts; ++j) {
            const double press = coarse.at(e, j, F_P);
            const double temp = coarse.at(e, j, F_T);
            if (!(temp > 0.0))
                throw config_error("element_cluster_features: non-positive temperature at element " +
                                   std::to_string(e));
            sp += press;
            st += temp;
            srho += press / (r_gas * temp);
            sy += coarse.at(e, j, F_Y_H2O);
        }
        features(e, 0) = sp / npts;
        features(e, 1) = st / npts;
        features(e, 2) = srho / npts;
        features(e, 3) = sy / npts;
    }
    return features;
}

namespace detail {

inline double sq_dist_row(const Mat& a, int i, const Mat& b, int j) {
    double d = 0.0;
    for (int c = 0; c < a.cols(); ++c) {
        const double t = a(i, c) - b(j, c);
        d += t * t;
    }
    return d;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding on standardized features.
// Iterates until the assignment set stops changing (or 300 iterations);
// empty clusters are re-seeded from the point farthest from its centroid.
inline ClusterModel kmeans_fit(const Mat& features, int k, uint64_t seed) {
    const int n = static_cast<int>(features.rows());
    const int dim = static_cast<int>(features.cols());
    if (k < 1) throw config_error("kmeans_fit: k must be >= 1");
    if (n < k)
        throw config_error("kmeans_fit: " + std::to_string(n) + " points < k = " + std::to_string(k));

    ClusterModel model;
    model.k = k;
    model.feature_means = features.colwise().mean();
    model.feature_stds = Vec(dim);
    for (int c = 0; c < dim; ++c) {
        const double var = (features.col(c).array() - model.feature_means[c]).square().mean();
        model.feature_stds[c] = std::max(std::sqrt(var), 1e-12);
    }
    Mat x = features;
    for (int c = 0; c < dim; ++c)
        x.col(c) = (x.col(c).array() - model.feature_means[c]) / model.feature_stds[c];

    // k-means++ seeding.
    Rng rng(seed);
    Mat centroids(k, dim);
    std::vector<double> d2(static_cast<size_t>(n), 0.0);
    centroids.row(0) = x.row(static_cast<int>(uniform_below(rng, static_cast<uint64_t>(n))));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = detail::sq_dist_row(x, i, centroids, 0);
            for (int j = 1; j < c; ++j) best = std::min(best, detail::sq_dist_row(x, i, centroids, j));
            d2[static_cast<size_t>(i)] = best;
            total += best;
        }
        int pick;
        if (total <= 0.0) {
            pick = static_cast<int>(uniform_below(rng, static_cast<uint64_t>(n)));
        } else {
            const double r = uniform_double(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2[static_cast<size_t>(i)];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.row(c) = x.row(pick);
    }

    std::vector<uint8_t> assign(static_cast<size_t>(n), 0);
    std::vector<int> counts(static_cast<size_t>(k), 0);
    double prev_objective = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = iter == 0;
        double objective = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bestd = detail::sq_dist_row(x, i, centroids, 0);
            for (int c = 1; c < k; ++c) {
                const double d = detail::sq_dist_row(x, i, centroids, c);
                if (d < bestd) {
                    bestd = d;
                    best = c;
                }
            }
            objective += bestd;
            if (assign[static_cast<size_t>(i)] != static_cast<uint8_t>(best)) {
                assign[static_cast<size_t>(i)] = static_cast<uint8_t>(best);
                changed = true;
            }
        }
        // Lloyd monotonicity; a violation means the update logic is broken.
        if (objective > prev_objective * (1.0 + 1e-12) + 1e-30)
            throw error("kmeans_fit: objective increased across iterations");
        prev_objective = objective;
        if (!changed) break;

        std::fill(counts.begin(), counts.end(), 0);
        centroids.setZero();
        for (int i = 0; i < n; ++i) {
            centroids.row(assign[static_cast<size_t>(i)]) += x.row(i);
            ++counts[assign[static_cast<size_t>(i)]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] > 0) {
                centroids.row(c) /= counts[static_cast<size_t>(c)];
            } else {
                // Re-seed from the point farthest from its assigned centroid.
                int far = 0;
                double fard = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = detail::sq_dist_row(x, i, centroids, assign[static_cast<size_t>(i)]);
                    if (d > fard) {
                        fard = d;
                        far = i;
                    }
                }
                centroids.row(c) = x.row(far);
                assign[static_cast<size_t>(far)] = static_cast<uint8_t>(c);
                prev_objective = std::numeric_limits<double>::infinity();
            }
        }
    }
    model.centroids = std::move(centroids);
    model.assignments = std::move(assign);
    return model;
}

// Uniform sampling without replacement of min(per_cluster, cluster size)
// elements from each cluster; output is cluster-major, then draw order.
inline std::vector<std::pair<int, uint8_t>> cluster_conditioned_sample(
    const std::vector<uint8_t>& assignments, int k, int per_cluster, uint64_t seed) {
    if (per_cluster < 1) throw config_error("cluster_conditioned_sample: per_cluster must be >= 1");
    std::vector<std::pair<int, uint8_t>> out;
    Rng rng(seed);
    for (int c = 0; c < k; ++c) {
        std::vector<int> members;
        for (size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == static_cast<uint8_t>(c)) members.push_back(static_cast<int>(i));
        const int take = std::min<int>(per_cluster, static_cast<int>(members.size()));
        // Partial Fisher-Yates: the first `take` entries are the draws.
        for (int i = 0; i < take; ++i) {
            const size_t j = static_cast<size_t>(i) +
                             static_cast<size_t>(uniform_below(rng, members.size() - static_cast<size_t>(i)));
            std::swap(members[static_cast<size_t>(i)], members[j]);
            out.emplace_back(members[static_cast<size_t>(i)], static_cast<uint8_t>(c));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cluster assignment sidecar: magic "SRGTCLST", u32 version, u32 k, u32 N,
// then N u8 labels.
// ---------------------------------------------------------------------------

inline constexpr char kClusterMagic[9] = "SRGTCLST";
inline constexpr uint32_t kClusterVersion = 1;

inline void write_clusters(const ClusterModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("write_clusters: cannot open " + path);
    write_magic(os, kClusterMagic);
    write_u32(os, kClusterVersion);
    write_u32(os, static_cast<uint32_t>(model.k));
    write_u32(os, static_cast<uint32_t>(model.assignments.size()));
    os.write(reinterpret_cast<const char*>(model.assignments.data()),
             static_cast<std::streamsize>(model.assignments.size()));
    if (!os) throw io_error("write_clusters: write failed for " + path);
}

inline std::pair<int, std::vector<uint8_t>> read_clusters(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("read_clusters: cannot open " + path);
    expect_magic(is, kClusterMagic, "cluster sidecar");
    const uint32_t version = read_u32(is, "version");
    if (version != kClusterVersion)
        throw format_error("read_clusters: unsupported version " + std::to_string(version));
    const uint32_t k = read_u32(is, "k");
    const uint32_t n = read_u32(is, "N");
    std::vector<uint8_t> labels(n);
    is.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(n));
    if (!is || is.gcount() != static_cast<std::streamsize>(n))
        throw format_error("read_clusters: truncated label payload");
    for (uint8_t l : labels)
        if (l >= k) throw format_error("read_clusters: label out of range");
    return {static_cast<int>(k), std::move(labels)};
}

}  // namespace srgt

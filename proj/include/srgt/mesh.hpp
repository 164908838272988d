#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/gll.hpp"

namespace srgt {

// 2D lattice of non-overlapping square spectral elements. Element e sits at
// (ix, iy) = (e % nex, e / nex) with centroid ((ix+0.5) h, (iy+0.5) h).
struct Mesh {
    int nex = 0;
    int ney = 0;
    double Lx = 0.0;
    double Ly = 0.0;
    int p = 0;
    std::vector<std::array<double, 2>> centroids;
    std::vector<double> gll_1d;

    int n_elements() const { return nex * ney; }
    int nodes_per_side() const { return p + 1; }
    int nodes_per_element() const { return (p + 1) * (p + 1); }
    double spacing() const { return Lx / nex; }
};

inline Mesh build_mesh(int nex, int ney, double Lx, double Ly, int p) {
    if (nex < 1 || ney < 1) throw config_error("build_mesh: element counts must be >= 1");
    if (!(Lx > 0.0) || !(Ly > 0.0)) throw config_error("build_mesh: domain lengths must be positive");
    const double hx = Lx / nex;
    const double hy = Ly / ney;
    if (std::abs(hx - hy) > 1e-12 * std::max(hx, hy))
        throw config_error("build_mesh: non-square elements (Lx/nex = " + std::to_string(hx) +
                           ", Ly/ney = " + std::to_string(hy) + ")");
    Mesh m;
    m.nex = nex;
    m.ney = ney;
    m.Lx = Lx;
    m.Ly = Ly;
    m.p = p;
    m.gll_1d = gll_nodes(p);
    m.centroids.resize(static_cast<size_t>(nex) * ney);
    for (int iy = 0; iy < ney; ++iy)
        for (int ix = 0; ix < nex; ++ix)
            m.centroids[static_cast<size_t>(iy) * nex + ix] = {(ix + 0.5) * hx, (iy + 0.5) * hx};
    return m;
}

// Physical coordinates of the (p+1)^2 GLL points of one element, lexicographic
// tensor-product order with the x index fastest: j = jy*(p+1) + jx.
inline std::vector<std::array<double, 2>> element_point_coords(
    const std::array<double, 2>& centroid, double h, const std::vector<double>& gll_1d) {
    const int n = static_cast<int>(gll_1d.size());
    std::vector<std::array<double, 2>> coords(static_cast<size_t>(n) * n);
    for (int jy = 0; jy < n; ++jy)
        for (int jx = 0; jx < n; ++jx)
            coords[static_cast<size_t>(jy) * n + jx] = {
                centroid[0] + 0.5 * h * gll_1d[static_cast<size_t>(jx)],
                centroid[1] + 0.5 * h * gll_1d[static_cast<size_t>(jy)]};
    return coords;
}

inline std::vector<std::array<double, 2>> element_gll_coords(const Mesh& mesh, int e) {
    if (e < 0 || e >= mesh.n_elements())
        throw config_error("element_gll_coords: element index " + std::to_string(e) + " out of range");
    return element_point_coords(mesh.centroids[static_cast<size_t>(e)], mesh.spacing(), mesh.gll_1d);
}

}  // namespace srgt

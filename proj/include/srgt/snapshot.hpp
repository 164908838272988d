#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/mesh.hpp"

namespace srgt {

// One flow-field time instant on a spectral-element mesh. Data layout is
// element row-major, then GLL points in lexicographic order (x fastest), then
// features, with the feature index fastest:
//   data[(e * npts + j) * nf + f]
struct Snapshot {
    int nex = 0;
    int ney = 0;
    int p = 0;
    double Lx = 0.0;
    double Ly = 0.0;
    double time = 0.0;
    std::vector<std::string> feature_names;
    std::vector<double> data;

    int n_elements() const { return nex * ney; }
    int points_per_element() const { return (p + 1) * (p + 1); }
    int n_features() const { return static_cast<int>(feature_names.size()); }
    size_t expected_size() const {
        return static_cast<size_t>(n_elements()) * points_per_element() * n_features();
    }

    double& at(int e, int point, int f) {
        return data[(static_cast<size_t>(e) * points_per_element() + point) * n_features() + f];
    }
    double at(int e, int point, int f) const {
        return data[(static_cast<size_t>(e) * points_per_element() + point) * n_features() + f];
    }

    // Contiguous (npts * nf) slice of one element.
    std::span<double> element(int e) {
        const size_t sz = static_cast<size_t>(points_per_element()) * n_features();
        return {data.data() + static_cast<size_t>(e) * sz, sz};
    }
    std::span<const double> element(int e) const {
        const size_t sz = static_cast<size_t>(points_per_element()) * n_features();
        return {data.data() + static_cast<size_t>(e) * sz, sz};
    }

    bool same_grid(const Snapshot& other) const {
        return nex == other.nex && ney == other.ney && Lx == other.Lx && Ly == other.Ly &&
               feature_names == other.feature_names;
    }
};

inline Mesh mesh_of(const Snapshot& s) { return build_mesh(s.nex, s.ney, s.Lx, s.Ly, s.p); }

inline Snapshot make_snapshot(const Mesh& mesh, double time,
                              std::vector<std::string> names = feature_names()) {
    Snapshot s;
    s.nex = mesh.nex;
    s.ney = mesh.ney;
    s.p = mesh.p;
    s.Lx = mesh.Lx;
    s.Ly = mesh.Ly;
    s.time = time;
    s.feature_names = std::move(names);
    s.data.assign(s.expected_size(), 0.0);
    return s;
}

// Fine (p=3) lexicographic indices of the four element corners, which are
// exactly the p=1 GLL points (GLL node sets always contain the endpoints).
inline constexpr std::array<int, 4> kCornerIndicesP3 = {0, 3, 12, 15};

// Masks a p=3 element field down to its p=1 corner values.
inline void coarsen_element(std::span<const double> fine, int nf, std::span<double> coarse) {
    if (fine.size() != static_cast<size_t>(16) * nf)
        throw config_error("coarsen_element: input is not a p=3 element field");
    if (coarse.size() != static_cast<size_t>(4) * nf)
        throw config_error("coarsen_element: output is not a p=1 element field");
    for (int c = 0; c < 4; ++c)
        for (int f = 0; f < nf; ++f)
            coarse[static_cast<size_t>(c) * nf + f] =
                fine[static_cast<size_t>(kCornerIndicesP3[static_cast<size_t>(c)]) * nf + f];
}

inline Snapshot coarsen_snapshot(const Snapshot& s) {
    if (s.p != 3) throw config_error("coarsen_snapshot: only p=3 -> p=1 coarsening is supported");
    Snapshot c;
    c.nex = s.nex;
    c.ney = s.ney;
    c.p = 1;
    c.Lx = s.Lx;
    c.Ly = s.Ly;
    c.time = s.time;
    c.feature_names = s.feature_names;
    c.data.resize(c.expected_size());
    const int nf = s.n_features();
    for (int e = 0; e < s.n_elements(); ++e) coarsen_element(s.element(e), nf, c.element(e));
    return c;
}

// ---------------------------------------------------------------------------
// Snapshot binary format (little-endian):
//   magic "SRGTSNAP", version u32 = 1, nex u32, ney u32, p u32, nf u32,
//   Lx f64, Ly f64, time f64, nf x (u16 length + ASCII name),
//   data f64[nex*ney*(p+1)^2*nf] with the feature index fastest.
// ---------------------------------------------------------------------------

inline constexpr char kSnapshotMagic[9] = "SRGTSNAP";
inline constexpr uint32_t kSnapshotVersion = 1;

inline void write_snapshot(const Snapshot& s, std::ostream& os) {
    if (s.data.size() != s.expected_size())
        throw format_error("write_snapshot: data length does not match header");
    for (double v : s.data)
        if (!std::isfinite(v)) throw format_error("write_snapshot: non-finite value in data");
    write_magic(os, kSnapshotMagic);
    write_u32(os, kSnapshotVersion);
    write_u32(os, static_cast<uint32_t>(s.nex));
    write_u32(os, static_cast<uint32_t>(s.ney));
    write_u32(os, static_cast<uint32_t>(s.p));
    write_u32(os, static_cast<uint32_t>(s.n_features()));
    write_f64(os, s.Lx);
    write_f64(os, s.Ly);
    write_f64(os, s.time);
    for (const auto& name : s.feature_names) {
        write_u16(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    write_f64_array(os, s.data.data(), s.data.size());
    if (!os) throw io_error("write_snapshot: stream write failed");
}

inline void write_snapshot(const Snapshot& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("write_snapshot: cannot open " + path);
    write_snapshot(s, os);
}

inline Snapshot read_snapshot(std::istream& is) {
    expect_magic(is, kSnapshotMagic, "snapshot");
    const uint32_t version = read_u32(is, "version");
    if (version != kSnapshotVersion)
        throw format_error("read_snapshot: unsupported version " + std::to_string(version));
    Snapshot s;
    s.nex = static_cast<int>(read_u32(is, "nex"));
    s.ney = static_cast<int>(read_u32(is, "ney"));
    s.p = static_cast<int>(read_u32(is, "p"));
    const uint32_t nf = read_u32(is, "nf");
    s.Lx = read_f64(is, "Lx");
    s.Ly = read_f64(is, "Ly");
    s.time = read_f64(is, "time");
    if (s.nex < 1 || s.ney < 1 || s.p < 1 || nf < 1)
        throw format_error("read_snapshot: invalid header dimensions");
    s.feature_names.resize(nf);
    for (auto& name : s.feature_names) {
        const uint16_t len = read_u16(is, "feature name length");
        name.resize(len);
        is.read(name.data(), len);
        if (!is) throw format_error("truncated file while reading feature name");
    }
    s.data.resize(s.expected_size());
    read_f64_array(is, s.data.data(), s.data.size(), "snapshot data");
    for (double v : s.data)
        if (!std::isfinite(v)) throw format_error("read_snapshot: non-finite value in data");
    return s;
}

inline Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("read_snapshot: cannot open " + path);
    return read_snapshot(is);
}

}  // namespace srgt

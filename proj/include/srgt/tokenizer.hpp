#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/dense.hpp"
#include "srgt/interp.hpp"
#include "srgt/neighborhood.hpp"
#include "srgt/snapshot.hpp"

namespace srgt {

// Feature-wise normalization statistics over the coarse query + neighborhood.
// Only coarse information enters, so the same stats are available at
// inference time and predictions can be mapped back to physical units.
struct NormStats {
    std::array<double, kNumFeatures> mean{};
    std::array<double, kNumFeatures> stddev{};
};

inline constexpr double kStdFloor = 1e-8;

inline NormStats neighborhood_stats(const Snapshot& coarse, const Neighborhood& nbh) {
    NormStats stats;
    const int npts = coarse.points_per_element();
    const int nf = coarse.n_features();
    auto accumulate = [&](int e, std::array<double, kNumFeatures>& acc, auto&& fn) {
        for (int j = 0; j < npts; ++j)
            for (int f = 0; f < nf; ++f) acc[static_cast<size_t>(f)] += fn(coarse.at(e, j, f), f);
    };
    std::array<double, kNumFeatures> sum{};
    accumulate(nbh.query, sum, [](double v, int) { return v; });
    for (int e : nbh.neighbors) accumulate(e, sum, [](double v, int) { return v; });
    const double n = static_cast<double>(nbh.n_tokens()) * npts;
    for (int f = 0; f < nf; ++f) stats.mean[static_cast<size_t>(f)] = sum[static_cast<size_t>(f)] / n;

    std::array<double, kNumFeatures> ss{};
    auto dev = [&](double v, int f) {
        const double d = v - stats.mean[static_cast<size_t>(f)];
        return d * d;
    };
    accumulate(nbh.query, ss, dev);
    for (int e : nbh.neighbors) accumulate(e, ss, dev);
    for (int f = 0; f < nf; ++f)
        stats.stddev[static_cast<size_t>(f)] = std::max(std::sqrt(ss[static_cast<size_t>(f)] / n), kStdFloor);
    return stats;
}

// In-place feature-wise scaling of a flat (point-major, feature-fastest) field.
inline void normalize(std::span<double> values, const NormStats& stats) {
    const size_t nf = kNumFeatures;
    for (size_t i = 0; i < values.size(); ++i) {
        const size_t f = i % nf;
        values[i] = (values[i] - stats.mean[f]) / stats.stddev[f];
    }
}

inline void denormalize(std::span<double> values, const NormStats& stats) {
    const size_t nf = kNumFeatures;
    for (size_t i = 0; i < values.size(); ++i) {
        const size_t f = i % nf;
        values[i] = values[i] * stats.stddev[f] + stats.mean[f];
    }
}

// One query element's model input/output pair. `target` is empty for
// inference-time samples; everything else is identical between training and
// inference construction.
struct TrainingSample {
    Mat tokens;     // (1+K) x 52, normalized coarse fields, row 0 = query
    Mat positions;  // (1+K) x 3
    Vec baseline;   // 208, scaled KNN-interpolated fine query field
    Vec target;     // 208, scaled fine query field (empty at inference)
    NormStats stats;
    uint32_t snapshot_id = 0;
    uint32_t element_id = 0;
    uint8_t cluster = 0;
};

inline constexpr int kTokenDim = 52;   // 13 features * 4 coarse GLL points
inline constexpr int kOutputDim = 208; // 13 features * 16 fine GLL points

// Builds the inference-time portion of a sample: tokens, positions, stats and
// the interpolation baseline, all from the coarse snapshot alone.
inline TrainingSample build_input(const Mesh& mesh, const Snapshot& coarse, int query, int K,
                                  const std::vector<double>& gll3, const InterpConfig& icfg) {
    if (coarse.p != 1) throw config_error("build_input: coarse snapshot must be p=1");
    if (coarse.n_features() != kNumFeatures)
        throw config_error("build_input: expected " + std::to_string(kNumFeatures) + " features");
    const Neighborhood nbh = knn_neighbors(mesh, query, K);
    TrainingSample s;
    s.element_id = static_cast<uint32_t>(query);
    s.stats = neighborhood_stats(coarse, nbh);
    s.positions = relative_positions(mesh, nbh);

    s.tokens = Mat(nbh.n_tokens(), kTokenDim);
    std::vector<double> buf(kTokenDim);
    auto fill_row = [&](int row, int e) {
        const auto ev = coarse.element(e);
        std::copy(ev.begin(), ev.end(), buf.begin());
        normalize(buf, s.stats);
        for (int c = 0; c < kTokenDim; ++c) s.tokens(row, c) = buf[static_cast<size_t>(c)];
    };
    fill_row(0, query);
    for (int j = 0; j < nbh.K(); ++j) fill_row(j + 1, nbh.neighbors[static_cast<size_t>(j)]);

    std::vector<double> base = interp_element(mesh, coarse, nbh, gll3, icfg);
    normalize(base, s.stats);
    s.baseline = Eigen::Map<const Vec>(base.data(), static_cast<Eigen::Index>(base.size()));
    return s;
}

// Training-time sample: the inference input plus the scaled fine target.
inline TrainingSample build_sample(const Mesh& mesh, const Snapshot& coarse, const Snapshot& fine,
                                   int query, int K, const std::vector<double>& gll3,
                                   const InterpConfig& icfg) {
    if (fine.p != 3) throw config_error("build_sample: fine snapshot must be p=3");
    if (!coarse.same_grid(fine) || coarse.time != fine.time)
        throw config_error("build_sample: coarse/fine snapshot metadata mismatch");
    TrainingSample s = build_input(mesh, coarse, query, K, gll3, icfg);
    const auto fv = fine.element(query);
    std::vector<double> tgt(fv.begin(), fv.end());
    normalize(tgt, s.stats);
    s.target = Eigen::Map<const Vec>(tgt.data(), static_cast<Eigen::Index>(tgt.size()));
    return s;
}

// ---------------------------------------------------------------------------
// Dataset file: magic "SRGTDSET", u32 version, config block (K, N_f, p_in,
// p_out, N_t as u32), u64 sample count, then fixed-size records:
//   provenance (u32 snapshot id, u32 element id, u8 cluster),
//   stats (2*13 f64), positions (N_t*3 f64), tokens (N_t*52 f64),
//   baseline (208 f64), target (208 f64). All little-endian.
// ---------------------------------------------------------------------------

struct DatasetConfig {
    int K = 26;
    int n_features = kNumFeatures;
    int p_in = 1;
    int p_out = 3;

    int n_tokens() const { return 1 + K; }
    bool operator==(const DatasetConfig&) const = default;
};

inline constexpr char kDatasetMagic[9] = "SRGTDSET";
inline constexpr uint32_t kDatasetVersion = 1;

inline void write_dataset(const std::vector<TrainingSample>& samples, const DatasetConfig& cfg,
                          const std::string& path) {
    if (samples.empty()) throw config_error("write_dataset: no samples");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("write_dataset: cannot open " + path);
    write_magic(os, kDatasetMagic);
    write_u32(os, kDatasetVersion);
    write_u32(os, static_cast<uint32_t>(cfg.K));
    write_u32(os, static_cast<uint32_t>(cfg.n_features));
    write_u32(os, static_cast<uint32_t>(cfg.p_in));
    write_u32(os, static_cast<uint32_t>(cfg.p_out));
    write_u32(os, static_cast<uint32_t>(cfg.n_tokens()));
    write_u64(os, samples.size());
    const int nt = cfg.n_tokens();
    for (const auto& s : samples) {
        if (s.tokens.rows() != nt || s.tokens.cols() != kTokenDim || s.positions.rows() != nt ||
            s.baseline.size() != kOutputDim || s.target.size() != kOutputDim)
            throw config_error("write_dataset: sample shape does not match dataset config");
        write_u32(os, s.snapshot_id);
        write_u32(os, s.element_id);
        os.put(static_cast<char>(s.cluster));
        write_f64_array(os, s.stats.mean.data(), kNumFeatures);
        write_f64_array(os, s.stats.stddev.data(), kNumFeatures);
        write_f64_array(os, s.positions.data(), static_cast<size_t>(nt) * 3);
        write_f64_array(os, s.tokens.data(), static_cast<size_t>(nt) * kTokenDim);
        write_f64_array(os, s.baseline.data(), kOutputDim);
        write_f64_array(os, s.target.data(), kOutputDim);
    }
    if (!os) throw io_error("write_dataset: write failed for " + path);
}

inline std::pair<DatasetConfig, std::vector<TrainingSample>> read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("read_dataset: cannot open " + path);
    expect_magic(is, kDatasetMagic, "dataset");
    const uint32_t version = read_u32(is, "version");
    if (version != kDatasetVersion)
        throw format_error("read_dataset: unsupported version " + std::to_string(version));
    DatasetConfig cfg;
    cfg.K = static_cast<int>(read_u32(is, "K"));
    cfg.n_features = static_cast<int>(read_u32(is, "n_features"));
    cfg.p_in = static_cast<int>(read_u32(is, "p_in"));
    cfg.p_out = static_cast<int>(read_u32(is, "p_out"));
    const uint32_t nt = read_u32(is, "n_tokens");
    if (static_cast<int>(nt) != cfg.n_tokens())
        throw format_error("read_dataset: inconsistent token count in config block");
    if (cfg.n_features != kNumFeatures || cfg.p_in != 1 || cfg.p_out != 3)
        throw format_error("read_dataset: unsupported dataset config");
    const uint64_t count = read_u64(is, "sample count");
    std::vector<TrainingSample> samples(count);
    for (auto& s : samples) {
        s.snapshot_id = read_u32(is, "snapshot id");
        s.element_id = read_u32(is, "element id");
        int c = is.get();
        if (c == EOF) throw format_error("read_dataset: truncated record");
        s.cluster = static_cast<uint8_t>(c);
        read_f64_array(is, s.stats.mean.data(), kNumFeatures, "stats mean");
        read_f64_array(is, s.stats.stddev.data(), kNumFeatures, "stats std");
        s.positions = Mat(nt, 3);
        read_f64_array(is, s.positions.data(), static_cast<size_t>(nt) * 3, "positions");
        s.tokens = Mat(nt, kTokenDim);
        read_f64_array(is, s.tokens.data(), static_cast<size_t>(nt) * kTokenDim, "tokens");
        s.baseline = Vec(kOutputDim);
        read_f64_array(is, s.baseline.data(), kOutputDim, "baseline");
        s.target = Vec(kOutputDim);
        read_f64_array(is, s.target.data(), kOutputDim, "target");
    }
    if (is.peek() != EOF) throw format_error("read_dataset: trailing bytes after last record");
    return {cfg, std::move(samples)};
}

// Guarded read: rejects a dataset whose config does not match the pipeline's.
inline std::vector<TrainingSample> read_dataset_checked(const std::string& path,
                                                        const DatasetConfig& expected) {
    auto [cfg, samples] = read_dataset(path);
    if (!(cfg == expected))
        throw config_error("read_dataset: dataset config (K=" + std::to_string(cfg.K) +
                           ") does not match pipeline config (K=" + std::to_string(expected.K) + ")");
    return samples;
}

}  // namespace srgt

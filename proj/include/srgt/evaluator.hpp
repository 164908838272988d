#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/gll.hpp"
#include "srgt/interp.hpp"
#include "srgt/model.hpp"
#include "srgt/snapshot.hpp"
#include "srgt/tokenizer.hpp"

namespace srgt {

// ---------------------------------------------------------------------------
// Full-snapshot super-resolution. Every element goes through the same sample
// construction as training (build_input), so there is no train/infer skew.
// With use_model=false the decoded residual is replaced by zero and the
// output is the KNN-interpolation baseline mapped through the identical
// scale/descale path.
// ---------------------------------------------------------------------------

inline Snapshot super_resolve_snapshot(const Snapshot& coarse, const ModelParams& params,
                                       const ModelConfig& mcfg, const PipelineConfig& pipe,
                                       bool use_model = true) {
    if (coarse.p != 1) throw config_error("super_resolve_snapshot: input must be p=1");
    const Mesh mesh = mesh_of(coarse);
    const Mesh mesh3 = build_mesh(coarse.nex, coarse.ney, coarse.Lx, coarse.Ly, 3);
    const std::vector<double> gll3 = mesh3.gll_1d;
    Snapshot out = make_snapshot(mesh3, coarse.time, coarse.feature_names);

    const int n = mesh.n_elements();
    constexpr int kChunk = 512;
    std::vector<TrainingSample> chunk;
    for (int start = 0; start < n; start += kChunk) {
        const int count = std::min(kChunk, n - start);
        chunk.assign(static_cast<size_t>(count), TrainingSample{});
#pragma omp parallel for schedule(static)
        for (int i = 0; i < count; ++i)
            chunk[static_cast<size_t>(i)] =
                build_input(mesh, coarse, start + i, pipe.K, gll3, pipe.interp);

        std::vector<int> idx(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = i;
        Mat pred;
        if (use_model) {
            const StackedBatch batch = stack_samples(chunk, idx, false);
            pred = forward_batch(batch, params, mcfg, Mode::eval, 0, nullptr);
        } else {
            pred = Mat(count, kOutputDim);
            for (int i = 0; i < count; ++i)
                pred.row(i) = chunk[static_cast<size_t>(i)].baseline.transpose() +
                              Vec::Zero(kOutputDim).transpose();
        }
        for (int i = 0; i < count; ++i) {
            auto dst = out.element(start + i);
            for (int c = 0; c < kOutputDim; ++c) dst[static_cast<size_t>(c)] = pred(i, c);
            denormalize(dst, chunk[static_cast<size_t>(i)].stats);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Error metrics.
// ---------------------------------------------------------------------------

struct ErrorField {
    std::vector<double> abs_err;  // per point
    std::vector<double> pct_err;  // per point, 100 * abs / target range
    double target_range = 0.0;
};

inline ErrorField error_field(const Snapshot& pred, const Snapshot& target, int feature) {
    if (!pred.same_grid(target) || pred.p != target.p || pred.time != target.time)
        throw config_error("error_field: snapshot metadata mismatch");
    const int n = pred.n_elements();
    const int npts = pred.points_per_element();
    ErrorField ef;
    ef.abs_err.resize(static_cast<size_t>(n) * npts);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int e = 0; e < n; ++e)
        for (int j = 0; j < npts; ++j) {
            const double t = target.at(e, j, feature);
            lo = std::min(lo, t);
            hi = std::max(hi, t);
            ef.abs_err[static_cast<size_t>(e) * npts + j] = std::abs(pred.at(e, j, feature) - t);
        }
    ef.target_range = std::max(hi - lo, 1e-12);
    ef.pct_err.resize(ef.abs_err.size());
    for (size_t i = 0; i < ef.abs_err.size(); ++i)
        ef.pct_err[i] = 100.0 * ef.abs_err[i] / ef.target_range;
    return ef;
}

// Mean and max of |sum of species mass fractions - 1| over all points.
inline std::pair<double, double> mass_conservation(const Snapshot& s) {
    const int n = s.n_elements();
    const int npts = s.points_per_element();
    double total = 0.0;
    double worst = 0.0;
    for (int e = 0; e < n; ++e)
        for (int j = 0; j < npts; ++j) {
            double sum = 0.0;
            for (int f = kFirstSpecies; f < kFirstSpecies + kNumSpecies; ++f) sum += s.at(e, j, f);
            const double dev = std::abs(sum - 1.0);
            total += dev;
            worst = std::max(worst, dev);
        }
    return {total / (static_cast<double>(n) * npts), worst};
}

// Elements whose internal temperature range exceeds the threshold; the
// default threshold is 0.2 * (T_b - T_u) when the generator parameters are
// available, otherwise 0.2 * the snapshot-global T range.
inline std::vector<bool> front_region(const Snapshot& target, double t_range_threshold) {
    const int n = target.n_elements();
    const int npts = target.points_per_element();
    std::vector<bool> front(static_cast<size_t>(n), false);
    for (int e = 0; e < n; ++e) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int j = 0; j < npts; ++j) {
            const double t = target.at(e, j, F_T);
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        front[static_cast<size_t>(e)] = (hi - lo) > t_range_threshold;
    }
    return front;
}

struct FeatureMetrics {
    double rmse_model = 0.0;
    double rmse_interp = 0.0;
    double ratio = 0.0;  // rmse_model / rmse_interp
    double max_abs = 0.0;
    double pct_mean = 0.0;
    double pct_p99 = 0.0;
    double pct_max = 0.0;
    double front_rmse_model = 0.0;
    double front_rmse_interp = 0.0;
};

struct SnapshotReport {
    int snapshot_id = -1;
    double time = 0.0;
    std::array<FeatureMetrics, kNumFeatures> features{};
    double mass_mean_model = 0.0;
    double mass_max_model = 0.0;
    double mass_mean_interp = 0.0;
    double mass_max_interp = 0.0;
    int n_front_elements = 0;
};

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t i = std::min(v.size() - 1, static_cast<size_t>(std::ceil(q * v.size())) - 1);
    return v[std::max<size_t>(i, 0)];
}

// Per-feature comparison of a model prediction and the interpolation baseline
// against the target, with front-region errors reported separately.
inline SnapshotReport compare_baseline(const Snapshot& model_pred, const Snapshot& interp_pred,
                                       const Snapshot& target, double t_range_threshold) {
    if (!model_pred.same_grid(target) || !interp_pred.same_grid(target))
        throw config_error("compare_baseline: snapshot metadata mismatch");
    SnapshotReport rep;
    rep.time = target.time;
    const int n = target.n_elements();
    const int npts = target.points_per_element();
    const std::vector<bool> front = front_region(target, t_range_threshold);
    for (bool f : front) rep.n_front_elements += f ? 1 : 0;

    for (int f = 0; f < kNumFeatures; ++f) {
        const ErrorField ef_model = error_field(model_pred, target, f);
        const ErrorField ef_interp = error_field(interp_pred, target, f);
        FeatureMetrics& m = rep.features[static_cast<size_t>(f)];
        double sq_m = 0.0, sq_i = 0.0, fsq_m = 0.0, fsq_i = 0.0, pct_sum = 0.0;
        size_t front_pts = 0;
        for (int e = 0; e < n; ++e)
            for (int j = 0; j < npts; ++j) {
                const size_t i = static_cast<size_t>(e) * npts + j;
                sq_m += ef_model.abs_err[i] * ef_model.abs_err[i];
                sq_i += ef_interp.abs_err[i] * ef_interp.abs_err[i];
                m.max_abs = std::max(m.max_abs, ef_model.abs_err[i]);
                m.pct_max = std::max(m.pct_max, ef_model.pct_err[i]);
                pct_sum += ef_model.pct_err[i];
                if (front[static_cast<size_t>(e)]) {
                    fsq_m += ef_model.abs_err[i] * ef_model.abs_err[i];
                    fsq_i += ef_interp.abs_err[i] * ef_interp.abs_err[i];
                    ++front_pts;
                }
            }
        const double pts = static_cast<double>(n) * npts;
        m.rmse_model = std::sqrt(sq_m / pts);
        m.rmse_interp = std::sqrt(sq_i / pts);
        m.ratio = m.rmse_model / std::max(m.rmse_interp, 1e-300);
        m.pct_mean = pct_sum / pts;
        m.pct_p99 = percentile(ef_model.pct_err, 0.99);
        if (front_pts > 0) {
            m.front_rmse_model = std::sqrt(fsq_m / static_cast<double>(front_pts));
            m.front_rmse_interp = std::sqrt(fsq_i / static_cast<double>(front_pts));
        }
    }
    const auto [mm, mx] = mass_conservation(model_pred);
    rep.mass_mean_model = mm;
    rep.mass_max_model = mx;
    const auto [im, ix] = mass_conservation(interp_pred);
    rep.mass_mean_interp = im;
    rep.mass_max_interp = ix;
    return rep;
}

struct EvalReport {
    std::vector<SnapshotReport> snapshots;

    double median_ratio() const {
        std::vector<double> ratios;
        for (const auto& s : snapshots)
            for (const auto& f : s.features) ratios.push_back(f.ratio);
        if (ratios.empty()) return 0.0;
        std::sort(ratios.begin(), ratios.end());
        const size_t n = ratios.size();
        return n % 2 == 1 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
    }
};

// ---------------------------------------------------------------------------
// Exports: CSV report, human-readable text summary, and PGM field images.
// ---------------------------------------------------------------------------

inline void export_report_csv(const EvalReport& rep, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("export_report_csv: cannot open " + path);
    os << "snapshot,feature,rmse_model,rmse_interp,ratio,max_abs,pct_mean,pct_p99,pct_max,"
          "front_rmse_model,front_rmse_interp,mass_mean_model,mass_max_model\n";
    char buf[512];
    for (const auto& s : rep.snapshots) {
        for (int f = 0; f < kNumFeatures; ++f) {
            const FeatureMetrics& m = s.features[static_cast<size_t>(f)];
            std::snprintf(buf, sizeof(buf),
                          "%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          s.snapshot_id, feature_names()[static_cast<size_t>(f)].c_str(),
                          m.rmse_model, m.rmse_interp, m.ratio, m.max_abs, m.pct_mean, m.pct_p99,
                          m.pct_max, m.front_rmse_model, m.front_rmse_interp, s.mass_mean_model,
                          s.mass_max_model);
            os << buf;
        }
    }
    if (!os) throw io_error("export_report_csv: write failed");
}

inline void export_report_text(const EvalReport& rep, std::ostream& os) {
    char buf[256];
    for (const auto& s : rep.snapshots) {
        std::snprintf(buf, sizeof(buf), "snapshot %d (t = %.6g s), %d front elements\n",
                      s.snapshot_id, s.time, s.n_front_elements);
        os << buf;
        std::snprintf(buf, sizeof(buf), "  %-7s %12s %12s %8s %9s %9s\n", "feature", "rmse",
                      "rmse_interp", "ratio", "pct_mean", "pct_max");
        os << buf;
        for (int f = 0; f < kNumFeatures; ++f) {
            const FeatureMetrics& m = s.features[static_cast<size_t>(f)];
            std::snprintf(buf, sizeof(buf), "  %-7s %12.5g %12.5g %8.3f %8.3f%% %8.3f%%\n",
                          feature_names()[static_cast<size_t>(f)].c_str(), m.rmse_model,
                          m.rmse_interp, m.ratio, m.pct_mean, m.pct_max);
            os << buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "  mass |sum(Y)-1|: mean %.3g max %.3g (interp: mean %.3g max %.3g)\n",
                      s.mass_mean_model, s.mass_max_model, s.mass_mean_interp, s.mass_max_interp);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "median rmse ratio (model/interp) over all rows: %.4f\n",
                  rep.median_ratio());
    os << buf;
}

inline void export_report_text(const EvalReport& rep, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("export_report_text: cannot open " + path);
    export_report_text(rep, os);
}

// Lagrange basis values of the element's 1D GLL nodes at sample points.
inline Mat lagrange_basis(const std::vector<double>& nodes, const std::vector<double>& at) {
    Mat basis(static_cast<Eigen::Index>(at.size()), static_cast<Eigen::Index>(nodes.size()));
    for (size_t a = 0; a < at.size(); ++a)
        for (size_t j = 0; j < nodes.size(); ++j) {
            double l = 1.0;
            for (size_t m = 0; m < nodes.size(); ++m)
                if (m != j) l *= (at[a] - nodes[m]) / (nodes[j] - nodes[m]);
            basis(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = l;
        }
    return basis;
}

// 8-bit P5 PGM of one feature, one 4x4 pixel tile per element (the element's
// polynomial sampled at the p=3 GLL points), min-max normalized over the
// snapshot. The scale is written to <path>.scale.txt. Degenerate (constant)
// fields render mid-gray.
inline void export_field_image(const Snapshot& s, int feature, const std::string& path) {
    const int tile = 4;
    const std::vector<double> sample_nodes = gll_nodes(3);
    const Mat basis = lagrange_basis(mesh_of(s).gll_1d, sample_nodes);
    const int n1 = s.p + 1;

    const int width = tile * s.nex;
    const int height = tile * s.ney;
    std::vector<double> values(static_cast<size_t>(width) * height, 0.0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int e = 0; e < s.n_elements(); ++e) {
        const int ix = e % s.nex;
        const int iy = e / s.nex;
        for (int a = 0; a < tile; ++a)       // local y sample
            for (int b = 0; b < tile; ++b) { // local x sample
                double v = 0.0;
                for (int jy = 0; jy < n1; ++jy)
                    for (int jx = 0; jx < n1; ++jx)
                        v += basis(a, jy) * basis(b, jx) * s.at(e, jy * n1 + jx, feature);
                const int row = (s.ney - 1 - iy) * tile + (tile - 1 - a);
                const int col = ix * tile + b;
                values[static_cast<size_t>(row) * width + col] = v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("export_field_image: cannot open " + path);
    os << "P5\n" << width << " " << height << "\n255\n";
    const double range = hi - lo;
    for (double v : values) {
        const int g = range > 0.0 ? static_cast<int>(std::lround(255.0 * (v - lo) / range)) : 128;
        os.put(static_cast<char>(std::clamp(g, 0, 255)));
    }
    if (!os) throw io_error("export_field_image: write failed for " + path);

    std::ofstream scale(path + ".scale.txt");
    if (!scale) throw io_error("export_field_image: cannot open scale sidecar");
    char buf[128];
    std::snprintf(buf, sizeof(buf), "min = %.17g\nmax = %.17g\n", lo, hi);
    scale << buf;
}

}  // namespace srgt

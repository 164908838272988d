#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "srgt/evaluator.hpp"
#include "srgt/synth.hpp"

using namespace srgt;

namespace {

struct Pipeline {
    Mesh mesh3;
    SurrogateParams params;
    Snapshot fine;
    Snapshot coarse;
    ModelConfig mcfg;
    ModelParams mparams;
    PipelineConfig pipe;

    Pipeline() {
        mesh3 = build_mesh(12, 6, 2.0, 1.0, 3);
        params = default_surrogate_params(mesh3);
        fine = generate_snapshot(mesh3, 0.7e-6, params);
        coarse = coarsen_snapshot(fine);
        mcfg.n_latent = 16;
        mcfg.n_blocks = 1;
        mcfg.head_dim = 8;
        mcfg.dropout_p = 0.0;
        mparams = init_params(mcfg, 3);
        pipe.K = 8;
    }
};

}  // namespace

TEST_CASE("error_field") {
    Pipeline px;

    SECTION("identical snapshots give zero error") {
        const ErrorField ef = error_field(px.fine, px.fine, F_T);
        for (double v : ef.abs_err) CHECK(v == 0.0);
        for (double v : ef.pct_err) CHECK(v == 0.0);
    }
    SECTION("constant offset maps to a constant percent of range") {
        Snapshot pred = px.fine;
        const double eps = 2.5;
        for (int e = 0; e < pred.n_elements(); ++e)
            for (int j = 0; j < 16; ++j) pred.at(e, j, F_T) += eps;
        const ErrorField ef = error_field(pred, px.fine, F_T);
        const double expect = 100.0 * eps / ef.target_range;
        for (double v : ef.pct_err) CHECK_THAT(v, Catch::Matchers::WithinRel(expect, 1e-12));
    }
    SECTION("percent error is invariant under a shared affine map") {
        Snapshot pred = px.fine;
        Rng rng(5);
        for (int e = 0; e < pred.n_elements(); ++e)
            for (int j = 0; j < 16; ++j) pred.at(e, j, F_P) *= 1.0 + 0.01 * uniform_double(rng);
        const ErrorField base = error_field(pred, px.fine, F_P);
        Snapshot pred2 = pred, target2 = px.fine;
        const double a = 3.7, b = -42.0;
        for (int e = 0; e < pred.n_elements(); ++e)
            for (int j = 0; j < 16; ++j) {
                pred2.at(e, j, F_P) = a * pred.at(e, j, F_P) + b;
                target2.at(e, j, F_P) = a * px.fine.at(e, j, F_P) + b;
            }
        const ErrorField mapped = error_field(pred2, target2, F_P);
        for (size_t i = 0; i < base.pct_err.size(); ++i)
            CHECK_THAT(mapped.pct_err[i],
                       Catch::Matchers::WithinAbs(base.pct_err[i], 1e-9 * (1.0 + base.pct_err[i])));
    }
    SECTION("percent values match a direct recomputation oracle") {
        Snapshot pred = px.fine;
        Rng rng(6);
        for (auto& v : pred.data) v += uniform_range(rng, -1.0, 1.0);
        const ErrorField ef = error_field(pred, px.fine, F_UX);
        double lo = px.fine.at(0, 0, F_UX), hi = lo;
        for (int e = 0; e < px.fine.n_elements(); ++e)
            for (int j = 0; j < 16; ++j) {
                lo = std::min(lo, px.fine.at(e, j, F_UX));
                hi = std::max(hi, px.fine.at(e, j, F_UX));
            }
        Rng rng2(7);
        for (int probe = 0; probe < 50; ++probe) {
            const int e = static_cast<int>(uniform_below(rng2, static_cast<uint64_t>(px.fine.n_elements())));
            const int j = static_cast<int>(uniform_below(rng2, 16));
            const double expect =
                100.0 * std::abs(pred.at(e, j, F_UX) - px.fine.at(e, j, F_UX)) / (hi - lo);
            CHECK_THAT(ef.pct_err[static_cast<size_t>(e) * 16 + j],
                       Catch::Matchers::WithinRel(expect, 1e-12));
        }
    }
    SECTION("metadata mismatch rejected") {
        Snapshot other = px.fine;
        other.time += 1.0;
        CHECK_THROWS_AS(error_field(other, px.fine, F_T), config_error);
    }
}

TEST_CASE("mass_conservation") {
    Pipeline px;

    SECTION("generator ground truth is closed to 1e-14") {
        const auto [mean, mx] = mass_conservation(px.fine);
        CHECK(mx < 1e-14);
        CHECK(mean <= mx);
    }
    SECTION("a single perturbed point dominates the max") {
        Snapshot s = px.fine;
        s.at(3, 7, F_Y_N2) += 0.002;
        const auto [mean, mx] = mass_conservation(s);
        CHECK_THAT(mx, Catch::Matchers::WithinRel(0.002, 1e-9));
    }
    SECTION("interpolated snapshot stays closed to 1e-12") {
        const Snapshot interp =
            super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe, false);
        const auto [mean, mx] = mass_conservation(interp);
        CHECK(mx < 1e-12);
    }
}

TEST_CASE("super_resolve_snapshot") {
    Pipeline px;

    SECTION("zero decoder equals the interp-only path bitwise") {
        ModelParams z = px.mparams;
        z.decoder.w.setZero();
        z.decoder.b.setZero();
        const Snapshot a = super_resolve_snapshot(px.coarse, z, px.mcfg, px.pipe, true);
        const Snapshot b = super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe, false);
        REQUIRE(a.data.size() == b.data.size());
        CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
    }
    SECTION("output has the fine point count and metadata") {
        const Snapshot out = super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe);
        CHECK(out.p == 3);
        CHECK(out.n_elements() == px.coarse.n_elements());
        CHECK(out.points_per_element() == 16);
        CHECK(out.time == px.coarse.time);
    }
    SECTION("deterministic") {
        const Snapshot a = super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe);
        const Snapshot b = super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe);
        CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0);
    }
    SECTION("interp-only output is close to the KNN-interpolated field") {
        // Scale/descale roundtrip separates the two only at machine precision.
        const Snapshot out = super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe, false);
        const Mesh mesh1 = mesh_of(px.coarse);
        const std::vector<double> gll3 = gll_nodes(3);
        const Neighborhood nbh = knn_neighbors(mesh1, 20, px.pipe.K);
        const auto direct = interp_element(mesh1, px.coarse, nbh, gll3, px.pipe.interp);
        for (int j = 0; j < 16; ++j)
            for (int f = 0; f < kNumFeatures; ++f) {
                const double d = direct[static_cast<size_t>(j) * kNumFeatures + f];
                CHECK_THAT(out.at(20, j, f),
                           Catch::Matchers::WithinAbs(d, 1e-9 * (1.0 + std::abs(d))));
            }
    }
    SECTION("p=3 input rejected") {
        CHECK_THROWS_AS(super_resolve_snapshot(px.fine, px.mparams, px.mcfg, px.pipe),
                        config_error);
    }
}

TEST_CASE("compare_baseline") {
    Pipeline px;
    const Snapshot interp = super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe, false);
    const double thr = 0.2 * (px.params.T_b - px.params.T_u);

    SECTION("model == interp gives ratio one") {
        const SnapshotReport rep = compare_baseline(interp, interp, px.fine, thr);
        for (const auto& f : rep.features) CHECK_THAT(f.ratio, Catch::Matchers::WithinRel(1.0, 1e-12));
        CHECK(rep.n_front_elements > 0);
        CHECK(rep.n_front_elements < px.fine.n_elements());
    }
    SECTION("model == target gives ratio zero") {
        const SnapshotReport rep = compare_baseline(px.fine, interp, px.fine, thr);
        for (const auto& f : rep.features) {
            CHECK(f.rmse_model == 0.0);
            CHECK(f.ratio == 0.0);
        }
    }
    SECTION("front region is localized around the front") {
        const std::vector<bool> front = front_region(px.fine, thr);
        const Mesh mesh = mesh_of(px.fine);
        const double h = mesh.spacing();
        int n_front = 0;
        for (int e = 0; e < px.fine.n_elements(); ++e) {
            if (!front[static_cast<size_t>(e)]) continue;
            ++n_front;
            const auto& c = mesh.centroids[static_cast<size_t>(e)];
            const double xf = front_position(c[1], px.fine.time, px.params);
            CHECK(std::abs(c[0] - xf) < 6.0 * h);
        }
        CHECK(n_front > 0);
        CHECK(n_front < px.fine.n_elements() / 2);
    }
}

TEST_CASE("report csv reloads to the same stats") {
    Pipeline px;
    const Snapshot interp = super_resolve_snapshot(px.coarse, px.mparams, px.mcfg, px.pipe, false);
    EvalReport rep;
    SnapshotReport sr = compare_baseline(interp, interp, px.fine, 100.0);
    sr.snapshot_id = 4;
    rep.snapshots.push_back(sr);

    const auto dir = std::filesystem::temp_directory_path() / "srgt_report_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "report.csv").string();
    export_report_csv(rep, path);

    std::ifstream is(path);
    std::string header, line;
    std::getline(is, header);
    CHECK(header.rfind("snapshot,feature,", 0) == 0);
    int row = 0;
    while (std::getline(is, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        CHECK(cell == "4");
        std::getline(ss, cell, ',');
        CHECK(cell == feature_names()[static_cast<size_t>(row)]);
        std::getline(ss, cell, ',');
        const FeatureMetrics& m = sr.features[static_cast<size_t>(row)];
        CHECK_THAT(std::stod(cell), Catch::Matchers::WithinAbs(m.rmse_model, 1e-9));
        ++row;
    }
    CHECK(row == kNumFeatures);
    std::filesystem::remove_all(dir);
}

TEST_CASE("pgm export") {
    Pipeline px;
    const auto dir = std::filesystem::temp_directory_path() / "srgt_pgm_test";
    std::filesystem::create_directories(dir);

    SECTION("dimensions and header") {
        const std::string path = (dir / "t.pgm").string();
        export_field_image(px.fine, F_T, path);
        std::ifstream is(path, std::ios::binary);
        std::string magic;
        int w, h, maxval;
        is >> magic >> w >> h >> maxval;
        CHECK(magic == "P5");
        CHECK(w == 4 * px.fine.nex);
        CHECK(h == 4 * px.fine.ney);
        CHECK(maxval == 255);
        is.get();  // single whitespace after header
        std::vector<char> pixels(static_cast<size_t>(w) * h);
        is.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
        CHECK(is.gcount() == static_cast<std::streamsize>(pixels.size()));
        CHECK(std::filesystem::exists(path + ".scale.txt"));
    }
    SECTION("constant field renders uniform gray") {
        Snapshot flat = px.fine;
        for (auto& v : flat.data) v = 3.0;
        const std::string path = (dir / "flat.pgm").string();
        export_field_image(flat, F_P, path);
        std::ifstream is(path, std::ios::binary);
        std::string magic;
        int w, h, maxval;
        is >> magic >> w >> h >> maxval;
        is.get();
        int c;
        bool uniform = true;
        int first = is.get();
        while ((c = is.get()) != EOF) uniform = uniform && (c == first);
        CHECK(uniform);
        CHECK(first == 128);
    }
    SECTION("p=1 snapshots rasterize through the bilinear interpolant") {
        const std::string path = (dir / "c.pgm").string();
        export_field_image(px.coarse, F_T, path);
        std::ifstream is(path, std::ios::binary);
        std::string magic;
        int w, h, maxval;
        is >> magic >> w >> h >> maxval;
        CHECK(w == 4 * px.coarse.nex);
        CHECK(h == 4 * px.coarse.ney);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("inference uses the training tokenizer path") {
    // Rebuild a training sample through the inference path and compare.
    Pipeline px;
    const Mesh mesh1 = mesh_of(px.coarse);
    const std::vector<double> gll3 = gll_nodes(3);
    const InterpConfig icfg;
    const TrainingSample full = build_sample(mesh1, px.coarse, px.fine, 30, 8, gll3, icfg);
    const TrainingSample inf = build_input(mesh1, px.coarse, 30, 8, gll3, icfg);
    CHECK(std::memcmp(full.tokens.data(), inf.tokens.data(),
                      sizeof(double) * static_cast<size_t>(full.tokens.size())) == 0);
    CHECK(std::memcmp(full.baseline.data(), inf.baseline.data(), sizeof(double) * 208) == 0);
}

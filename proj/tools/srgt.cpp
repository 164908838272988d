// srgt: synthetic detonation-like snapshot generation, dataset construction,
// graph-transformer training, and super-resolution evaluation.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 divergence.

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/config.hpp"
#include "srgt/evaluator.hpp"
#include "srgt/interp.hpp"
#include "srgt/model.hpp"
#include "srgt/sampler.hpp"
#include "srgt/snapshot.hpp"
#include "srgt/synth.hpp"
#include "srgt/tokenizer.hpp"
#include "srgt/trainer.hpp"

namespace fs = std::filesystem;
using namespace srgt;

namespace {

void echo_config(CLI::App* cmd, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create output directory " + out_dir + ": " + ec.message());
    // The root app serializes every option as <subcommand>.<key>, which the
    // root --config option reads back verbatim.
    CLI::App* root = cmd;
    while (root->get_parent() != nullptr) root = root->get_parent();
    const std::string text = root->config_to_str(true, false);
    std::ofstream os(out_dir + "/resolved.cfg");
    if (!os) throw io_error("cannot write resolved config in " + out_dir);
    os << text;
    std::cout << "[" << cmd->get_name() << "] resolved configuration:\n" << text;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
    std::string out;
    int nex = 64, ney = 32;
    double Lx = 2.0, Ly = 1.0;
    int snapshots = 40;
    double dt = 0.0;  // 0 = one element spacing per snapshot (h / D)
    uint64_t seed = 1;
    // Surrogate knobs; negative = derive from the mesh.
    double x0 = -1.0, A = -1.0, delta = -1.0, delta_s = -1.0;
    double D = 2000.0, omega = 2e5;
    int n_c = 3;
    double T_u = 300.0, T_b = 2900.0, T_s = 800.0;
    double P_u = 4e4, P_b = 6e5, P_s = 8e5, a_c = 0.3;
    double u_b = 800.0, u_s = 400.0, v_a = 200.0;
    double Y_H2_u = 0.0283, Y_O2_u = 0.2265, Y_H2O_b = 0.24;
    double alpha = 0.008;
    double R_s = 397.0;
    double jitter_frac = 0.05;
};

void add_gen(CLI::App& app, GenOptions& o) {
    CLI::App* cmd = app.add_subcommand("gen", "Generate a synthetic p=3 snapshot series");
    cmd->fallthrough();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--nex", o.nex, "Elements in x")->capture_default_str();
    cmd->add_option("--ney", o.ney, "Elements in y")->capture_default_str();
    cmd->add_option("--Lx", o.Lx, "Domain length in x (m)")->capture_default_str();
    cmd->add_option("--Ly", o.Ly, "Domain length in y (m)")->capture_default_str();
    cmd->add_option("--snapshots", o.snapshots, "Number of snapshots")->capture_default_str();
    cmd->add_option("--dt", o.dt, "Snapshot spacing (s); 0 = h/D")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Jitter RNG seed")->capture_default_str();
    cmd->add_option("--x0", o.x0, "Initial front position (m); <0 = 0.2 Lx")->capture_default_str();
    cmd->add_option("--D", o.D, "Front speed (m/s)")->capture_default_str();
    cmd->add_option("--A", o.A, "Corrugation amplitude (m); <0 = 0.01 Ly")->capture_default_str();
    cmd->add_option("--n_c", o.n_c, "Cells across the domain")->capture_default_str();
    cmd->add_option("--omega", o.omega, "Corrugation angular frequency (1/s)")->capture_default_str();
    cmd->add_option("--delta", o.delta, "Front thickness (m); <0 = 2.5 h")->capture_default_str();
    cmd->add_option("--delta_s", o.delta_s, "Spike width (m); <0 = 1.5 h")->capture_default_str();
    cmd->add_option("--T_u", o.T_u, "Unburnt temperature (K)")->capture_default_str();
    cmd->add_option("--T_b", o.T_b, "Burnt temperature (K)")->capture_default_str();
    cmd->add_option("--T_s", o.T_s, "Spike temperature bump (K)")->capture_default_str();
    cmd->add_option("--P_u", o.P_u, "Unburnt pressure (Pa)")->capture_default_str();
    cmd->add_option("--P_b", o.P_b, "Burnt pressure (Pa)")->capture_default_str();
    cmd->add_option("--P_s", o.P_s, "Spike pressure bump (Pa)")->capture_default_str();
    cmd->add_option("--a_c", o.a_c, "Cellular pressure modulation")->capture_default_str();
    cmd->add_option("--u_b", o.u_b, "Burnt x-velocity (m/s)")->capture_default_str();
    cmd->add_option("--u_s", o.u_s, "Spike x-velocity (m/s)")->capture_default_str();
    cmd->add_option("--v_a", o.v_a, "Transverse velocity scale (m/s)")->capture_default_str();
    cmd->add_option("--Y_H2_u", o.Y_H2_u, "Unburnt H2 mass fraction")->capture_default_str();
    cmd->add_option("--Y_O2_u", o.Y_O2_u, "Unburnt O2 mass fraction")->capture_default_str();
    cmd->add_option("--Y_H2O_b", o.Y_H2O_b, "Burnt H2O mass fraction")->capture_default_str();
    cmd->add_option("--alpha", o.alpha, "Intermediate-species peak amplitude")->capture_default_str();
    cmd->add_option("--R_s", o.R_s, "Specific gas constant (J/(kg K))")->capture_default_str();
    cmd->add_option("--jitter_frac", o.jitter_frac, "Per-snapshot amplitude jitter")->capture_default_str();
    cmd->callback([cmd, &o]() {
        const Mesh mesh = build_mesh(o.nex, o.ney, o.Lx, o.Ly, 3);
        SurrogateParams p = default_surrogate_params(mesh);
        p.D = o.D;
        p.n_c = o.n_c;
        p.omega = o.omega;
        if (o.x0 >= 0.0) p.x0 = o.x0;
        if (o.A >= 0.0) p.A = o.A;
        if (o.delta > 0.0) p.delta = o.delta;
        if (o.delta_s > 0.0) p.delta_s = o.delta_s;
        p.T_u = o.T_u;
        p.T_b = o.T_b;
        p.T_s = o.T_s;
        p.P_u = o.P_u;
        p.P_b = o.P_b;
        p.P_s = o.P_s;
        p.a_c = o.a_c;
        p.u_b = o.u_b;
        p.u_s = o.u_s;
        p.v_a = o.v_a;
        p.Y_H2_u = o.Y_H2_u;
        p.Y_O2_u = o.Y_O2_u;
        p.Y_H2O_b = o.Y_H2O_b;
        p.alpha.fill(o.alpha);
        p.R_s = o.R_s;
        p.seed = o.seed;
        p.jitter_frac = o.jitter_frac;
        validate_params(p);
        const double dt = o.dt > 0.0 ? o.dt : mesh.spacing() / p.D;
        echo_config(cmd, o.out);
        generate_series(mesh, o.snapshots, dt, p, o.out);
        std::cout << "wrote " << o.snapshots << " snapshots to " << o.out << " (dt = " << dt
                  << " s)\n";
    });
}

// ---------------------------------------------------------------------------
// build-dataset
// ---------------------------------------------------------------------------

struct BuildOptions {
    std::string snapshots;
    std::string out;
    int k = 5;
    int per_cluster = 450;
    int K = 26;
    double test_frac = 0.2;
    double split = 0.7;
    uint64_t seed = 1;
    int k_interp = 4;
    double epsilon_d = 1e-12;
    double match_tol = 1e-12;
};

void add_build_dataset(CLI::App& app, BuildOptions& o) {
    CLI::App* cmd = app.add_subcommand(
        "build-dataset", "Coarsen, cluster, sample and tokenize a snapshot series");
    cmd->fallthrough();
    cmd->add_option("--snapshots", o.snapshots, "Snapshot series directory")->required();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--k", o.k, "k-means cluster count")->capture_default_str();
    cmd->add_option("--per-cluster", o.per_cluster, "Query samples per cluster per snapshot")
        ->capture_default_str();
    cmd->add_option("--K", o.K, "Neighborhood size")->capture_default_str();
    cmd->add_option("--test-frac", o.test_frac, "Trailing fraction of snapshots held out as test")
        ->capture_default_str();
    cmd->add_option("--split", o.split, "Train fraction of the train/val samples (used by train)")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "Sampling RNG seed")->capture_default_str();
    cmd->add_option("--k-interp", o.k_interp, "IDW neighbor count")->capture_default_str();
    cmd->add_option("--epsilon-d", o.epsilon_d, "IDW distance regularizer (m)")->capture_default_str();
    cmd->add_option("--match-tol", o.match_tol, "IDW coincidence tolerance (m)")->capture_default_str();
    cmd->callback([cmd, &o]() {
        const KvFile params_kv = read_kv(o.snapshots + "/params.cfg");
        const SurrogateParams sparams = params_from_kv(params_kv);
        const int n_snapshots = static_cast<int>(params_kv.get_int("n_snapshots"));
        const int n_test = static_cast<int>(std::llround(o.test_frac * n_snapshots));
        const int test_start = n_snapshots - n_test;
        if (test_start < 1)
            throw config_error("build-dataset: test fraction leaves no training snapshots");
        echo_config(cmd, o.out);

        const InterpConfig icfg{o.k_interp, o.epsilon_d, o.match_tol};
        const DatasetConfig dcfg{o.K, kNumFeatures, 1, 3};
        const std::vector<double> gll3 = gll_nodes(3);

        std::vector<long> cluster_counts(static_cast<size_t>(o.k), 0);
        auto process = [&](int first, int last) {
            std::vector<TrainingSample> samples;
            for (int i = first; i < last; ++i) {
                const Snapshot fine = read_snapshot(o.snapshots + "/" + snapshot_filename(i));
                const Snapshot coarse = coarsen_snapshot(fine);
                const Mesh mesh = mesh_of(coarse);
                const Mat features = element_cluster_features(coarse, sparams.R_s);
                const ClusterModel clusters =
                    kmeans_fit(features, o.k, derive_seed(o.seed, 2 * static_cast<uint64_t>(i)));
                {
                    char name[64];
                    std::snprintf(name, sizeof(name), "/clusters_%06d.srgtclst", i);
                    write_clusters(clusters, o.out + name);
                }
                const auto picks = cluster_conditioned_sample(
                    clusters.assignments, o.k, o.per_cluster,
                    derive_seed(o.seed, 2 * static_cast<uint64_t>(i) + 1));
                const size_t base = samples.size();
                samples.resize(base + picks.size());
#pragma omp parallel for schedule(static)
                for (long pi = 0; pi < static_cast<long>(picks.size()); ++pi) {
                    const auto [elem, label] = picks[static_cast<size_t>(pi)];
                    TrainingSample s = build_sample(mesh, coarse, fine, elem, o.K, gll3, icfg);
                    s.snapshot_id = static_cast<uint32_t>(i);
                    s.cluster = label;
                    samples[base + static_cast<size_t>(pi)] = std::move(s);
                }
                for (const auto& [elem, label] : picks) ++cluster_counts[label];
            }
            return samples;
        };

        const auto trainval = process(0, test_start);
        write_dataset(trainval, dcfg, o.out + "/trainval.srgtds");
        const auto test = process(test_start, n_snapshots);
        if (!test.empty()) write_dataset(test, dcfg, o.out + "/test.srgtds");

        KvFile manifest;
        manifest.set_int("K", o.K);
        manifest.set_int("k", o.k);
        manifest.set_int("per_cluster", o.per_cluster);
        manifest.set_int("seed", static_cast<long>(o.seed));
        manifest.set_double("test_frac", o.test_frac);
        manifest.set_double("split", o.split);
        manifest.set_int("n_snapshots", n_snapshots);
        manifest.set_int("test_start", test_start);
        manifest.set_int("k_interp", o.k_interp);
        manifest.set_double("epsilon_d", o.epsilon_d);
        manifest.set_double("match_tol", o.match_tol);
        manifest.set_int("n_trainval_samples", static_cast<long>(trainval.size()));
        manifest.set_int("n_test_samples", static_cast<long>(test.size()));
        for (int c = 0; c < o.k; ++c)
            manifest.set_int("cluster_count_" + std::to_string(c), cluster_counts[static_cast<size_t>(c)]);
        write_kv(manifest, o.out + "/manifest.cfg");
        std::cout << "wrote " << trainval.size() << " train/val samples and " << test.size()
                  << " test samples (snapshots " << test_start << ".." << n_snapshots - 1
                  << " are test)\n";
    });
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string dataset;
    std::string manifest;
    std::string out;
    ModelConfig model;
    TrainConfig train;
};

void add_train(CLI::App& app, TrainOptions& o) {
    CLI::App* cmd = app.add_subcommand("train", "Train the super-resolution model on a dataset");
    cmd->fallthrough();
    cmd->add_option("--dataset", o.dataset, "Dataset file (trainval.srgtds)")->required();
    cmd->add_option("--manifest", o.manifest, "Dataset manifest (default: alongside the dataset)");
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--n-latent", o.model.n_latent, "Latent width")->capture_default_str();
    cmd->add_option("--n-blocks", o.model.n_blocks, "Transformer blocks")->capture_default_str();
    cmd->add_option("--head-dim", o.model.head_dim, "Attention head width")->capture_default_str();
    cmd->add_option("--mlp-ratio", o.model.mlp_ratio, "MLP hidden multiplier")->capture_default_str();
    cmd->add_option("--dropout", o.model.dropout_p, "Dropout probability")->capture_default_str();
    cmd->add_option("--batch-size", o.train.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr-peak", o.train.lr_peak, "Peak learning rate")->capture_default_str();
    cmd->add_option("--lr-final", o.train.lr_final, "Final learning rate")->capture_default_str();
    cmd->add_option("--warmup-steps", o.train.warmup_steps, "Warm-up steps")->capture_default_str();
    cmd->add_option("--decay-steps", o.train.decay_steps, "Cosine decay steps; 0 = max-warmup")
        ->capture_default_str();
    cmd->add_option("--max-steps", o.train.max_steps, "Maximum training steps")->capture_default_str();
    cmd->add_option("--weight-decay", o.train.weight_decay, "AdamW weight decay")->capture_default_str();
    cmd->add_option("--beta1", o.train.beta1, "AdamW first-moment decay")->capture_default_str();
    cmd->add_option("--beta2", o.train.beta2, "AdamW second-moment decay")->capture_default_str();
    cmd->add_option("--adam-eps", o.train.adam_eps, "AdamW epsilon")->capture_default_str();
    cmd->add_option("--clip-norm", o.train.clip_norm, "Global gradient-norm clip")->capture_default_str();
    cmd->add_option("--patience", o.train.early_stop_patience,
                    "Early-stop patience in validation intervals")
        ->capture_default_str();
    cmd->add_option("--val-interval", o.train.val_interval, "Steps between validations")
        ->capture_default_str();
    cmd->add_option("--split", o.train.split_frac, "Train fraction; >=1 validates on train")
        ->capture_default_str();
    cmd->add_option("--seed", o.train.seed, "Training RNG seed")->capture_default_str();
    cmd->callback([cmd, &o]() {
        std::string manifest_path = o.manifest;
        if (manifest_path.empty()) {
            fs::path dir = fs::path(o.dataset).parent_path();
            if (dir.empty()) dir = ".";
            manifest_path = (dir / "manifest.cfg").string();
        }
        const KvFile manifest = read_kv(manifest_path);
        PipelineConfig pipe;
        pipe.K = static_cast<int>(manifest.get_int("K"));
        pipe.interp.k_interp = static_cast<int>(manifest.get_int("k_interp"));
        pipe.interp.epsilon_d = manifest.get_double("epsilon_d");
        pipe.interp.match_tol = manifest.get_double("match_tol");

        const DatasetConfig expect{pipe.K, kNumFeatures, 1, 3};
        const std::vector<TrainingSample> samples = read_dataset_checked(o.dataset, expect);
        echo_config(cmd, o.out);

        long last_print = -1;
        const TrainResult result = train(
            samples, o.model, o.train, [&](long step, double lr, double loss) {
                if (step - last_print >= 100 || step == 0) {
                    std::printf("step %6ld  lr %.3e  loss %.6e\n", step, lr, loss);
                    std::fflush(stdout);
                    last_print = step;
                }
            });

        write_history_csv(result.history, o.out + "/history.csv");
        Checkpoint ck;
        ck.model = o.model;
        ck.pipeline = pipe;
        ck.step = static_cast<uint64_t>(result.history.best_step);
        ck.params = result.best_params;
        ck.opt_m = result.opt_state.m;
        ck.opt_v = result.opt_state.v;
        save_checkpoint(ck, o.out + "/checkpoint.srgtckpt");
        std::cout << "stop reason: " << result.history.stop_reason
                  << ", best validation loss " << result.history.best_val << " at step "
                  << result.history.best_step << "\n";
        if (result.diverged) throw divergence_error("training diverged; best checkpoint saved");
    });
}

// ---------------------------------------------------------------------------
// eval / baseline
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::string checkpoint;
    std::string snapshots;
    std::string manifest;
    std::string out;
    std::string image_features = "P,T,Y_H2O";
};

int feature_index(const std::string& name) {
    const auto& names = feature_names();
    for (size_t f = 0; f < names.size(); ++f)
        if (names[f] == name) return static_cast<int>(f);
    throw config_error("unknown feature name: " + name);
}

void run_eval(const EvalOptions& o, bool use_model) {
    const KvFile manifest = read_kv(o.manifest);
    PipelineConfig pipe;
    pipe.K = static_cast<int>(manifest.get_int("K"));
    pipe.interp.k_interp = static_cast<int>(manifest.get_int("k_interp"));
    pipe.interp.epsilon_d = manifest.get_double("epsilon_d");
    pipe.interp.match_tol = manifest.get_double("match_tol");
    const int n_snapshots = static_cast<int>(manifest.get_int("n_snapshots"));
    const int test_start = static_cast<int>(manifest.get_int("test_start"));

    Checkpoint ck;
    if (use_model) {
        ck = load_checkpoint(o.checkpoint);
        if (ck.pipeline.K != pipe.K)
            throw config_error("checkpoint was built with K = " + std::to_string(ck.pipeline.K) +
                               " but the dataset manifest has K = " + std::to_string(pipe.K));
    }

    // Front-region threshold from the generator parameters when available.
    double t_threshold = -1.0;
    try {
        const KvFile params_kv = read_kv(o.snapshots + "/params.cfg");
        t_threshold = 0.2 * (params_kv.get_double("T_b") - params_kv.get_double("T_u"));
    } catch (const error&) {
        // fall back to the per-snapshot temperature range below
    }

    std::error_code ec;
    fs::create_directories(o.out + "/images", ec);
    if (ec) throw io_error("cannot create " + o.out + "/images");

    std::vector<int> img_features;
    {
        std::stringstream ss(o.image_features);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!trim(tok).empty()) img_features.push_back(feature_index(trim(tok)));
    }

    EvalReport report;
    for (int i = test_start; i < n_snapshots; ++i) {
        const Snapshot fine = read_snapshot(o.snapshots + "/" + snapshot_filename(i));
        const Snapshot coarse = coarsen_snapshot(fine);
        const Snapshot interp_pred =
            super_resolve_snapshot(coarse, ck.params, ck.model, pipe, false);
        const Snapshot model_pred =
            use_model ? super_resolve_snapshot(coarse, ck.params, ck.model, pipe, true)
                      : interp_pred;
        double thr = t_threshold;
        if (thr <= 0.0) {
            double lo = fine.data[F_T], hi = lo;
            for (int e = 0; e < fine.n_elements(); ++e)
                for (int j = 0; j < fine.points_per_element(); ++j) {
                    lo = std::min(lo, fine.at(e, j, F_T));
                    hi = std::max(hi, fine.at(e, j, F_T));
                }
            thr = 0.2 * (hi - lo);
        }
        SnapshotReport rep = compare_baseline(model_pred, interp_pred, fine, thr);
        rep.snapshot_id = i;
        report.snapshots.push_back(rep);

        if (i == test_start) {
            for (int f : img_features) {
                const std::string base = o.out + "/images/" + feature_names()[static_cast<size_t>(f)];
                export_field_image(fine, f, base + "_target.pgm");
                export_field_image(model_pred, f, base + "_pred.pgm");
                export_field_image(interp_pred, f, base + "_interp.pgm");
                Snapshot err = fine;
                for (size_t v = 0; v < err.data.size(); ++v)
                    err.data[v] = std::abs(model_pred.data[v] - fine.data[v]);
                export_field_image(err, f, base + "_abserr.pgm");
            }
        }
    }

    export_report_csv(report, o.out + "/report.csv");
    export_report_text(report, o.out + "/report.txt");
    std::ifstream txt(o.out + "/report.txt");
    std::cout << txt.rdbuf();
}

void add_eval(CLI::App& app, EvalOptions& o) {
    CLI::App* cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test snapshots");
    cmd->fallthrough();
    cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
    cmd->add_option("--snapshots", o.snapshots, "Snapshot series directory")->required();
    cmd->add_option("--manifest", o.manifest, "Dataset manifest")->required();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--image-features", o.image_features, "Comma-separated features to rasterize")
        ->capture_default_str();
    cmd->callback([cmd, &o]() {
        echo_config(cmd, o.out);
        run_eval(o, true);
    });
}

void add_baseline(CLI::App& app, EvalOptions& o) {
    CLI::App* cmd =
        app.add_subcommand("baseline", "Evaluate the KNN-interpolation baseline on the test snapshots");
    cmd->fallthrough();
    cmd->add_option("--snapshots", o.snapshots, "Snapshot series directory")->required();
    cmd->add_option("--manifest", o.manifest, "Dataset manifest")->required();
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--image-features", o.image_features, "Comma-separated features to rasterize")
        ->capture_default_str();
    cmd->callback([cmd, &o]() {
        echo_config(cmd, o.out);
        run_eval(o, false);
    });
}

// ---------------------------------------------------------------------------
// infer / coarsen
// ---------------------------------------------------------------------------

struct InferOptions {
    std::string checkpoint;
    std::string in;
    std::string out;
};

void add_infer(CLI::App& app, InferOptions& o) {
    CLI::App* cmd = app.add_subcommand("infer", "Super-resolve one coarse snapshot file");
    cmd->fallthrough();
    cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
    cmd->add_option("--in", o.in, "Coarse (p=1) snapshot file")->required();
    cmd->add_option("--out", o.out, "Fine (p=3) snapshot file")->required();
    cmd->callback([&o]() {
        const Checkpoint ck = load_checkpoint(o.checkpoint);
        const Snapshot coarse = read_snapshot(o.in);
        if (coarse.p != 1)
            throw config_error("infer: input snapshot has p = " + std::to_string(coarse.p) +
                               ", expected a coarse p=1 field");
        const Snapshot fine = super_resolve_snapshot(coarse, ck.params, ck.model, ck.pipeline, true);
        write_snapshot(fine, o.out);
        std::cout << "wrote " << o.out << "\n";
    });
}

struct CoarsenOptions {
    std::string in;
    std::string out;
};

void add_coarsen(CLI::App& app, CoarsenOptions& o) {
    CLI::App* cmd = app.add_subcommand("coarsen", "Mask a fine (p=3) snapshot down to p=1");
    cmd->fallthrough();
    cmd->add_option("--in", o.in, "Fine snapshot file")->required();
    cmd->add_option("--out", o.out, "Coarse snapshot file")->required();
    cmd->callback([&o]() {
        write_snapshot(coarsen_snapshot(read_snapshot(o.in)), o.out);
        std::cout << "wrote " << o.out << "\n";
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"srgt: mesh-based super-resolution of spectral-element flow fields"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read a key=value config file (keys as <subcommand>.<option>)");
    app.allow_config_extras(true);
    tune_allocator();
    omp_set_num_threads(num_threads());
    app.add_option_function<int>(
           "--threads", [](int n) { omp_set_num_threads(std::max(1, n)); },
           "Worker thread cap (default: SRGT_THREADS or hardware)")
        ->trigger_on_parse();

    GenOptions gen_opts;
    BuildOptions build_opts;
    TrainOptions train_opts;
    EvalOptions eval_opts;
    EvalOptions baseline_opts;
    InferOptions infer_opts;
    CoarsenOptions coarsen_opts;
    add_gen(app, gen_opts);
    add_build_dataset(app, build_opts);
    add_train(app, train_opts);
    add_eval(app, eval_opts);
    add_baseline(app, baseline_opts);
    add_infer(app, infer_opts);
    add_coarsen(app, coarsen_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

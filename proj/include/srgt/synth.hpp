#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/config.hpp"
#include "srgt/mesh.hpp"
#include "srgt/snapshot.hpp"

namespace srgt {

// Analytic detonation-like surrogate: a corrugated reaction front moving in +x
// with a localized pressure/temperature spike riding on it. The progress
// variable c = 0.5 (1 + tanh((x_f - x)/delta)) blends unburnt and burnt states;
// the spike s = exp(-((x - x_f)/delta_s)^2) adds the leading peak.
struct SurrogateParams {
    double Ly = 1.0;     // domain height, needed by the corrugation phase
    double x0 = 0.4;     // initial front position (m)
    double D = 2000.0;   // front speed (m/s)
    double A = 0.01;     // corrugation amplitude (m)
    int n_c = 3;         // cells across the domain (integer keeps the front y-periodic)
    double omega = 2e5;  // corrugation angular frequency (1/s)
    double delta = 0.1;    // front thickness (m)
    double delta_s = 0.06; // spike width (m)
    double T_u = 300.0;
    double T_b = 2900.0;
    double T_s = 800.0;   // spike temperature bump (K)
    double P_u = 4e4;
    double P_b = 6e5;
    double P_s = 8e5;     // spike pressure bump (Pa)
    double a_c = 0.3;     // cellular pressure modulation amplitude
    double u_b = 800.0;
    double u_s = 400.0;
    double v_a = 200.0;
    double Y_H2_u = 0.0283;
    double Y_O2_u = 0.2265;
    double Y_H2O_b = 0.24;
    std::array<double, 5> alpha = {0.008, 0.008, 0.008, 0.008, 0.008};  // O, H, OH, HO2, H2O2 peaks
    double R_s = 397.0;   // specific gas constant (J/(kg K))
    uint64_t seed = 1;    // per-snapshot parameter jitter stream
    double jitter_frac = 0.05;
};

// Defaults scaled to a given mesh: front thickness marginally resolved at p=1,
// well resolved at p=3.
inline SurrogateParams default_surrogate_params(const Mesh& mesh) {
    SurrogateParams p;
    const double h = mesh.spacing();
    p.Ly = mesh.Ly;
    p.x0 = 0.2 * mesh.Lx;
    p.A = 0.01 * mesh.Ly;
    p.delta = 2.5 * h;
    p.delta_s = 1.5 * h;
    return p;
}

inline void validate_params(const SurrogateParams& p) {
    if (!(p.delta > 0.0) || !(p.delta_s > 0.0))
        throw config_error("surrogate params: delta and delta_s must be positive");
    if (!(p.T_u > 0.0) || !(p.P_u > 0.0))
        throw config_error("surrogate params: unburnt state must be positive");
    if (!(p.Ly > 0.0)) throw config_error("surrogate params: Ly must be positive");
    if (!(p.R_s > 0.0)) throw config_error("surrogate params: R_s must be positive");
    double alpha_sum = 0.0;
    for (double a : p.alpha) alpha_sum += a;
    // Mass-fraction headroom: the 8 non-N2 species may never exceed 1.
    double worst = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        const double c = i * 1e-4;
        const double sum = (p.Y_H2_u + p.Y_O2_u) * (1.0 - c) + p.Y_H2O_b * c +
                           alpha_sum * 4.0 * c * (1.0 - c);
        worst = std::max(worst, sum);
    }
    if (worst > 1.0)
        throw config_error("surrogate params: species mass fractions exceed 1 (max " +
                           std::to_string(worst) + "), Y_N2 would go negative");
}

inline double front_position(double y, double t, const SurrogateParams& p) {
    return p.x0 + p.D * t + p.A * std::sin(2.0 * M_PI * p.n_c * y / p.Ly + p.omega * t);
}

struct PointState {
    std::array<double, kNumFeatures> y;
    double rho;
};

inline PointState eval_point(double x, double y, double t, const SurrogateParams& p) {
    const double x_f = front_position(y, t, p);
    const double c = 0.5 * (1.0 + std::tanh((x_f - x) / p.delta));
    const double ds = (x - x_f) / p.delta_s;
    const double s = std::exp(-ds * ds);

    PointState out;
    const double T = p.T_u + (p.T_b - p.T_u) * c + p.T_s * s;
    const double cell = std::sin(4.0 * M_PI * p.n_c * y / p.Ly + p.omega * t);
    const double P = p.P_u + (p.P_b - p.P_u) * c + p.P_s * s * (1.0 + p.a_c * cell);
    out.y[F_UX] = p.u_b * c + p.u_s * s;
    // + 0.0 folds a possible -0.0 (underflowed spike times negative sine) to
    // +0.0 so bitwise snapshot comparisons stay sign-of-zero clean.
    out.y[F_UY] = p.v_a * s * std::sin(2.0 * M_PI * p.n_c * y / p.Ly + p.omega * t) + 0.0;
    out.y[F_P] = P;
    out.y[F_T] = T;
    out.y[F_Y_H2] = p.Y_H2_u * (1.0 - c);
    out.y[F_Y_O2] = p.Y_O2_u * (1.0 - c);
    const double bump = 4.0 * c * (1.0 - c);
    out.y[F_Y_O] = p.alpha[0] * bump;
    out.y[F_Y_H] = p.alpha[1] * bump;
    out.y[F_Y_OH] = p.alpha[2] * bump;
    out.y[F_Y_HO2] = p.alpha[3] * bump;
    out.y[F_Y_H2O2] = p.alpha[4] * bump;
    out.y[F_Y_H2O] = p.Y_H2O_b * c;
    double sum = 0.0;
    for (int f = kFirstSpecies; f < F_Y_N2; ++f) sum += out.y[static_cast<size_t>(f)];
    out.y[F_Y_N2] = 1.0 - sum;
    out.rho = P / (p.R_s * T);
    return out;
}

inline Snapshot generate_snapshot(const Mesh& mesh, double t, const SurrogateParams& p) {
    if (mesh.p != 3) throw config_error("generate_snapshot: mesh must have p=3");
    validate_params(p);
    Snapshot s = make_snapshot(mesh, t);
    const int npts = mesh.nodes_per_element();
#pragma omp parallel for schedule(static)
    for (int e = 0; e < mesh.n_elements(); ++e) {
        const auto coords = element_gll_coords(mesh, e);
        for (int j = 0; j < npts; ++j) {
            const PointState ps = eval_point(coords[static_cast<size_t>(j)][0],
                                             coords[static_cast<size_t>(j)][1], t, p);
            for (int f = 0; f < kNumFeatures; ++f) s.at(e, j, f) = ps.y[static_cast<size_t>(f)];
        }
    }
    return s;
}

// Per-snapshot jitter of the amplitude-like knobs (corrugation and spike
// magnitudes). The front kinematics x0 + D t and the cell count stay fixed so
// the mean front position advances by exactly D dt between snapshots.
inline SurrogateParams series_params(const SurrogateParams& base, int snapshot_index) {
    SurrogateParams p = base;
    if (base.jitter_frac == 0.0) return p;
    Rng rng(derive_seed(base.seed, static_cast<uint64_t>(snapshot_index)));
    auto jitter = [&](double v) { return v * (1.0 + base.jitter_frac * uniform_range(rng, -1.0, 1.0)); };
    p.A = jitter(base.A);
    p.T_s = jitter(base.T_s);
    p.P_s = jitter(base.P_s);
    p.u_s = jitter(base.u_s);
    p.v_a = jitter(base.v_a);
    p.a_c = jitter(base.a_c);
    return p;
}

inline std::string snapshot_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "snap_%06d.srgt", index);
    return buf;
}

inline KvFile params_to_kv(const SurrogateParams& p) {
    KvFile kv;
    kv.set_double("Ly", p.Ly);
    kv.set_double("x0", p.x0);
    kv.set_double("D", p.D);
    kv.set_double("A", p.A);
    kv.set_int("n_c", p.n_c);
    kv.set_double("omega", p.omega);
    kv.set_double("delta", p.delta);
    kv.set_double("delta_s", p.delta_s);
    kv.set_double("T_u", p.T_u);
    kv.set_double("T_b", p.T_b);
    kv.set_double("T_s", p.T_s);
    kv.set_double("P_u", p.P_u);
    kv.set_double("P_b", p.P_b);
    kv.set_double("P_s", p.P_s);
    kv.set_double("a_c", p.a_c);
    kv.set_double("u_b", p.u_b);
    kv.set_double("u_s", p.u_s);
    kv.set_double("v_a", p.v_a);
    kv.set_double("Y_H2_u", p.Y_H2_u);
    kv.set_double("Y_O2_u", p.Y_O2_u);
    kv.set_double("Y_H2O_b", p.Y_H2O_b);
    for (size_t i = 0; i < p.alpha.size(); ++i)
        kv.set_double("alpha_" + std::to_string(i), p.alpha[i]);
    kv.set_double("R_s", p.R_s);
    kv.set_int("seed", static_cast<long>(p.seed));
    kv.set_double("jitter_frac", p.jitter_frac);
    return kv;
}

inline SurrogateParams params_from_kv(const KvFile& kv) {
    SurrogateParams p;
    p.Ly = kv.get_double("Ly");
    p.x0 = kv.get_double("x0");
    p.D = kv.get_double("D");
    p.A = kv.get_double("A");
    p.n_c = static_cast<int>(kv.get_int("n_c"));
    p.omega = kv.get_double("omega");
    p.delta = kv.get_double("delta");
    p.delta_s = kv.get_double("delta_s");
    p.T_u = kv.get_double("T_u");
    p.T_b = kv.get_double("T_b");
    p.T_s = kv.get_double("T_s");
    p.P_u = kv.get_double("P_u");
    p.P_b = kv.get_double("P_b");
    p.P_s = kv.get_double("P_s");
    p.a_c = kv.get_double("a_c");
    p.u_b = kv.get_double("u_b");
    p.u_s = kv.get_double("u_s");
    p.v_a = kv.get_double("v_a");
    p.Y_H2_u = kv.get_double("Y_H2_u");
    p.Y_O2_u = kv.get_double("Y_O2_u");
    p.Y_H2O_b = kv.get_double("Y_H2O_b");
    for (size_t i = 0; i < p.alpha.size(); ++i)
        p.alpha[i] = kv.get_double("alpha_" + std::to_string(i));
    p.R_s = kv.get_double("R_s");
    p.seed = static_cast<uint64_t>(kv.get_int("seed"));
    p.jitter_frac = kv.get_double("jitter_frac");
    return p;
}

inline void generate_series(const Mesh& mesh, int n_snap, double dt, const SurrogateParams& params,
                            const std::string& out_dir) {
    if (n_snap < 1) throw config_error("generate_series: need at least one snapshot");
    if (!(dt > 0.0)) throw config_error("generate_series: dt must be positive");
    validate_params(params);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw io_error("generate_series: cannot create " + out_dir + ": " + ec.message());
    for (int i = 0; i < n_snap; ++i) {
        const Snapshot s = generate_snapshot(mesh, i * dt, series_params(params, i));
        write_snapshot(s, out_dir + "/" + snapshot_filename(i));
    }
    KvFile kv = params_to_kv(params);
    kv.set_int("nex", mesh.nex);
    kv.set_int("ney", mesh.ney);
    kv.set_double("Lx", mesh.Lx);
    kv.set_int("n_snapshots", n_snap);
    kv.set_double("dt", dt);
    write_kv(kv, out_dir + "/params.cfg");
}

}  // namespace srgt

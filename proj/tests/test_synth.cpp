#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "srgt/synth.hpp"

using namespace srgt;

namespace {

SurrogateParams desk_params() {
    return default_surrogate_params(build_mesh(16, 8, 2.0, 1.0, 3));
}

}  // namespace

TEST_CASE("front_position") {
    SurrogateParams p = desk_params();

    SECTION("flat front when A = 0") {
        p.A = 0.0;
        p.x0 = 0.0;
        p.D = 2000.0;
        for (double y : {0.0, 0.3, 0.77}) CHECK(front_position(y, 1e-6, p) == 2e-3);
    }
    SECTION("x0 at t = 0 where the sine vanishes") {
        CHECK(front_position(0.0, 0.0, p) == p.x0);  // sin(0) = 0
    }
    SECTION("corrugation bounded by A") {
        for (double y = 0.0; y < p.Ly; y += 0.01) {
            const double xf = front_position(y, 3e-6, p);
            CHECK(std::abs(xf - (p.x0 + p.D * 3e-6)) <= p.A + 1e-15);
        }
    }
}

TEST_CASE("eval_point limits") {
    const SurrogateParams p = desk_params();

    SECTION("far upstream is the unburnt state") {
        const PointState ps = eval_point(p.x0 + 60.0 * p.delta, 0.4, 0.0, p);
        CHECK_THAT(ps.y[F_T], Catch::Matchers::WithinRel(300.0, 1e-12));
        CHECK_THAT(ps.y[F_P], Catch::Matchers::WithinRel(0.4e5, 1e-12));
        CHECK_THAT(ps.y[F_Y_H2], Catch::Matchers::WithinRel(p.Y_H2_u, 1e-12));
        CHECK_THAT(ps.y[F_Y_O2], Catch::Matchers::WithinRel(p.Y_O2_u, 1e-12));
        for (int f : {F_Y_O, F_Y_H, F_Y_OH, F_Y_HO2, F_Y_H2O2})
            CHECK(std::abs(ps.y[static_cast<size_t>(f)]) < 1e-15);
        CHECK(std::abs(ps.y[F_UX]) < 1e-10);
    }
    SECTION("far downstream is the burnt state") {
        const PointState ps = eval_point(p.x0 - 60.0 * p.delta, 0.4, 0.0, p);
        CHECK(std::abs(ps.y[F_Y_H2]) < 1e-15);
        CHECK(std::abs(ps.y[F_Y_O2]) < 1e-15);
        CHECK_THAT(ps.y[F_Y_H2O], Catch::Matchers::WithinRel(p.Y_H2O_b, 1e-12));
        CHECK_THAT(ps.y[F_Y_N2], Catch::Matchers::WithinRel(1.0 - p.Y_H2O_b, 1e-12));
    }
    SECTION("mass fractions close to one everywhere") {
        Rng rng(3);
        for (int i = 0; i < 200; ++i) {
            const double x = uniform_range(rng, 0.0, 2.0);
            const double y = uniform_range(rng, 0.0, 1.0);
            const double t = uniform_range(rng, 0.0, 1e-5);
            const PointState ps = eval_point(x, y, t, p);
            double sum = 0.0;
            for (int f = kFirstSpecies; f < kFirstSpecies + kNumSpecies; ++f)
                sum += ps.y[static_cast<size_t>(f)];
            CHECK(std::abs(sum - 1.0) <= 1e-15);
            CHECK(ps.rho > 0.0);
            CHECK(ps.y[F_T] > 0.0);
        }
    }
}

TEST_CASE("eval_point temperature derivative converges at 2nd order") {
    const SurrogateParams p = desk_params();
    const double x = p.x0 + 0.7 * p.delta;
    const double y = 0.37;
    // Analytic d/dx of T = T_u + (T_b-T_u) c + T_s s at fixed (y, t).
    const double xf = front_position(y, 0.0, p);
    const double th = std::tanh((xf - x) / p.delta);
    const double dcdx = -0.5 * (1.0 - th * th) / p.delta;
    const double ds = (x - xf) / p.delta_s;
    const double dsdx = std::exp(-ds * ds) * (-2.0 * ds / p.delta_s);
    const double exact = (p.T_b - p.T_u) * dcdx + p.T_s * dsdx;

    auto fd = [&](double h) {
        return (eval_point(x + h, y, 0.0, p).y[F_T] - eval_point(x - h, y, 0.0, p).y[F_T]) /
               (2.0 * h);
    };
    const double e1 = std::abs(fd(1e-3) - exact);
    const double e2 = std::abs(fd(5e-4) - exact);
    CHECK(e1 / e2 > 3.0);  // ~4 for a 2nd-order stencil
    CHECK(e1 / e2 < 5.0);
}

TEST_CASE("generate_snapshot") {
    const Mesh mesh = build_mesh(16, 8, 2.0, 1.0, 3);
    const SurrogateParams p = default_surrogate_params(mesh);
    const Snapshot s = generate_snapshot(mesh, 2.5e-6, p);

    SECTION("bounds and finiteness") {
        for (double v : s.data) CHECK(std::isfinite(v));
        for (int e = 0; e < s.n_elements(); ++e)
            for (int j = 0; j < 16; ++j) CHECK(s.at(e, j, F_T) >= p.T_u - 1e-9);
    }
    SECTION("bit-identical on repeated generation") {
        const Snapshot s2 = generate_snapshot(mesh, 2.5e-6, p);
        CHECK(std::memcmp(s.data.data(), s2.data.data(), s.data.size() * sizeof(double)) == 0);
    }
    SECTION("mass closure at every GLL point") {
        double worst = 0.0;
        for (int e = 0; e < s.n_elements(); ++e)
            for (int j = 0; j < 16; ++j) {
                double sum = 0.0;
                for (int f = kFirstSpecies; f < kFirstSpecies + kNumSpecies; ++f)
                    sum += s.at(e, j, f);
                worst = std::max(worst, std::abs(sum - 1.0));
            }
        CHECK(worst <= 1e-14);
    }
    SECTION("requires p=3") {
        const Mesh coarse_mesh = build_mesh(16, 8, 2.0, 1.0, 1);
        CHECK_THROWS_AS(generate_snapshot(coarse_mesh, 0.0, p), config_error);
    }
}

TEST_CASE("params validation") {
    SurrogateParams p = desk_params();
    SECTION("valid defaults") { CHECK_NOTHROW(validate_params(p)); }
    SECTION("species overflow rejected") {
        p.Y_H2O_b = 0.9;
        p.Y_H2_u = 0.5;
        p.Y_O2_u = 0.5;
        CHECK_THROWS_AS(validate_params(p), config_error);
    }
    SECTION("non-positive thickness rejected") {
        p.delta = 0.0;
        CHECK_THROWS_AS(validate_params(p), config_error);
    }
}

TEST_CASE("params kv roundtrip") {
    SurrogateParams p = desk_params();
    p.seed = 123;
    p.alpha = {0.001, 0.002, 0.003, 0.004, 0.005};
    const SurrogateParams r = params_from_kv(params_to_kv(p));
    CHECK(r.x0 == p.x0);
    CHECK(r.D == p.D);
    CHECK(r.alpha == p.alpha);
    CHECK(r.seed == p.seed);
    CHECK(r.R_s == p.R_s);
}

TEST_CASE("generate_series") {
    const Mesh mesh = build_mesh(16, 8, 2.0, 1.0, 3);
    SurrogateParams p = default_surrogate_params(mesh);
    const auto dir = std::filesystem::temp_directory_path() / "srgt_series_test";
    std::filesystem::remove_all(dir);
    const double dt = 1e-7;
    generate_series(mesh, 3, dt, p, dir.string());

    SECTION("snapshots at t = i dt") {
        for (int i = 0; i < 3; ++i) {
            const Snapshot s = read_snapshot((dir / snapshot_filename(i)).string());
            CHECK(s.time == i * dt);
            CHECK(s.p == 3);
        }
        CHECK(std::filesystem::exists(dir / "params.cfg"));
    }
    SECTION("mean front position advances by exactly D dt") {
        // Uniform y grid spanning integer corrugation periods: the sine term
        // averages to zero for every jittered amplitude.
        const int m = 1000;
        auto mean_front = [&](int snap_index) {
            const SurrogateParams ps = series_params(p, snap_index);
            double sum = 0.0;
            for (int j = 0; j < m; ++j)
                sum += front_position(j * p.Ly / m, snap_index * dt, ps);
            return sum / m;
        };
        for (int i = 0; i + 1 < 3; ++i)
            CHECK_THAT(mean_front(i + 1) - mean_front(i),
                       Catch::Matchers::WithinAbs(p.D * dt, 1e-12));
    }
    SECTION("jitter is deterministic and bounded") {
        const SurrogateParams a = series_params(p, 1);
        const SurrogateParams b = series_params(p, 1);
        CHECK(a.A == b.A);
        CHECK(a.T_s == b.T_s);
        CHECK(std::abs(a.A - p.A) <= p.jitter_frac * p.A + 1e-18);
        CHECK(a.x0 == p.x0);  // kinematics are never jittered
        CHECK(a.D == p.D);
    }
    std::filesystem::remove_all(dir);
}

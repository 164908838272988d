#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "srgt/trainer.hpp"

using namespace srgt;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_latent = 8;
    cfg.n_blocks = 1;
    cfg.head_dim = 8;
    cfg.dropout_p = 0.0;
    return cfg;
}

TrainingSample random_sample(int n_tokens, Rng& rng) {
    TrainingSample s;
    s.tokens = Mat(n_tokens, kTokenDim);
    for (int i = 0; i < n_tokens; ++i)
        for (int j = 0; j < kTokenDim; ++j) s.tokens(i, j) = uniform_range(rng, -1.0, 1.0);
    s.positions = Mat::Zero(n_tokens, 3);
    for (int i = 1; i < n_tokens; ++i) {
        const double a = uniform_range(rng, 0.0, 2.0 * M_PI);
        s.positions(i, 0) = std::cos(a);
        s.positions(i, 1) = std::sin(a);
        s.positions(i, 2) = uniform_range(rng, 0.5, 2.0);
    }
    s.baseline = Vec(kOutputDim);
    s.target = Vec(kOutputDim);
    for (int i = 0; i < kOutputDim; ++i) {
        s.baseline[i] = uniform_range(rng, -1.0, 1.0);
        s.target[i] = uniform_range(rng, -1.0, 1.0);
    }
    for (int f = 0; f < kNumFeatures; ++f) {
        s.stats.mean[static_cast<size_t>(f)] = 0.0;
        s.stats.stddev[static_cast<size_t>(f)] = 1.0;
    }
    return s;
}

// A parameter container used as a bag of scalars for optimizer unit tests.
ModelParams scalar_params(double theta) {
    ModelParams p = zeros_like(init_params(tiny_config(), 0));
    p.decoder.b[0] = theta;
    return p;
}

}  // namespace

TEST_CASE("lr schedule") {
    TrainConfig cfg;
    cfg.lr_peak = 1e-4;
    cfg.lr_final = 1e-7;
    cfg.warmup_steps = 1000;
    cfg.max_steps = 20000;  // C = 19000
    const long w = cfg.warmup_steps;
    const long c = cfg.effective_decay_steps();

    SECTION("phase boundary values") {
        CHECK(lr_at(0, cfg) == 0.0);
        CHECK_THAT(lr_at(w, cfg), Catch::Matchers::WithinRel(1e-4, 1e-15));
        CHECK_THAT(lr_at(w + c, cfg), Catch::Matchers::WithinRel(1e-7, 1e-15));
        CHECK(lr_at(w + c + 12345, cfg) == cfg.lr_final);
    }
    SECTION("cosine midpoint") {
        // lr_final + 0.5 (lr_peak - lr_final) (1 + cos(pi/2)) = 5.005e-5
        CHECK_THAT(lr_at(w + c / 2, cfg), Catch::Matchers::WithinRel(5.005e-5, 1e-12));
    }
    SECTION("continuity at both boundaries") {
        const double before_peak = lr_at(w - 1, cfg);
        CHECK(std::abs(before_peak - cfg.lr_peak) < cfg.lr_peak * 1.1 / static_cast<double>(w));
        const double d1 = std::abs(lr_at(w + c - 1, cfg) - cfg.lr_final);
        CHECK(d1 < (cfg.lr_peak - cfg.lr_final) * 5.0 / static_cast<double>(c));
        CHECK(lr_at(w + c, cfg) == Catch::Approx(cfg.lr_final).epsilon(1e-15));
    }
    SECTION("monotone warmup, monotone decay") {
        for (long s = 1; s <= w; ++s) CHECK(lr_at(s, cfg) >= lr_at(s - 1, cfg));
        for (long s = w + 1; s <= w + c; s += 97) CHECK(lr_at(s, cfg) <= lr_at(s - 1, cfg));
    }
    SECTION("negative step rejected") { CHECK_THROWS_AS(lr_at(-1, cfg), config_error); }
}

TEST_CASE("gradient clipping") {
    TrainConfig cfg;

    SECTION("below the threshold is untouched") {
        ModelParams g = scalar_params(0.0);
        g.decoder.b[0] = 0.3;
        g.decoder.b[1] = 0.4;  // norm 0.5
        const ModelParams before = g;
        const double norm = clip_gradients(g, 1.0);
        CHECK_THAT(norm, Catch::Matchers::WithinRel(0.5, 1e-12));
        CHECK(g.decoder.b[0] == before.decoder.b[0]);
        CHECK(g.decoder.b[1] == before.decoder.b[1]);
    }
    SECTION("above the threshold scales to the clip norm") {
        ModelParams g = scalar_params(0.0);
        g.decoder.b[0] = 4.0;
        const double norm = clip_gradients(g, 1.0);
        CHECK(norm == 4.0);
        CHECK_THAT(g.decoder.b[0], Catch::Matchers::WithinRel(1.0, 1e-12));
        double sq = 0.0;
        for_each_tensor(g, [&](const std::string&, auto& t) { sq += t.squaredNorm(); });
        CHECK_THAT(std::sqrt(sq), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("zero gradients unchanged") {
        ModelParams g = scalar_params(0.0);
        CHECK(clip_gradients(g, 1.0) == 0.0);
        CHECK(g.decoder.b.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("non-finite norm raises divergence") {
        ModelParams g = scalar_params(std::numeric_limits<double>::infinity());
        CHECK_THROWS_AS(clip_gradients(g, 1.0), divergence_error);
    }
}

TEST_CASE("adamw_step") {
    TrainConfig cfg;

    SECTION("single step on a unit gradient") {
        ModelParams p = scalar_params(0.0);
        ModelParams g = scalar_params(1.0);
        AdamWState st = make_adamw_state(p);
        TrainConfig c = cfg;
        c.weight_decay = 0.0;
        adamw_step(p, g, st, 0.1, c);
        // m-hat = v-hat = 1 after bias correction; theta = -0.1/(1 + eps).
        CHECK_THAT(p.decoder.b[0], Catch::Matchers::WithinAbs(-0.1, 1e-8));
        CHECK(st.t == 1);
    }
    SECTION("decoupled weight decay only") {
        ModelParams p = scalar_params(1.0);
        ModelParams g = scalar_params(0.0);
        AdamWState st = make_adamw_state(p);
        TrainConfig c = cfg;
        c.weight_decay = 0.01;
        adamw_step(p, g, st, 0.1, c);
        CHECK_THAT(p.decoder.b[0], Catch::Matchers::WithinAbs(0.999, 1e-15));
    }
    SECTION("zero gradients and zero decay leave parameters bitwise unchanged") {
        ModelParams p = scalar_params(0.731);
        const ModelParams before = p;
        ModelParams g = scalar_params(0.0);
        AdamWState st = make_adamw_state(p);
        TrainConfig c = cfg;
        c.weight_decay = 0.0;
        adamw_step(p, g, st, 0.1, c);
        CHECK(p.decoder.b[0] == before.decoder.b[0]);
    }
    SECTION("descends a quadratic") {
        // loss = theta^2, grad = 2 theta.
        ModelParams p = scalar_params(1.0);
        AdamWState st = make_adamw_state(p);
        TrainConfig c = cfg;
        c.weight_decay = 0.0;
        double theta = 1.0;
        for (int i = 0; i < 50; ++i) {
            ModelParams g = scalar_params(2.0 * theta);
            adamw_step(p, g, st, 1e-3, c);
            theta = p.decoder.b[0];
        }
        CHECK(theta * theta < 1.0);
        CHECK(theta > 0.0);
    }
}

TEST_CASE("train determinism") {
    const ModelConfig mcfg = tiny_config();
    Rng rng(3);
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 24; ++i) samples.push_back(random_sample(4, rng));

    TrainConfig tcfg;
    tcfg.batch_size = 8;
    tcfg.max_steps = 40;
    tcfg.warmup_steps = 10;
    tcfg.val_interval = 10;
    tcfg.lr_peak = 1e-3;
    tcfg.seed = 7;

    const TrainResult a = train(samples, mcfg, tcfg);
    const TrainResult b = train(samples, mcfg, tcfg);
    REQUIRE(a.history.steps.size() == b.history.steps.size());
    for (size_t i = 0; i < a.history.steps.size(); ++i)
        CHECK(a.history.steps[i].train_loss == b.history.steps[i].train_loss);
    CHECK(a.history.best_val == b.history.best_val);
    CHECK(std::memcmp(a.best_params.decoder.w.data(), b.best_params.decoder.w.data(),
                      sizeof(double) * static_cast<size_t>(a.best_params.decoder.w.size())) == 0);
}

TEST_CASE("train records loss before the update") {
    const ModelConfig mcfg = tiny_config();
    Rng rng(5);
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 8; ++i) samples.push_back(random_sample(4, rng));
    TrainConfig tcfg;
    tcfg.batch_size = 8;
    tcfg.max_steps = 1;
    tcfg.warmup_steps = 1;
    tcfg.val_interval = 1;
    tcfg.split_frac = 1.0;
    tcfg.seed = 2;
    const TrainResult r = train(samples, mcfg, tcfg);
    // Step 0 runs at lr_at(0) = 0, so the recorded loss must equal the loss
    // of the freshly initialized parameters (no update had been applied).
    ModelParams fresh = init_params(mcfg, derive_seed(tcfg.seed, 0x494e4954));
    std::vector<int> idx;
    // Recover the step-0 batch: same shuffle stream as in train().
    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(tcfg.seed, 0x53504c49));
    shuffle_in_place(order, shuffle_rng);
    std::vector<int> epoch = order;
    shuffle_in_place(epoch, shuffle_rng);
    idx.assign(epoch.begin(), epoch.begin() + 8);
    const double expected = batch_loss(samples, idx, fresh, mcfg);
    CHECK(r.history.steps[0].train_loss == expected);
}

TEST_CASE("early stopping fires after exactly the patience window") {
    const ModelConfig mcfg = tiny_config();
    Rng rng(11);
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 16; ++i) samples.push_back(random_sample(4, rng));

    TrainConfig tcfg;
    tcfg.batch_size = 4;
    tcfg.max_steps = 100000;
    tcfg.warmup_steps = 1;
    tcfg.val_interval = 5;
    tcfg.early_stop_patience = 2;
    tcfg.lr_peak = 1e-30;  // effectively frozen parameters: a validation plateau
    tcfg.lr_final = 1e-31;
    tcfg.seed = 13;

    const TrainResult r = train(samples, mcfg, tcfg);
    CHECK(r.history.stop_reason == "early_stop");
    // Best at the first validation, then two non-improving intervals.
    REQUIRE(r.history.validations.size() == 3);
    CHECK(r.history.best_step == r.history.validations[0].step);
    CHECK(r.history.steps.size() == 15);  // 3 intervals x 5 steps
}

TEST_CASE("divergence aborts with the last good state") {
    const ModelConfig mcfg = tiny_config();
    Rng rng(17);
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 8; ++i) samples.push_back(random_sample(4, rng));
    // A target far outside double range overflows the squared error.
    for (auto& s : samples) s.target.array() += 1e200;

    TrainConfig tcfg;
    tcfg.batch_size = 4;
    tcfg.max_steps = 10;
    tcfg.warmup_steps = 1;
    tcfg.val_interval = 5;
    tcfg.seed = 1;

    const TrainResult r = train(samples, mcfg, tcfg);
    CHECK(r.diverged);
    CHECK(r.history.stop_reason == "divergence");
}

TEST_CASE("small overfit smoke") {
    // Quick wiring check; the full canary lives in the acceptance suite.
    ModelConfig mcfg;
    mcfg.n_latent = 32;
    mcfg.n_blocks = 1;
    mcfg.head_dim = 16;
    mcfg.dropout_p = 0.0;
    Rng rng(23);
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 8; ++i) samples.push_back(random_sample(4, rng));

    TrainConfig tcfg;
    tcfg.batch_size = 8;
    tcfg.max_steps = 300;
    tcfg.warmup_steps = 30;
    tcfg.lr_peak = 3e-3;
    tcfg.lr_final = 1e-4;
    tcfg.val_interval = 50;
    tcfg.split_frac = 1.0;
    tcfg.early_stop_patience = 100;
    tcfg.seed = 5;

    const TrainResult r = train(samples, mcfg, tcfg);
    const double first = r.history.steps.front().train_loss;
    CHECK(r.history.best_val < 0.2 * first);
}

TEST_CASE("history csv") {
    TrainHistory h;
    h.steps = {{0, 0.0, 1.5}, {1, 1e-5, 1.25}, {2, 2e-5, 1.0}};
    h.validations = {{2, 1.1}};
    const auto dir = std::filesystem::temp_directory_path() / "srgt_hist_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "h.csv").string();
    write_history_csv(h, path);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "step,lr,train_loss,val_loss");
    std::getline(is, line);
    CHECK(line.rfind("0,0,1.5,", 0) == 0);
    std::filesystem::remove_all(dir);
}

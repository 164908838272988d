#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/model.hpp"
#include "srgt/tokenizer.hpp"

namespace srgt {

struct TrainConfig {
    int batch_size = 64;
    double lr_peak = 1e-4;
    double lr_final = 1e-7;
    long warmup_steps = 1000;
    long decay_steps = 0;  // 0 = max_steps - warmup_steps
    long max_steps = 20000;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    int early_stop_patience = 10;  // validation intervals without improvement
    long val_interval = 500;
    double split_frac = 0.7;  // train fraction; >= 1 validates on the train set
    uint64_t seed = 1;

    long effective_decay_steps() const {
        return decay_steps > 0 ? decay_steps : std::max<long>(1, max_steps - warmup_steps);
    }

    void validate() const {
        if (batch_size < 1) throw config_error("train config: batch_size must be >= 1");
        if (!(lr_final > 0.0) || lr_final > lr_peak)
            throw config_error("train config: need 0 < lr_final <= lr_peak");
        if (warmup_steps < 1 || effective_decay_steps() < 1)
            throw config_error("train config: warmup and decay phases must be >= 1 step");
        if (max_steps < 1) throw config_error("train config: max_steps must be >= 1");
        if (val_interval < 1) throw config_error("train config: val_interval must be >= 1");
        if (!(split_frac > 0.0)) throw config_error("train config: split_frac must be positive");
    }
};

// Three-phase schedule: linear warm-up from zero to lr_peak over W steps,
// cosine decay to lr_final over the next C steps, then constant lr_final.
inline double lr_at(long step, const TrainConfig& cfg) {
    if (step < 0) throw config_error("lr_at: negative step");
    const long w = cfg.warmup_steps;
    const long c = cfg.effective_decay_steps();
    if (step < w) return cfg.lr_peak * static_cast<double>(step) / static_cast<double>(w);
    if (step < w + c) {
        const double t = static_cast<double>(step - w) / static_cast<double>(c);
        return cfg.lr_final + 0.5 * (cfg.lr_peak - cfg.lr_final) * (1.0 + std::cos(M_PI * t));
    }
    return cfg.lr_final;
}

// Global-norm gradient clipping. Returns the pre-clip norm.
inline double clip_gradients(ModelParams& grads, double clip_norm) {
    if (!(clip_norm > 0.0)) throw config_error("clip_gradients: clip_norm must be positive");
    double sq = 0.0;
    for_each_tensor(grads, [&](const std::string&, auto& t) { sq += t.squaredNorm(); });
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw divergence_error("clip_gradients: non-finite gradient norm");
    if (norm > clip_norm) {
        const double scale = clip_norm / norm;
        for_each_tensor(grads, [&](const std::string&, auto& t) { t *= scale; });
    }
    return norm;
}

struct AdamWState {
    ModelParams m;
    ModelParams v;
    long t = 0;
};

inline AdamWState make_adamw_state(const ModelParams& params) {
    return {zeros_like(params), zeros_like(params), 0};
}

// One AdamW update. Decoupled weight decay shrinks the parameters before the
// bias-corrected moment update is applied.
inline void adamw_step(ModelParams& params, const ModelParams& grads, AdamWState& state, double lr,
                       const TrainConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

    std::vector<double*> pp, gp, mp, vp;
    std::vector<size_t> sz;
    for_each_tensor(params, [&](const std::string&, auto& t) {
        pp.push_back(t.data());
        sz.push_back(static_cast<size_t>(t.size()));
    });
    for_each_tensor(const_cast<ModelParams&>(grads), [&](const std::string&, auto& t) { gp.push_back(t.data()); });
    for_each_tensor(state.m, [&](const std::string&, auto& t) { mp.push_back(t.data()); });
    for_each_tensor(state.v, [&](const std::string&, auto& t) { vp.push_back(t.data()); });

    for (size_t k = 0; k < pp.size(); ++k) {
        double* p = pp[k];
        const double* g = gp[k];
        double* m = mp[k];
        double* v = vp[k];
        for (size_t i = 0; i < sz[k]; ++i) {
            p[i] -= lr * cfg.weight_decay * p[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

struct TrainHistory {
    struct Step {
        long step;
        double lr;
        double train_loss;
    };
    struct Val {
        long step;
        double val_loss;
    };
    std::vector<Step> steps;
    std::vector<Val> validations;
    long best_step = 0;
    double best_val = std::numeric_limits<double>::infinity();
    std::string stop_reason;
};

inline void write_history_csv(const TrainHistory& h, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("write_history_csv: cannot open " + path);
    os << "step,lr,train_loss,val_loss\n";
    size_t vi = 0;
    char buf[128];
    for (const auto& s : h.steps) {
        std::string val;
        while (vi < h.validations.size() && h.validations[vi].step < s.step) ++vi;
        if (vi < h.validations.size() && h.validations[vi].step == s.step) {
            std::snprintf(buf, sizeof(buf), "%.17g", h.validations[vi].val_loss);
            val = buf;
        }
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,", s.step, s.lr, s.train_loss);
        os << buf << val << "\n";
    }
    if (!os) throw io_error("write_history_csv: write failed");
}

struct TrainResult {
    ModelParams best_params;
    AdamWState opt_state;
    TrainHistory history;
    bool diverged = false;
};

// Full training loop: seeded 70/30 train/val split, per-epoch shuffling,
// AdamW with the 3-phase schedule and global-norm clipping, periodic
// validation, early stopping on the validation loss, best-validation
// parameters returned. On divergence the last good (best-validation) state is
// returned with `diverged` set.
inline TrainResult train(const std::vector<TrainingSample>& samples, const ModelConfig& mcfg,
                         const TrainConfig& tcfg,
                         const std::function<void(long, double, double)>& progress = nullptr) {
    tcfg.validate();
    mcfg.validate();
    if (samples.empty()) throw config_error("train: empty dataset");
    tune_allocator();

    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(tcfg.seed, 0x53504c49));  // split/shuffle stream
    shuffle_in_place(order, shuffle_rng);

    std::vector<int> train_idx, val_idx;
    if (tcfg.split_frac >= 1.0) {
        train_idx = order;
        val_idx = order;
    } else {
        const size_t n_train = std::max<size_t>(
            1, static_cast<size_t>(std::llround(tcfg.split_frac * static_cast<double>(order.size()))));
        train_idx.assign(order.begin(), order.begin() + static_cast<long>(std::min(n_train, order.size())));
        val_idx.assign(order.begin() + static_cast<long>(std::min(n_train, order.size())), order.end());
        if (val_idx.empty()) val_idx = train_idx;
    }

    ModelParams params = init_params(mcfg, derive_seed(tcfg.seed, 0x494e4954));
    AdamWState opt = make_adamw_state(params);
    ModelParams grads = zeros_like(params);
    const uint64_t dropout_base = derive_seed(tcfg.seed, 0x44524f50);

    TrainResult result;
    result.best_params = params;
    TrainHistory& hist = result.history;

    auto validation_loss = [&]() {
        double total = 0.0;
        size_t count = 0;
        for (size_t off = 0; off < val_idx.size(); off += static_cast<size_t>(tcfg.batch_size)) {
            const size_t end = std::min(val_idx.size(), off + static_cast<size_t>(tcfg.batch_size));
            std::vector<int> idx(val_idx.begin() + static_cast<long>(off),
                                 val_idx.begin() + static_cast<long>(end));
            total += batch_loss(samples, idx, params, mcfg) * static_cast<double>(idx.size());
            count += idx.size();
        }
        return total / static_cast<double>(count);
    };

    std::vector<int> epoch = train_idx;
    size_t cursor = epoch.size();  // triggers a shuffle on first use
    int intervals_since_best = 0;
    AdamWState best_opt = opt;

    for (long step = 0; step < tcfg.max_steps; ++step) {
        std::vector<int> batch_idx;
        batch_idx.reserve(static_cast<size_t>(tcfg.batch_size));
        for (int i = 0; i < tcfg.batch_size; ++i) {
            if (cursor == epoch.size()) {
                shuffle_in_place(epoch, shuffle_rng);
                cursor = 0;
            }
            batch_idx.push_back(epoch[cursor++]);
        }

        const double lr = lr_at(step, tcfg);
        for_each_tensor(grads, [](const std::string&, auto& t) { t.setZero(); });
        double loss;
        try {
            loss = loss_and_grads(samples, batch_idx, params, mcfg, Mode::train,
                                  derive_seed(dropout_base, static_cast<uint64_t>(step)), grads);
        } catch (const divergence_error&) {
            hist.stop_reason = "divergence";
            result.diverged = true;
            result.opt_state = std::move(best_opt);
            return result;
        }
        hist.steps.push_back({step, lr, loss});
        clip_gradients(grads, tcfg.clip_norm);
        adamw_step(params, grads, opt, lr, tcfg);
        if (progress) progress(step, lr, loss);

        if ((step + 1) % tcfg.val_interval == 0 || step + 1 == tcfg.max_steps) {
            const double vl = validation_loss();
            hist.validations.push_back({step + 1, vl});
            if (!std::isfinite(vl)) {
                hist.stop_reason = "divergence";
                result.diverged = true;
                result.opt_state = std::move(best_opt);
                return result;
            }
            if (vl < hist.best_val) {
                hist.best_val = vl;
                hist.best_step = step + 1;
                result.best_params = params;
                best_opt = opt;
                intervals_since_best = 0;
            } else {
                ++intervals_since_best;
                if (intervals_since_best >= tcfg.early_stop_patience) {
                    hist.stop_reason = "early_stop";
                    result.opt_state = std::move(best_opt);
                    return result;
                }
            }
        }
    }
    hist.stop_reason = "max_steps";
    result.opt_state = std::move(best_opt);
    return result;
}

}  // namespace srgt

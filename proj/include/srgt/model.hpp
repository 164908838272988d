#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srgt/common.hpp"
#include "srgt/dense.hpp"
#include "srgt/interp.hpp"
#include "srgt/tokenizer.hpp"

namespace srgt {

// ---------------------------------------------------------------------------
// Architecture: token + position embedding into a constant latent width,
// n_blocks pre-norm transformer blocks (MHSA then MLP, GELU, hidden =
// mlp_ratio * width), final layer-norm, and a linear decoder that reads the
// query token (row 0) to produce the residual on top of the interpolation
// baseline. All math is double precision.
// ---------------------------------------------------------------------------

struct ModelConfig {
    int n_latent = 256;
    int n_blocks = 8;
    int head_dim = 64;
    int mlp_ratio = 4;
    double dropout_p = 0.1;
    int token_dim = kTokenDim;
    int out_dim = kOutputDim;
    int pos_dim = 3;

    int n_heads() const { return n_latent / head_dim; }
    int mlp_hidden() const { return mlp_ratio * n_latent; }

    void validate() const {
        if (n_latent < 1 || n_blocks < 1 || head_dim < 1 || mlp_ratio < 1)
            throw config_error("model config: dimensions must be positive");
        if (n_latent % head_dim != 0)
            throw config_error("model config: n_latent must be divisible by head_dim");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0))
            throw config_error("model config: dropout_p must be in [0, 1)");
    }
};

struct LinearParams {
    Mat w;  // in x out
    Vec b;  // out
};

struct LayerNormParams {
    Vec gamma;
    Vec beta;
};

struct BlockParams {
    LayerNormParams ln1, ln2;
    LinearParams wq, wk, wv, wo;
    LinearParams fc1, fc2;
};

struct ModelParams {
    LinearParams token_embed;      // token_dim -> n_latent
    LinearParams pos_fc1, pos_fc2; // pos_dim -> n_latent -> n_latent
    std::vector<BlockParams> blocks;
    LayerNormParams final_ln;
    LinearParams decoder;          // n_latent -> out_dim
};

// Fixed-order traversal of every parameter tensor; the same order drives
// initialization, serialization, the optimizer, and gradient flattening.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    auto lin = [&](const std::string& name, auto& l) {
        fn(name + ".w", l.w);
        fn(name + ".b", l.b);
    };
    auto ln = [&](const std::string& name, auto& l) {
        fn(name + ".gamma", l.gamma);
        fn(name + ".beta", l.beta);
    };
    lin("token_embed", p.token_embed);
    lin("pos_fc1", p.pos_fc1);
    lin("pos_fc2", p.pos_fc2);
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        const std::string b = "block" + std::to_string(i);
        ln(b + ".ln1", p.blocks[i].ln1);
        lin(b + ".wq", p.blocks[i].wq);
        lin(b + ".wk", p.blocks[i].wk);
        lin(b + ".wv", p.blocks[i].wv);
        lin(b + ".wo", p.blocks[i].wo);
        ln(b + ".ln2", p.blocks[i].ln2);
        lin(b + ".fc1", p.blocks[i].fc1);
        lin(b + ".fc2", p.blocks[i].fc2);
    }
    ln("final_ln", p.final_ln);
    lin("decoder", p.decoder);
}

inline size_t param_count(const ModelParams& p) {
    size_t n = 0;
    for_each_tensor(const_cast<ModelParams&>(p), [&](const std::string&, auto& t) {
        n += static_cast<size_t>(t.size());
    });
    return n;
}

// Closed-form total, used to cross-check construction and checkpoint loads.
inline size_t expected_param_count(const ModelConfig& cfg) {
    const size_t d = static_cast<size_t>(cfg.n_latent);
    const size_t h = static_cast<size_t>(cfg.mlp_hidden());
    const size_t td = static_cast<size_t>(cfg.token_dim);
    const size_t od = static_cast<size_t>(cfg.out_dim);
    const size_t pd = static_cast<size_t>(cfg.pos_dim);
    const size_t embed = td * d + d;
    const size_t pos = (pd * d + d) + (d * d + d);
    const size_t block = 2 * (2 * d) + 4 * (d * d + d) + (d * h + h) + (h * d + d);
    const size_t tail = 2 * d + (d * od + od);
    return embed + pos + static_cast<size_t>(cfg.n_blocks) * block + tail;
}

namespace nn {

inline void glorot_fill(Mat& w, Rng& rng) {
    const double a = std::sqrt(6.0 / (static_cast<double>(w.rows()) + static_cast<double>(w.cols())));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = uniform_range(rng, -a, a);
}

}  // namespace nn

inline ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelParams p;
    auto lin = [&](LinearParams& l, int in, int out) {
        l.w = Mat(in, out);
        l.b = Vec::Zero(out);
    };
    auto ln = [&](LayerNormParams& l) {
        l.gamma = Vec::Ones(cfg.n_latent);
        l.beta = Vec::Zero(cfg.n_latent);
    };
    lin(p.token_embed, cfg.token_dim, cfg.n_latent);
    lin(p.pos_fc1, cfg.pos_dim, cfg.n_latent);
    lin(p.pos_fc2, cfg.n_latent, cfg.n_latent);
    p.blocks.resize(static_cast<size_t>(cfg.n_blocks));
    for (auto& b : p.blocks) {
        ln(b.ln1);
        lin(b.wq, cfg.n_latent, cfg.n_latent);
        lin(b.wk, cfg.n_latent, cfg.n_latent);
        lin(b.wv, cfg.n_latent, cfg.n_latent);
        lin(b.wo, cfg.n_latent, cfg.n_latent);
        ln(b.ln2);
        lin(b.fc1, cfg.n_latent, cfg.mlp_hidden());
        lin(b.fc2, cfg.mlp_hidden(), cfg.n_latent);
    }
    ln(p.final_ln);
    lin(p.decoder, cfg.n_latent, cfg.out_dim);

    Rng rng(seed);
    for_each_tensor(p, [&](const std::string&, auto& t) {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Mat>) nn::glorot_fill(t, rng);
    });
    return p;
}

inline ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    for_each_tensor(z, [](const std::string&, auto& t) { t.setZero(); });
    return z;
}

// ---------------------------------------------------------------------------
// Elementwise pieces.
// ---------------------------------------------------------------------------

namespace nn {

inline constexpr double kLnEps = 1e-5;

// GELU, tanh form: 0.5 x (1 + tanh(c (x + 0.044715 x^3))). tanh is computed
// as 1 - 2/(exp(2u) + 1) so the whole map vectorizes through Eigen's packet
// exp and saturates cleanly for large |u|.
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

inline Mat gelu(const Mat& x) {
    Mat u = (2.0 * kGeluC) * (x.array() + kGeluA * x.array().cube()).matrix();
    Mat t = (1.0 - 2.0 / (u.array().exp() + 1.0)).matrix();
    return (0.5 * x.array() * (1.0 + t.array())).matrix();
}

inline Mat gelu_grad(const Mat& x) {
    Mat u = (2.0 * kGeluC) * (x.array() + kGeluA * x.array().cube()).matrix();
    Mat t = (1.0 - 2.0 / (u.array().exp() + 1.0)).matrix();
    return (0.5 * (1.0 + t.array()) +
            0.5 * x.array() * (1.0 - t.array().square()) *
                (kGeluC * (1.0 + 3.0 * kGeluA * x.array().square())))
        .matrix();
}

inline Mat linear(const Mat& x, const LinearParams& p) {
    Mat y = x * p.w;
    y.rowwise() += p.b.transpose();
    return y;
}

// dx = dy W^T, dW += x^T dy, db += column sums of dy.
inline void linear_backward(const Mat& x, const Mat& dy, const LinearParams& p, Mat& dx,
                            LinearParams& grad) {
    grad.w.noalias() += x.transpose() * dy;
    grad.b.noalias() += dy.colwise().sum().transpose();
    dx.noalias() = dy * p.w.transpose();
}

// Row-wise layer norm; caches the normalized rows and reciprocal stddevs.
inline Mat layer_norm(const Mat& x, const LayerNormParams& p, Mat* xhat_out, Vec* rstd_out) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    Mat y(n, d);
    Mat xhat(n, d);
    Vec rstd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = x.row(i).array();
        const double mu = row.mean();
        const double var = (row - mu).square().mean();
        const double r = 1.0 / std::sqrt(var + kLnEps);
        xhat.row(i) = (row - mu) * r;
        y.row(i) = xhat.row(i).array() * p.gamma.transpose().array() + p.beta.transpose().array();
        rstd[i] = r;
    }
    if (xhat_out) *xhat_out = std::move(xhat);
    if (rstd_out) *rstd_out = std::move(rstd);
    return y;
}

inline void layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& rstd,
                                const LayerNormParams& p, Mat& dx, LayerNormParams& grad) {
    const Eigen::Index n = dy.rows();
    const Eigen::Index d = dy.cols();
    grad.gamma.noalias() += (dy.array() * xhat.array()).colwise().sum().matrix().transpose();
    grad.beta.noalias() += dy.colwise().sum().transpose();
    dx.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto dxhat = (dy.row(i).array() * p.gamma.transpose().array()).eval();
        const double m1 = dxhat.mean();
        const double m2 = (dxhat * xhat.row(i).array()).mean();
        dx.row(i) = rstd[i] * (dxhat - m1 - xhat.row(i).array() * m2);
    }
}

inline void softmax_rows(Mat& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
    }
}

// ds = a .* (da - rowdot(da, a)), rowwise.
inline Mat softmax_backward(const Mat& da, const Mat& a) {
    Mat ds(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double dot = da.row(i).dot(a.row(i));
        ds.row(i) = a.row(i).array() * (da.row(i).array() - dot);
    }
    return ds;
}

// Inverted dropout mask: 0 with probability p, 1/(1-p) otherwise.
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
    Mat m(rows, cols);
    const double scale = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform_double(rng) < p ? 0.0 : scale;
    return m;
}

}  // namespace nn

// ---------------------------------------------------------------------------
// Batched forward/backward. B samples of N_t tokens are stacked into
// (B*N_t)-row matrices so the linear layers run as large GEMMs; attention
// works on per-sample row blocks. Per-sample dropout masks are generated
// from per-sample seeds, which keeps multithreaded batches reproducible.
// ---------------------------------------------------------------------------

enum class Mode { train, eval };

struct BlockCache {
    Mat xhat1;
    Vec rstd1;
    Mat q, k, v;
    std::vector<Mat> attn;       // per sample*head, softmax probs (pre-dropout)
    std::vector<Mat> attn_mask;  // per sample*head (train only)
    Mat context;                 // pre output-projection
    Mat attn_branch_mask;        // train only
    Mat h1;
    Mat xhat2;
    Vec rstd2;
    Mat fc1_out;
    Mat gelu_out;
    Mat mlp_branch_mask;  // train only
};

struct ForwardCache {
    Mat tokens, positions;
    Mat pos_fc1_out, pos_gelu;
    Mat h0;
    std::vector<BlockCache> blocks;
    Mat query_rows;  // B x D, block-stack output at each sample's row 0
    Mat xhatf;
    Vec rstdf;
};

struct StackedBatch {
    Mat tokens;    // (B*T) x token_dim
    Mat positions; // (B*T) x 3
    Mat baseline;  // B x out_dim
    Mat target;    // B x out_dim (unused rows allowed at inference)
    int B = 0;
    int T = 0;
};

inline StackedBatch stack_samples(const std::vector<TrainingSample>& samples,
                                  const std::vector<int>& idx, bool with_target) {
    if (idx.empty()) throw config_error("stack_samples: empty batch");
    const auto& first = samples[static_cast<size_t>(idx[0])];
    StackedBatch b;
    b.B = static_cast<int>(idx.size());
    b.T = static_cast<int>(first.tokens.rows());
    b.tokens = Mat(static_cast<Eigen::Index>(b.B) * b.T, first.tokens.cols());
    b.positions = Mat(static_cast<Eigen::Index>(b.B) * b.T, 3);
    b.baseline = Mat(b.B, first.baseline.size());
    b.target = Mat::Zero(b.B, first.baseline.size());
    for (int s = 0; s < b.B; ++s) {
        const auto& smp = samples[static_cast<size_t>(idx[static_cast<size_t>(s)])];
        if (smp.tokens.rows() != b.T)
            throw config_error("stack_samples: inconsistent token counts in batch");
        b.tokens.middleRows(static_cast<Eigen::Index>(s) * b.T, b.T) = smp.tokens;
        b.positions.middleRows(static_cast<Eigen::Index>(s) * b.T, b.T) = smp.positions;
        b.baseline.row(s) = smp.baseline.transpose();
        if (with_target) {
            if (smp.target.size() == 0)
                throw config_error("stack_samples: sample has no target");
            b.target.row(s) = smp.target.transpose();
        }
    }
    return b;
}

// Runs the stacked forward pass; returns the B x out_dim scaled predictions
// (baseline + decoded residual). In train mode dropout masks are drawn from
// per-sample streams derived from `dropout_seed`; cache may be null when no
// backward pass will follow.
inline Mat forward_batch(const StackedBatch& batch, const ModelParams& p, const ModelConfig& cfg,
                         Mode mode, uint64_t dropout_seed, ForwardCache* cache) {
    cfg.validate();
    const int B = batch.B;
    const int T = batch.T;
    const int H = cfg.n_heads();
    const int dh = cfg.head_dim;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool training = mode == Mode::train && cfg.dropout_p > 0.0;
    if (batch.tokens.cols() != cfg.token_dim)
        throw config_error("forward: token width does not match model config");

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    if (cache) {
        c.tokens = batch.tokens;
        c.positions = batch.positions;
    }

    // Embedding: Linear(tokens) + MLP(positions), rowwise.
    Mat pos_f1 = nn::linear(batch.positions, p.pos_fc1);
    Mat pos_g = nn::gelu(pos_f1);
    Mat h = nn::linear(batch.tokens, p.token_embed) + nn::linear(pos_g, p.pos_fc2);
    if (cache) {
        c.pos_fc1_out = std::move(pos_f1);
        c.pos_gelu = std::move(pos_g);
        c.h0 = h;
    }

    if (cache) c.blocks.resize(p.blocks.size());
    std::vector<uint64_t> sample_seeds;
    if (training) {
        sample_seeds.resize(static_cast<size_t>(B));
        for (int s = 0; s < B; ++s)
            sample_seeds[static_cast<size_t>(s)] = derive_seed(dropout_seed, static_cast<uint64_t>(s));
    }

    for (size_t bi = 0; bi < p.blocks.size(); ++bi) {
        const BlockParams& bp = p.blocks[bi];
        BlockCache bc_local;
        BlockCache& bc = cache ? c.blocks[bi] : bc_local;

        Mat xn1 = nn::layer_norm(h, bp.ln1, cache ? &bc.xhat1 : nullptr, cache ? &bc.rstd1 : nullptr);
        Mat q = nn::linear(xn1, bp.wq);
        Mat k = nn::linear(xn1, bp.wk);
        Mat v = nn::linear(xn1, bp.wv);

        Mat context(q.rows(), q.cols());
        if (cache) {
            bc.attn.assign(static_cast<size_t>(B) * H, Mat());
            if (training) bc.attn_mask.assign(static_cast<size_t>(B) * H, Mat());
        }
#pragma omp parallel for schedule(static)
        for (int s = 0; s < B; ++s) {
            Rng rng;
            if (training)
                rng.seed(derive_seed(sample_seeds[static_cast<size_t>(s)], 3 * bi));
            const Eigen::Index r0 = static_cast<Eigen::Index>(s) * T;
            for (int head = 0; head < H; ++head) {
                const Eigen::Index c0 = static_cast<Eigen::Index>(head) * dh;
                Mat scores = q.block(r0, c0, T, dh) * k.block(r0, c0, T, dh).transpose();
                scores *= inv_sqrt_dh;
                nn::softmax_rows(scores);
                Mat probs = scores;
                if (training) {
                    Mat mask = nn::dropout_mask(T, T, cfg.dropout_p, rng);
                    probs.array() *= mask.array();
                    if (cache) bc.attn_mask[static_cast<size_t>(s) * H + head] = std::move(mask);
                }
                context.block(r0, c0, T, dh).noalias() = probs * v.block(r0, c0, T, dh);
                if (cache) bc.attn[static_cast<size_t>(s) * H + head] = std::move(scores);
            }
        }
        if (cache) {
            bc.q = std::move(q);
            bc.k = std::move(k);
            bc.v = std::move(v);
        }

        Mat attn_out = nn::linear(context, bp.wo);
        if (cache) bc.context = std::move(context);
        if (training) {
            Mat mask(attn_out.rows(), attn_out.cols());
#pragma omp parallel for schedule(static)
            for (int s = 0; s < B; ++s) {
                Rng rng(derive_seed(sample_seeds[static_cast<size_t>(s)], 3 * bi + 1));
                mask.middleRows(static_cast<Eigen::Index>(s) * T, T) =
                    nn::dropout_mask(T, cfg.n_latent, cfg.dropout_p, rng);
            }
            attn_out.array() *= mask.array();
            if (cache) bc.attn_branch_mask = std::move(mask);
        }
        Mat h1 = h + attn_out;

        Mat xn2 = nn::layer_norm(h1, bp.ln2, cache ? &bc.xhat2 : nullptr, cache ? &bc.rstd2 : nullptr);
        Mat f1 = nn::linear(xn2, bp.fc1);
        Mat g = nn::gelu(f1);
        Mat f2 = nn::linear(g, bp.fc2);
        if (training) {
            Mat mask(f2.rows(), f2.cols());
#pragma omp parallel for schedule(static)
            for (int s = 0; s < B; ++s) {
                Rng rng(derive_seed(sample_seeds[static_cast<size_t>(s)], 3 * bi + 2));
                mask.middleRows(static_cast<Eigen::Index>(s) * T, T) =
                    nn::dropout_mask(T, cfg.n_latent, cfg.dropout_p, rng);
            }
            f2.array() *= mask.array();
            if (cache) bc.mlp_branch_mask = std::move(mask);
        }
        if (cache) {
            bc.fc1_out = std::move(f1);
            bc.gelu_out = std::move(g);
            bc.h1 = std::move(h1);
            h = bc.h1 + f2;
        } else {
            h = h1 + f2;
        }
    }

    // Decode the query token of each sample.
    Mat rows0(B, cfg.n_latent);
    for (int s = 0; s < B; ++s) rows0.row(s) = h.row(static_cast<Eigen::Index>(s) * T);
    Mat yf = nn::layer_norm(rows0, p.final_ln, cache ? &c.xhatf : nullptr, cache ? &c.rstdf : nullptr);
    if (cache) c.query_rows = std::move(rows0);
    Mat residual = nn::linear(yf, p.decoder);
    return batch.baseline + residual;
}

// Mean over the batch of the per-sample MSE over all out_dim scaled entries.
inline double batch_mse(const Mat& pred, const Mat& target) {
    const double n = static_cast<double>(pred.rows()) * static_cast<double>(pred.cols());
    return (pred - target).squaredNorm() / n;
}

// Backward pass for batch_mse(forward_batch(...)); accumulates into `grad`
// (caller zeroes it). Returns the loss.
inline double backward_batch(const StackedBatch& batch, const ModelParams& p, const ModelConfig& cfg,
                             const ForwardCache& c, const Mat& pred, ModelParams& grad) {
    const int B = batch.B;
    const int T = batch.T;
    const int H = cfg.n_heads();
    const int dh = cfg.head_dim;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool training = c.blocks.empty() ? false : c.blocks[0].attn_branch_mask.size() > 0;

    const double loss = batch_mse(pred, batch.target);
    Mat dresidual = (2.0 / (static_cast<double>(B) * cfg.out_dim)) * (pred - batch.target);

    // Decoder and final layer norm.
    Mat yf = c.xhatf;
    for (Eigen::Index i = 0; i < yf.rows(); ++i)
        yf.row(i) = yf.row(i).array() * p.final_ln.gamma.transpose().array() +
                    p.final_ln.beta.transpose().array();
    Mat dyf;
    nn::linear_backward(yf, dresidual, p.decoder, dyf, grad.decoder);
    Mat drows0;
    nn::layer_norm_backward(dyf, c.xhatf, c.rstdf, p.final_ln, drows0, grad.final_ln);

    Mat dhid = Mat::Zero(static_cast<Eigen::Index>(B) * T, cfg.n_latent);
    for (int s = 0; s < B; ++s) dhid.row(static_cast<Eigen::Index>(s) * T) = drows0.row(s);

    for (size_t bi = p.blocks.size(); bi-- > 0;) {
        const BlockParams& bp = p.blocks[bi];
        const BlockCache& bc = c.blocks[bi];
        ModelParams& g = grad;
        BlockParams& gb = g.blocks[bi];

        // MLP branch: h_out = h1 + mask .* fc2(gelu(fc1(ln2(h1)))).
        Mat df2 = dhid;
        if (training) df2.array() *= bc.mlp_branch_mask.array();
        Mat dgelu;
        nn::linear_backward(bc.gelu_out, df2, bp.fc2, dgelu, gb.fc2);
        Mat df1 = dgelu.array() * nn::gelu_grad(bc.fc1_out).array();
        Mat xn2 = bc.xhat2;
        for (Eigen::Index i = 0; i < xn2.rows(); ++i)
            xn2.row(i) = xn2.row(i).array() * bp.ln2.gamma.transpose().array() +
                         bp.ln2.beta.transpose().array();
        Mat dxn2;
        nn::linear_backward(xn2, df1, bp.fc1, dxn2, gb.fc1);
        Mat dh1_ln;
        nn::layer_norm_backward(dxn2, bc.xhat2, bc.rstd2, bp.ln2, dh1_ln, gb.ln2);
        Mat dh1 = dhid + dh1_ln;

        // Attention branch: h1 = h + mask .* wo(attention(ln1(h))).
        Mat dattn_out = dh1;
        if (training) dattn_out.array() *= bc.attn_branch_mask.array();
        Mat dcontext;
        nn::linear_backward(bc.context, dattn_out, bp.wo, dcontext, gb.wo);

        Mat dq(dcontext.rows(), dcontext.cols());
        Mat dk(dcontext.rows(), dcontext.cols());
        Mat dv(dcontext.rows(), dcontext.cols());
#pragma omp parallel for schedule(static)
        for (int s = 0; s < B; ++s) {
            const Eigen::Index r0 = static_cast<Eigen::Index>(s) * T;
            for (int head = 0; head < H; ++head) {
                const Eigen::Index c0 = static_cast<Eigen::Index>(head) * dh;
                const Mat& a = bc.attn[static_cast<size_t>(s) * H + head];
                Mat probs = a;
                Mat da_drop = dcontext.block(r0, c0, T, dh) * bc.v.block(r0, c0, T, dh).transpose();
                if (training) {
                    const Mat& mask = bc.attn_mask[static_cast<size_t>(s) * H + head];
                    probs.array() *= mask.array();
                    da_drop.array() *= mask.array();
                }
                dv.block(r0, c0, T, dh).noalias() =
                    probs.transpose() * dcontext.block(r0, c0, T, dh);
                Mat ds = nn::softmax_backward(da_drop, a);
                ds *= inv_sqrt_dh;
                dq.block(r0, c0, T, dh).noalias() = ds * bc.k.block(r0, c0, T, dh);
                dk.block(r0, c0, T, dh).noalias() = ds.transpose() * bc.q.block(r0, c0, T, dh);
            }
        }

        Mat xn1 = bc.xhat1;
        for (Eigen::Index i = 0; i < xn1.rows(); ++i)
            xn1.row(i) = xn1.row(i).array() * bp.ln1.gamma.transpose().array() +
                         bp.ln1.beta.transpose().array();
        Mat dxn1, tmp;
        nn::linear_backward(xn1, dq, bp.wq, dxn1, gb.wq);
        nn::linear_backward(xn1, dk, bp.wk, tmp, gb.wk);
        dxn1 += tmp;
        nn::linear_backward(xn1, dv, bp.wv, tmp, gb.wv);
        dxn1 += tmp;
        Mat dh_ln;
        nn::layer_norm_backward(dxn1, bc.xhat1, bc.rstd1, bp.ln1, dh_ln, gb.ln1);
        dhid = dh1 + dh_ln;
    }

    // Embedding: h0 = token_embed(tokens) + pos_fc2(gelu(pos_fc1(positions))).
    Mat dtokens_unused;
    nn::linear_backward(c.tokens, dhid, p.token_embed, dtokens_unused, grad.token_embed);
    Mat dpos_g;
    nn::linear_backward(c.pos_gelu, dhid, p.pos_fc2, dpos_g, grad.pos_fc2);
    Mat dpos_f1 =
        dpos_g.array() * nn::gelu_grad(c.pos_fc1_out).array();
    Mat dpos_unused;
    nn::linear_backward(c.positions, dpos_f1, p.pos_fc1, dpos_unused, grad.pos_fc1);
    return loss;
}

// ---------------------------------------------------------------------------
// Public entry points.
// ---------------------------------------------------------------------------

// Scaled prediction (baseline + residual) for one sample.
inline Vec forward(const TrainingSample& sample, const ModelParams& p, const ModelConfig& cfg,
                   Mode mode = Mode::eval, uint64_t dropout_seed = 0) {
    std::vector<TrainingSample> one = {sample};
    const StackedBatch batch = stack_samples(one, {0}, false);
    const Mat pred = forward_batch(batch, p, cfg, mode, dropout_seed, nullptr);
    return pred.row(0).transpose();
}

// Eval-mode loss of a batch; the finite-difference oracle differentiates this.
inline double batch_loss(const std::vector<TrainingSample>& samples, const std::vector<int>& idx,
                         const ModelParams& p, const ModelConfig& cfg) {
    const StackedBatch batch = stack_samples(samples, idx, true);
    const Mat pred = forward_batch(batch, p, cfg, Mode::eval, 0, nullptr);
    return batch_mse(pred, batch.target);
}

// Loss and exact reverse-mode gradients for one mini-batch.
inline double loss_and_grads(const std::vector<TrainingSample>& samples, const std::vector<int>& idx,
                             const ModelParams& p, const ModelConfig& cfg, Mode mode,
                             uint64_t dropout_seed, ModelParams& grad) {
    const StackedBatch batch = stack_samples(samples, idx, true);
    ForwardCache cache;
    const Mat pred = forward_batch(batch, p, cfg, mode, dropout_seed, &cache);
    const double loss = backward_batch(batch, p, cfg, cache, pred, grad);
    if (!std::isfinite(loss)) throw divergence_error("loss_and_grads: non-finite loss");
    return loss;
}

// ---------------------------------------------------------------------------
// Standalone single-sequence ops. These mirror the batched path and exist for
// composability and direct testing of the attention mechanics.
// ---------------------------------------------------------------------------

inline Mat embed(const Mat& tokens, const Mat& positions, const ModelParams& p) {
    if (tokens.rows() != positions.rows())
        throw config_error("embed: token/position row mismatch");
    Mat pos_g = nn::gelu(nn::linear(positions, p.pos_fc1));
    return nn::linear(tokens, p.token_embed) + nn::linear(pos_g, p.pos_fc2);
}

inline Mat mhsa(const Mat& h, const BlockParams& bp, int n_heads, double dropout_p = 0.0,
                Rng* rng = nullptr) {
    const int T = static_cast<int>(h.rows());
    const int dh = static_cast<int>(h.cols()) / n_heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat q = nn::linear(h, bp.wq);
    Mat k = nn::linear(h, bp.wk);
    Mat v = nn::linear(h, bp.wv);
    Mat context(h.rows(), h.cols());
    for (int head = 0; head < n_heads; ++head) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(head) * dh;
        Mat scores = q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose();
        scores *= inv_sqrt_dh;
        nn::softmax_rows(scores);
        if (dropout_p > 0.0 && rng)
            scores.array() *= nn::dropout_mask(T, T, dropout_p, *rng).array();
        context.middleCols(c0, dh).noalias() = scores * v.middleCols(c0, dh);
    }
    return nn::linear(context, bp.wo);
}

inline Mat transformer_block(const Mat& h, const BlockParams& bp, int n_heads,
                             double dropout_p = 0.0, Rng* rng = nullptr) {
    Mat xn1 = nn::layer_norm(h, bp.ln1, nullptr, nullptr);
    Mat branch = mhsa(xn1, bp, n_heads, dropout_p, rng);
    if (dropout_p > 0.0 && rng)
        branch.array() *= nn::dropout_mask(branch.rows(), branch.cols(), dropout_p, *rng).array();
    Mat h1 = h + branch;
    Mat xn2 = nn::layer_norm(h1, bp.ln2, nullptr, nullptr);
    Mat f2 = nn::linear(
        nn::gelu(nn::linear(xn2, bp.fc1)), bp.fc2);
    if (dropout_p > 0.0 && rng)
        f2.array() *= nn::dropout_mask(f2.rows(), f2.cols(), dropout_p, *rng).array();
    return h1 + f2;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "SRGTCKPT", u32 version, ModelConfig (u32 n_latent,
// n_blocks, head_dim, mlp_ratio, token_dim, out_dim, pos_dim; f64 dropout_p),
// pipeline settings (u32 K, u32 k_interp; f64 epsilon_d, match_tol), u64
// training step, u32 tensor count, then named tensors as (u16 name length,
// name, u32 rank, u32 dims[rank], f64 data). Optimizer moments, when present,
// are appended with the same scheme under "opt.m." / "opt.v." name prefixes.
// ---------------------------------------------------------------------------

struct PipelineConfig {
    int K = 26;
    InterpConfig interp;
};

struct Checkpoint {
    ModelConfig model;
    PipelineConfig pipeline;
    uint64_t step = 0;
    ModelParams params;
    std::optional<ModelParams> opt_m;
    std::optional<ModelParams> opt_v;
};

inline constexpr char kCheckpointMagic[9] = "SRGTCKPT";
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_tensor(std::ostream& os, const std::string& name, const double* data,
                         const std::vector<uint32_t>& dims) {
    write_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(dims.size()));
    size_t n = 1;
    for (uint32_t d : dims) {
        write_u32(os, d);
        n *= d;
    }
    write_f64_array(os, data, n);
}

template <typename P>
uint32_t count_tensors(P& params) {
    uint32_t n = 0;
    for_each_tensor(params, [&](const std::string&, auto&) { ++n; });
    return n;
}

template <typename P>
void write_all_tensors(std::ostream& os, P& params, const std::string& prefix) {
    for_each_tensor(params, [&](const std::string& name, auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Mat>) {
            write_tensor(os, prefix + name, t.data(),
                         {static_cast<uint32_t>(t.rows()), static_cast<uint32_t>(t.cols())});
        } else {
            write_tensor(os, prefix + name, t.data(), {static_cast<uint32_t>(t.size())});
        }
    });
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_checkpoint: cannot open " + path);
    write_magic(os, kCheckpointMagic);
    write_u32(os, kCheckpointVersion);
    write_u32(os, static_cast<uint32_t>(ck.model.n_latent));
    write_u32(os, static_cast<uint32_t>(ck.model.n_blocks));
    write_u32(os, static_cast<uint32_t>(ck.model.head_dim));
    write_u32(os, static_cast<uint32_t>(ck.model.mlp_ratio));
    write_u32(os, static_cast<uint32_t>(ck.model.token_dim));
    write_u32(os, static_cast<uint32_t>(ck.model.out_dim));
    write_u32(os, static_cast<uint32_t>(ck.model.pos_dim));
    write_f64(os, ck.model.dropout_p);
    write_u32(os, static_cast<uint32_t>(ck.pipeline.K));
    write_u32(os, static_cast<uint32_t>(ck.pipeline.interp.k_interp));
    write_f64(os, ck.pipeline.interp.epsilon_d);
    write_f64(os, ck.pipeline.interp.match_tol);
    write_u64(os, ck.step);
    uint32_t n = detail::count_tensors(const_cast<ModelParams&>(ck.params));
    const bool with_opt = ck.opt_m.has_value() && ck.opt_v.has_value();
    if (with_opt) n *= 3;
    write_u32(os, n);
    detail::write_all_tensors(os, const_cast<ModelParams&>(ck.params), "");
    if (with_opt) {
        detail::write_all_tensors(os, const_cast<ModelParams&>(*ck.opt_m), "opt.m.");
        detail::write_all_tensors(os, const_cast<ModelParams&>(*ck.opt_v), "opt.v.");
    }
    if (!os) throw io_error("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_checkpoint: cannot open " + path);
    expect_magic(is, kCheckpointMagic, "checkpoint");
    const uint32_t version = read_u32(is, "version");
    if (version != kCheckpointVersion)
        throw format_error("load_checkpoint: unsupported version " + std::to_string(version));
    Checkpoint ck;
    ck.model.n_latent = static_cast<int>(read_u32(is, "n_latent"));
    ck.model.n_blocks = static_cast<int>(read_u32(is, "n_blocks"));
    ck.model.head_dim = static_cast<int>(read_u32(is, "head_dim"));
    ck.model.mlp_ratio = static_cast<int>(read_u32(is, "mlp_ratio"));
    ck.model.token_dim = static_cast<int>(read_u32(is, "token_dim"));
    ck.model.out_dim = static_cast<int>(read_u32(is, "out_dim"));
    ck.model.pos_dim = static_cast<int>(read_u32(is, "pos_dim"));
    ck.model.dropout_p = read_f64(is, "dropout_p");
    ck.model.validate();
    ck.pipeline.K = static_cast<int>(read_u32(is, "K"));
    ck.pipeline.interp.k_interp = static_cast<int>(read_u32(is, "k_interp"));
    ck.pipeline.interp.epsilon_d = read_f64(is, "epsilon_d");
    ck.pipeline.interp.match_tol = read_f64(is, "match_tol");
    ck.step = read_u64(is, "step");
    const uint32_t n_tensors = read_u32(is, "tensor count");

    ck.params = init_params(ck.model, 0);
    ModelParams opt_m = zeros_like(ck.params);
    ModelParams opt_v = zeros_like(ck.params);
    bool saw_opt = false;

    std::map<std::string, std::pair<double*, size_t>> slots;
    auto index_params = [&](ModelParams& p, const std::string& prefix) {
        for_each_tensor(p, [&](const std::string& name, auto& t) {
            slots[prefix + name] = {t.data(), static_cast<size_t>(t.size())};
        });
    };
    index_params(ck.params, "");
    index_params(opt_m, "opt.m.");
    index_params(opt_v, "opt.v.");

    for (uint32_t i = 0; i < n_tensors; ++i) {
        const uint16_t len = read_u16(is, "tensor name length");
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw format_error("load_checkpoint: truncated tensor name");
        const uint32_t rank = read_u32(is, "tensor rank");
        size_t count = 1;
        for (uint32_t r = 0; r < rank; ++r) count *= read_u32(is, "tensor dim");
        const auto it = slots.find(name);
        if (it == slots.end())
            throw format_error("load_checkpoint: unknown tensor '" + name + "'");
        if (it->second.second != count)
            throw format_error("load_checkpoint: tensor '" + name + "' has wrong size");
        read_f64_array(is, it->second.first, count, name.c_str());
        if (name.rfind("opt.", 0) == 0) saw_opt = true;
    }
    if (param_count(ck.params) != expected_param_count(ck.model))
        throw format_error("load_checkpoint: parameter count mismatch against config");
    if (saw_opt) {
        ck.opt_m = std::move(opt_m);
        ck.opt_v = std::move(opt_v);
    }
    return ck;
}

}  // namespace srgt

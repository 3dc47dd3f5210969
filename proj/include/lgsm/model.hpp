#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lgsm/graph.hpp"
#include "lgsm/matrix.hpp"
#include "lgsm/nn.hpp"
#include "lgsm/seqext.hpp"
#include "lgsm/ssm.hpp"

namespace lgsm {

struct ModelConfig {
    int hidden_dim = 32;
    int num_blocks = 1;
    SeqExtractConfig seq;
    TaskLevel level = TaskLevel::Node;
    int in_dim = 1;
    int out_dim = 1;

    void validate() const {
        if (hidden_dim < 1 || num_blocks < 1 || in_dim < 1 || out_dim < 1)
            throw InvalidParams("model dims must be >= 1");
        seq.validate();
    }
};

// Test hooks, fixed at construction. bypass_residual together with
// bypass_layernorm gives the bare SSM → σ₁ → mixing composition the
// sensitivity bounds are stated for.
struct ModelHooks {
    bool identity_sigma2 = false;
    bool bypass_layernorm = false;
    bool bypass_residual = false;
};

struct BlockParams {
    SsmParams ssm;
    LayerNorm ln_ssm, ln_ffn, ln_mix;
    Ffn ffn1, ffn_mix;
};

struct ModelParams {
    ModelConfig cfg;
    ModelHooks hooks;
    ParamSlot enc_w;  // in_dim × d, bias-free so extraction commutes with encoding
    std::vector<BlockParams> blocks;
    ParamSlot pool_w, pool_b;  // graph-level decoder: concat(max,sum,mean) → d
    Ffn out_ffn;               // d → out_dim
};

inline ModelParams init_model(const ModelConfig& cfg, uint64_t seed, ModelHooks hooks = {}) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    p.hooks = hooks;
    Rng rng(seed);
    int d = cfg.hidden_dim;
    p.enc_w = ParamSlot(cfg.in_dim, d);
    fill_uniform(p.enc_w.value, rng, 1.0 / std::sqrt(static_cast<double>(cfg.in_dim)));
    p.blocks.resize(cfg.num_blocks);
    for (BlockParams& b : p.blocks) {
        b.ssm = SsmParams::init(d, d, d, rng);
        b.ln_ssm = LayerNorm::init(d);
        b.ln_ffn = LayerNorm::init(d);
        b.ln_mix = LayerNorm::init(d);
        b.ln_ssm.bypass = b.ln_ffn.bypass = b.ln_mix.bypass = hooks.bypass_layernorm;
        b.ffn1 = Ffn::init(d, d, rng);
        b.ffn_mix = Ffn::init(d, d, rng);
    }
    if (cfg.level == TaskLevel::Graph) {
        p.pool_w = ParamSlot(3 * d, d);
        p.pool_b = ParamSlot(1, d);
        fill_uniform(p.pool_w.value, rng, 1.0 / std::sqrt(3.0 * d));
    }
    p.out_ffn = Ffn::init(d, cfg.out_dim, rng);
    return p;
}

inline std::vector<std::pair<std::string, ParamSlot*>> named_slots(ModelParams& p) {
    std::vector<std::pair<std::string, ParamSlot*>> out;
    out.push_back({"encoder.w", &p.enc_w});
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        BlockParams& b = p.blocks[i];
        std::string pre = "block" + std::to_string(i) + ".";
        out.push_back({pre + "ssm.a_logits", &b.ssm.a_logits});
        out.push_back({pre + "ssm.B", &b.ssm.B});
        out.push_back({pre + "ssm.C", &b.ssm.C});
        for (auto [tag, ln] : {std::pair<const char*, LayerNorm*>{"ln_ssm", &b.ln_ssm},
                               {"ln_ffn", &b.ln_ffn},
                               {"ln_mix", &b.ln_mix}}) {
            out.push_back({pre + tag + ".gain", &ln->gain});
            out.push_back({pre + tag + ".bias", &ln->bias});
        }
        for (auto [tag, f] : {std::pair<const char*, Ffn*>{"ffn1", &b.ffn1}, {"ffn_mix", &b.ffn_mix}}) {
            out.push_back({pre + tag + ".w1", &f->w1});
            out.push_back({pre + tag + ".b1", &f->b1});
            out.push_back({pre + tag + ".w2", &f->w2});
            out.push_back({pre + tag + ".b2", &f->b2});
        }
    }
    if (p.cfg.level == TaskLevel::Graph) {
        out.push_back({"decoder.pool_w", &p.pool_w});
        out.push_back({"decoder.pool_b", &p.pool_b});
    }
    out.push_back({"decoder.ffn.w1", &p.out_ffn.w1});
    out.push_back({"decoder.ffn.b1", &p.out_ffn.b1});
    out.push_back({"decoder.ffn.w2", &p.out_ffn.w2});
    out.push_back({"decoder.ffn.b2", &p.out_ffn.b2});
    return out;
}

inline int64_t count_params(const ModelParams& p) {
    int64_t total = 0;
    for (auto& [name, slot] : named_slots(const_cast<ModelParams&>(p)))
        total += static_cast<int64_t>(slot->value.size());
    return total;
}

inline void zero_grads(ModelParams& p) {
    for (auto& [name, slot] : named_slots(p)) slot->zero_grad();
}

struct BlockCache {
    SequenceBatch in_seq;
    SsmCache ssm;
    std::vector<LayerNormCache> lnc_ssm;
    SequenceBatch s_ssm;
    std::vector<FfnCache> ffn1c;
    std::vector<LayerNormCache> lnc_ffn;
    SequenceBatch s_ffn;
    SequenceBatch mix_pre;
    std::vector<FfnCache> ffnmc;
    std::vector<LayerNormCache> lnc_mix;
};

struct ModelCache {
    Matrix h0;
    SequenceBatch seq0;
    std::vector<BlockCache> blocks;
    SequenceBatch out_seq;  // last block output
    // decoder
    Matrix dec_in;            // out_ffn input (n×d node-level, 1×d graph-level)
    Matrix pooled;            // 1 × 3d
    std::vector<int> argmax;  // max-pool winners per column
    FfnCache outc;
};

// One block: SSM, FFN, then graph mixing, each with residual and LayerNorm;
// element 0 passes the mixing stage unchanged.
inline SequenceBatch block_forward(const BlockParams& b, const SequenceBatch& in, const Matrix& A,
                                   const ModelHooks& hooks, BlockCache* cache = nullptr) {
    int L = static_cast<int>(in.size());
    SsmCache ssm_cache;
    SequenceBatch ssm_y = ssm_forward_sequential(b.ssm, in, cache ? &ssm_cache : nullptr);
    SequenceBatch s_ssm(L), s_ffn(L), out(L);
    if (cache) {
        cache->in_seq = in;
        cache->ssm = std::move(ssm_cache);
        cache->lnc_ssm.resize(L);
        cache->ffn1c.resize(L);
        cache->lnc_ffn.resize(L);
        cache->s_ssm.resize(L);
        cache->s_ffn.resize(L);
        cache->mix_pre.resize(L);
        cache->ffnmc.resize(L);
        cache->lnc_mix.resize(L);
    }
    for (int k = 0; k < L; ++k) {
        Matrix pre = std::move(ssm_y[k]);
        if (!hooks.bypass_residual) add_into(pre, in[k]);
        s_ssm[k] = layernorm_forward(b.ln_ssm, pre, cache ? &cache->lnc_ssm[k] : nullptr);

        Matrix f = ffn_forward(b.ffn1, s_ssm[k], cache ? &cache->ffn1c[k] : nullptr);
        if (!hooks.bypass_residual) add_into(f, s_ssm[k]);
        s_ffn[k] = layernorm_forward(b.ln_ffn, f, cache ? &cache->lnc_ffn[k] : nullptr);
    }
    out[0] = s_ffn[0];
    for (int k = 1; k < L; ++k) {
        Matrix mix_pre = s_ffn[k];
        matmul_into(A, s_ffn[k - 1], mix_pre, true);
        Matrix t = hooks.identity_sigma2
                       ? mix_pre
                       : ffn_forward(b.ffn_mix, mix_pre, cache ? &cache->ffnmc[k] : nullptr);
        if (!hooks.bypass_residual) add_into(t, s_ffn[k]);
        out[k] = layernorm_forward(b.ln_mix, t, cache ? &cache->lnc_mix[k] : nullptr);
        if (cache) cache->mix_pre[k] = std::move(mix_pre);
    }
    if (cache) {
        cache->s_ssm = std::move(s_ssm);
        cache->s_ffn = std::move(s_ffn);
    }
    return out;
}

// Reverse of block_forward; returns grad wrt the input sequence.
inline SequenceBatch block_backward(BlockParams& b, BlockCache& cache, const Matrix& A,
                                    const ModelHooks& hooks, const SequenceBatch& dout) {
    int L = static_cast<int>(dout.size());
    SequenceBatch d_ffn(L);
    for (int k = 0; k < L; ++k) d_ffn[k] = Matrix(dout[k].rows, dout[k].cols);
    add_into(d_ffn[0], dout[0]);
    for (int k = L - 1; k >= 1; --k) {
        Matrix d_t = layernorm_backward(b.ln_mix, cache.lnc_mix[k], dout[k]);
        if (!hooks.bypass_residual) add_into(d_ffn[k], d_t);
        Matrix d_pre = hooks.identity_sigma2
                           ? std::move(d_t)
                           : ffn_backward(b.ffn_mix, cache.mix_pre[k], cache.ffnmc[k], d_t);
        add_into(d_ffn[k], d_pre);
        matmul_tn_into(A, d_pre, d_ffn[k - 1], true);
    }
    SequenceBatch d_ssm_y(L), din(L);
    for (int k = 0; k < L; ++k) {
        Matrix d_f = layernorm_backward(b.ln_ffn, cache.lnc_ffn[k], d_ffn[k]);
        Matrix d_sssm = ffn_backward(b.ffn1, cache.s_ssm[k], cache.ffn1c[k], d_f);
        if (!hooks.bypass_residual) add_into(d_sssm, d_f);

        Matrix d_pre = layernorm_backward(b.ln_ssm, cache.lnc_ssm[k], d_sssm);
        din[k] = hooks.bypass_residual ? Matrix(d_pre.rows, d_pre.cols) : d_pre;
        d_ssm_y[k] = std::move(d_pre);
    }
    SequenceBatch d_from_ssm = ssm_backward(b.ssm, cache.in_seq, cache.ssm, d_ssm_y);
    for (int k = 0; k < L; ++k) add_into(din[k], d_from_ssm[k]);
    return din;
}

namespace detail {

inline void check_finite_seq(const SequenceBatch& seq, const char* where) {
    for (const Matrix& m : seq)
        if (!all_finite(m)) throw NonFiniteActivation(std::string("non-finite values after ") + where);
}

// Column-wise [max | sum | mean] over node rows; argmax records per-column
// winners (first index on ties) for the max-pool backward.
inline Matrix pool_concat(const Matrix& last, std::vector<int>* argmax = nullptr) {
    int n = last.rows, d = last.cols;
    Matrix pooled(1, 3 * d);
    if (argmax) argmax->assign(d, 0);
    for (int j = 0; j < d; ++j) {
        double mx = last(0, j), sum = 0.0;
        int arg = 0;
        for (int i = 0; i < n; ++i) {
            double v = last(i, j);
            sum += v;
            if (v > mx) {
                mx = v;
                arg = i;
            }
        }
        pooled(0, j) = mx;
        pooled(0, d + j) = sum;
        pooled(0, 2 * d + j) = sum / n;
        if (argmax) (*argmax)[j] = arg;
    }
    return pooled;
}

}  // namespace detail

// Forward over a precomputed operator sequence (training path). mats are the
// normalized M^(0..L-1); A is the raw adjacency used by graph mixing.
inline Matrix model_forward_ops(const ModelParams& p, const std::vector<Matrix>& mats, const Matrix& A,
                                const Matrix& X, ModelCache* cache = nullptr) {
    p.cfg.validate();
    check_shape(X.cols == p.cfg.in_dim, "model input width");
    check_shape(X.rows == A.rows, "model input rows");
    int n = X.rows, d = p.cfg.hidden_dim;
    Matrix h0 = matmul(X, p.enc_w.value);
    SequenceBatch seq(mats.size());
    for (size_t k = 0; k < mats.size(); ++k) seq[k] = matmul(mats[k], h0);
    if (cache) {
        cache->h0 = h0;
        cache->seq0 = seq;
        cache->blocks.resize(p.blocks.size());
    }
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        seq = block_forward(p.blocks[i], seq, A, p.hooks, cache ? &cache->blocks[i] : nullptr);
        detail::check_finite_seq(seq, "block");
    }
    if (cache) cache->out_seq = seq;
    const Matrix& last = seq.back();

    Matrix dec_in;
    std::vector<int> argmax;
    Matrix pooled;
    if (p.cfg.level == TaskLevel::Node) {
        dec_in = last;
    } else {
        pooled = detail::pool_concat(last, &argmax);
        dec_in = matmul(pooled, p.pool_w.value);
        add_into(dec_in, p.pool_b.value);
    }
    Matrix y = ffn_forward(p.out_ffn, dec_in, cache ? &cache->outc : nullptr);
    if (!all_finite(y)) throw NonFiniteActivation("non-finite prediction");
    if (cache) {
        cache->dec_in = std::move(dec_in);
        cache->pooled = std::move(pooled);
        cache->argmax = std::move(argmax);
    }
    return y;
}

inline Matrix model_forward(const ModelParams& p, const Graph& g, const Matrix& X, ModelCache* cache = nullptr) {
    OperatorSequence ops = operator_sequence(g, p.cfg.seq);
    return model_forward_ops(p, ops.mats, adjacency_matrix(g), X, cache);
}

// Accumulates grads into every slot; returns grad wrt X.
inline Matrix model_backward(ModelParams& p, const std::vector<Matrix>& mats, const Matrix& A,
                             const Matrix& X, ModelCache& cache, const Matrix& upstream) {
    int n = X.rows, d = p.cfg.hidden_dim;
    int L = static_cast<int>(cache.seq0.size());
    Matrix d_dec_in = ffn_backward(p.out_ffn, cache.dec_in, cache.outc, upstream);

    SequenceBatch dseq(L);
    for (int k = 0; k < L; ++k) dseq[k] = Matrix(n, d);
    if (p.cfg.level == TaskLevel::Node) {
        dseq[L - 1] = std::move(d_dec_in);
    } else {
        matmul_tn_into(cache.pooled, d_dec_in, p.pool_w.grad, true);
        add_into(p.pool_b.grad, d_dec_in);
        Matrix d_pooled(1, 3 * d);
        matmul_nt_into(d_dec_in, p.pool_w.value, d_pooled);
        Matrix& dlast = dseq[L - 1];
        for (int j = 0; j < d; ++j) {
            dlast(cache.argmax[j], j) += d_pooled(0, j);
            double per_row = d_pooled(0, d + j) + d_pooled(0, 2 * d + j) / n;
            for (int i = 0; i < n; ++i) dlast(i, j) += per_row;
        }
    }
    for (int i = static_cast<int>(p.blocks.size()) - 1; i >= 0; --i)
        dseq = block_backward(p.blocks[i], cache.blocks[i], A, p.hooks, dseq);

    Matrix dh0(n, d);
    for (int k = 0; k < L; ++k) matmul_tn_into(mats[k], dseq[k], dh0, true);
    matmul_tn_into(X, dh0, p.enc_w.grad, true);
    Matrix dx(n, p.cfg.in_dim);
    matmul_nt_into(dh0, p.enc_w.value, dx);
    return dx;
}

}  // namespace lgsm

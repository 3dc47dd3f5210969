#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lgsm/model.hpp"

namespace lgsm {

// ---------------------------------------------------------------------------
// Spectral norm: power iteration on MᵀM. Deterministic ramp start vector so
// results are reproducible; the ramp also avoids starting exactly orthogonal
// to the top eigenvector on symmetric hand-built matrices.
// ---------------------------------------------------------------------------
inline double spectral_norm(const Matrix& m, bool* converged = nullptr, int max_iters = 1000,
                            double tol = 1e-9) {
    if (converged) *converged = true;
    if (m.rows == 0 || m.cols == 0) return 0.0;
    int c = m.cols;
    Matrix g(c, c);
    matmul_tn_into(m, m, g);

    std::vector<double> v(c), w(c);
    for (int i = 0; i < c; ++i) v[i] = 1.0 + 0.001 * i;
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    for (double& x : v) x /= nv;

    double lambda = 0.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        for (int i = 0; i < c; ++i) {
            double s = 0.0;
            const double* gr = g.row(i);
            for (int j = 0; j < c; ++j) s += gr[j] * v[j];
            w[i] = s;
        }
        double nw = 0.0;
        for (double x : w) nw += x * x;
        nw = std::sqrt(nw);
        if (nw == 0.0) return 0.0;  // v in the kernel of MᵀM and ramp exhausted it: norm 0
        for (int i = 0; i < c; ++i) v[i] = w[i] / nw;
        if (std::abs(nw - lambda) <= tol * std::max(nw, 1e-300)) return std::sqrt(nw);
        lambda = nw;
    }
    if (converged) *converged = false;
    return std::sqrt(lambda);
}

// ---------------------------------------------------------------------------
// Regularity (Lipschitz) estimates for the FFN nonlinearities: maximum sampled
// Jacobian spectral norm times a 1.1 safety factor. An empirical stand-in for
// the true supremum, so callers should treat it as an estimate, not a proof.
// ---------------------------------------------------------------------------
inline Matrix ffn_jacobian_at(const Ffn& f, const Matrix& x) {
    check_shape(x.rows == 1 && x.cols == f.in_dim(), "ffn_jacobian input");
    Matrix z = matmul(x, f.w1.value);
    for (int j = 0; j < z.cols; ++j) z(0, j) += f.b1.value(0, j);
    // J = W1 · diag(act'(z)) · W2, shape in × out
    Matrix scaled(f.hidden_dim(), f.out_dim());
    for (int h = 0; h < scaled.rows; ++h) {
        double dh = f.act == Activation::Gelu ? gelu_grad(z(0, h)) : 1.0;
        for (int j = 0; j < scaled.cols; ++j) scaled(h, j) = dh * f.w2.value(h, j);
    }
    return matmul(f.w1.value, scaled);
}

inline double mu_estimate(const Ffn& f, int num_samples, double input_scale, uint64_t seed) {
    if (num_samples < 1) throw InvalidParams("mu_estimate needs num_samples >= 1");
    Rng rng(seed);
    double best = 0.0;
    Matrix x(1, f.in_dim());
    for (int s = 0; s < num_samples; ++s) {
        for (int j = 0; j < x.cols; ++j) x(0, j) = rng.uniform_scaled(input_scale);
        best = std::max(best, spectral_norm(ffn_jacobian_at(f, x)));
    }
    return 1.1 * best;
}

// Same estimate for the composite FFN∘LayerNorm map, for architectures where
// the nonlinearity always sees normalized inputs.
inline double mu_estimate_composite(const LayerNorm& ln, const Ffn& f, int num_samples,
                                    double input_scale, uint64_t seed) {
    if (num_samples < 1) throw InvalidParams("mu_estimate needs num_samples >= 1");
    if (ln.bypass) return mu_estimate(f, num_samples, input_scale, seed);
    Rng rng(seed);
    int d = f.in_dim();
    double best = 0.0;
    Matrix x(1, d), jln(d, d);
    for (int s = 0; s < num_samples; ++s) {
        for (int j = 0; j < d; ++j) x(0, j) = rng.uniform_scaled(input_scale);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += x(0, j);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (x(0, j) - mean) * (x(0, j) - mean);
        var /= d;
        double inv = 1.0 / std::sqrt(var + ln.eps);
        Matrix u(1, d);
        for (int j = 0; j < d; ++j) u(0, j) = ln.gain.value(0, j) * (x(0, j) - mean) * inv + ln.bias.value(0, j);
        // ∂u_j/∂x_i = gain_j · inv · (δ_ij − 1/d − (x_i−m)(x_j−m)·inv²/d)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double delta = i == j ? 1.0 : 0.0;
                jln(i, j) = ln.gain.value(0, j) * inv *
                            (delta - 1.0 / d -
                             (x(0, i) - mean) * (x(0, j) - mean) * inv * inv / d);
            }
        best = std::max(best, spectral_norm(matmul(jln, ffn_jacobian_at(f, u))));
    }
    return 1.1 * best;
}

// ---------------------------------------------------------------------------
// Per-element input sensitivity of the raw extracted sequence: S^(k) = M^(k)·X
// is linear in X, so ‖∂S^(k)/∂x_v‖ is the L2 norm of column v of M^(k).
// ---------------------------------------------------------------------------
inline std::vector<double> seq_sensitivity(const Graph& g, const SeqExtractConfig& cfg, int v) {
    if (v < 0 || v >= g.n) throw InvalidParams("seq_sensitivity node out of range");
    OperatorSequence ops = operator_sequence(g, cfg);
    std::vector<double> out(ops.mats.size());
    for (size_t k = 0; k < ops.mats.size(); ++k) {
        double s = 0.0;
        for (int i = 0; i < g.n; ++i) s += ops.mats[k](i, v) * ops.mats[k](i, v);
        out[k] = std::sqrt(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Empirical model sensitivity: exact Jacobian of the final sequence element
// (after the last block, before the decoder) with respect to the feature row
// of node v, built with one backward pass per output coordinate.
// ---------------------------------------------------------------------------
inline Matrix empirical_jacobian(const ModelParams& model, const Graph& g, const Matrix& X, int v) {
    if (v < 0 || v >= g.n) throw InvalidParams("empirical_jacobian node out of range");
    if (static_cast<int64_t>(g.n) * model.cfg.hidden_dim > 10000)
        throw InvalidParams("n*d too large for an explicit Jacobian");
    ModelParams m = model;  // backward accumulates parameter grads; keep caller clean
    OperatorSequence ops = operator_sequence(g, m.cfg.seq);
    Matrix A = adjacency_matrix(g);
    ModelCache cache;
    model_forward_ops(m, ops.mats, A, X, &cache);
    const Matrix& out = cache.out_seq.back();

    int L = m.cfg.seq.length, d = m.cfg.hidden_dim;
    Matrix jac(X.cols, out.rows * out.cols);
    for (int oi = 0; oi < out.rows; ++oi)
        for (int oj = 0; oj < out.cols; ++oj) {
            SequenceBatch dseq(L);
            for (int k = 0; k < L; ++k) dseq[k] = Matrix(g.n, d);
            dseq[L - 1](oi, oj) = 1.0;
            for (int b = m.cfg.num_blocks - 1; b >= 0; --b)
                dseq = block_backward(m.blocks[b], cache.blocks[b], A, m.hooks, dseq);
            Matrix dh0(g.n, d);
            for (int k = 0; k < L; ++k) matmul_tn_into(ops.mats[k], dseq[k], dh0, true);
            Matrix dx(g.n, X.cols);
            matmul_nt_into(dh0, m.enc_w.value, dx);
            for (int c = 0; c < X.cols; ++c) jac(c, oi * out.cols + oj) = dx(v, c);
        }
    return jac;
}

inline double empirical_sensitivity(const ModelParams& model, const Graph& g, const Matrix& X,
                                    int v) {
    return spectral_norm(empirical_jacobian(model, g, X, v));
}

// ---------------------------------------------------------------------------
// Bound evaluators. per_element holds ‖∂S_in^(k)/∂x_v‖ for k = 0..L, so the
// horizon L is per_element.size() − 1.
// ---------------------------------------------------------------------------
namespace detail {

// Exact binomial via 128-bit integers; log-gamma fallback past overflow keeps
// relative error ≤ 1e-12.
inline double binomial(int64_t n, int64_t k) {
    if (k < 0 || n < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (int64_t i = 1; i <= k; ++i) {
        unsigned __int128 num = static_cast<unsigned __int128>(n - k + i);
        if (r > (~static_cast<unsigned __int128>(0)) / num)
            return std::exp(std::lgamma(static_cast<double>(n + 1)) -
                            std::lgamma(static_cast<double>(k + 1)) -
                            std::lgamma(static_cast<double>(n - k + 1)));
        r = r * num / static_cast<unsigned __int128>(i);
    }
    return static_cast<double>(r);
}

inline double ipow(double base, int exp) {
    double r = 1.0;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

}  // namespace detail

// Single block with graph mixing:
//   γ·Σ_{k=0}^{L} pe[k] + γ‖A_G‖·Σ_{k=0}^{L−1} pe[k]
inline double bound_1block(double gamma, double norm_a, const std::vector<double>& per_element) {
    if (per_element.empty()) throw InvalidParams("per_element must be nonempty");
    double all = 0.0, head = 0.0;
    for (size_t k = 0; k < per_element.size(); ++k) {
        all += per_element[k];
        if (k + 1 < per_element.size()) head += per_element[k];
    }
    return gamma * all + gamma * norm_a * head;
}

// D blocks, no graph mixing:
//   γ^D·Σ_{k=0}^{L} binom(L−k+D−1, D−1)·pe[k]
inline double bound_nogm(double gamma, int D, const std::vector<double>& per_element) {
    if (D < 1) throw InvalidParams("bound_nogm needs D >= 1");
    if (per_element.empty()) throw InvalidParams("per_element must be nonempty");
    int64_t L = static_cast<int64_t>(per_element.size()) - 1;
    double s = 0.0;
    for (int64_t k = 0; k <= L; ++k)
        s += detail::binomial(L - k + D - 1, D - 1) * per_element[static_cast<size_t>(k)];
    return detail::ipow(gamma, D) * s;
}

// Full D-block architecture with graph mixing:
//   γ^D·Σ_{k=0}^{L} pe[L−k]·Σ_{m=0}^{min(k,D)} binom(k−m+D−1, D−1)·binom(D,m)·‖A_G‖^m
// The outer loop runs k = L..0 so that at ‖A_G‖ = 0 the additions happen in
// bound_nogm's order and the reduction identity holds bit-exactly.
inline double bound_full(double gamma, int D, double norm_a,
                         const std::vector<double>& per_element) {
    if (D < 1) throw InvalidParams("bound_full needs D >= 1");
    if (per_element.empty()) throw InvalidParams("per_element must be nonempty");
    int64_t L = static_cast<int64_t>(per_element.size()) - 1;
    double s = 0.0;
    for (int64_t k = L; k >= 0; --k) {
        double inner = 0.0;
        int64_t m_hi = std::min<int64_t>(k, D);
        for (int64_t m = 0; m <= m_hi; ++m)
            inner += detail::binomial(k - m + D - 1, D - 1) * detail::binomial(D, m) *
                     detail::ipow(norm_a, static_cast<int>(m));
        s += per_element[static_cast<size_t>(L - k)] * inner;
    }
    return detail::ipow(gamma, D) * s;
}

// ---------------------------------------------------------------------------
// Message-passing baseline: sensitivity bound (c_σ·w·p)^m·((c_r·I + c_a·A)^m)[v,u].
// Zero whenever m is below the graph distance between v and u.
// ---------------------------------------------------------------------------
inline double mpnn_bound(const Graph& g, double c_r, double c_a, double c_sigma, double w, double p,
                         int m, int v, int u) {
    if (m < 0) throw InvalidParams("mpnn_bound needs m >= 0");
    if (v < 0 || v >= g.n || u < 0 || u >= g.n) throw InvalidParams("mpnn_bound node out of range");
    Matrix s = adjacency_matrix(g);
    for (double& x : s.data) x *= c_a;
    for (int i = 0; i < g.n; ++i) s(i, i) += c_r;
    Matrix pw = Matrix::identity(g.n);
    for (int i = 0; i < m; ++i) pw = matmul(pw, s);
    return detail::ipow(c_sigma * w * p, m) * pw(v, u);
}

// ---------------------------------------------------------------------------
// Influence-concentration law on regular trees: from the root of a tree whose
// interior vertices all have degree deg, the normalized-adjacency influence on
// a vertex at distance k, relative to the non-backtracking influence, equals
// ((deg−1)/deg)^{k−1}.
// ---------------------------------------------------------------------------
struct InfluenceCheck {
    double i_adjacency = 0.0;  // I_{root,k}(w) under NormalizedAdjacency
    double i_nbt = 0.0;        // I_{root,k}(w) under NonBacktracking
    double measured = 0.0;     // i_adjacency / i_nbt
    double predicted = 0.0;    // ((deg−1)/deg)^{k−1}
};

inline InfluenceCheck influence_ratio_check(int deg, int k) {
    if (deg < 3) throw InvalidParams("influence_ratio_check needs degree >= 3");
    if (k < 1) throw InvalidParams("influence_ratio_check needs k >= 1");
    Graph tree = generate_family(Family::RegularTree, {.branching = deg, .depth = k + 1}, 0);
    // Nodes are created in breadth order, so the first vertex at distance k is
    // found by BFS from the root.
    std::vector<int> dist(tree.n, -1);
    dist[0] = 0;
    std::vector<int> queue = {0};
    int w = -1;
    for (size_t h = 0; h < queue.size() && w < 0; ++h)
        for (int nb : tree.adjacency[queue[h]])
            if (dist[nb] < 0) {
                dist[nb] = dist[queue[h]] + 1;
                if (dist[nb] == k) {
                    w = nb;
                    break;
                }
                queue.push_back(nb);
            }
    if (w < 0) throw InvalidParams("tree too shallow for requested k");

    SeqExtractConfig cfg;
    cfg.length = k + 1;
    cfg.normalization = SeqNorm::NoNorm;
    InfluenceCheck out;
    cfg.kind = OperatorKind::NormalizedAdjacency;
    out.i_adjacency = influence(tree, cfg, 0, k)[w];
    cfg.kind = OperatorKind::NonBacktracking;
    out.i_nbt = influence(tree, cfg, 0, k)[w];
    out.measured = out.i_adjacency / out.i_nbt;
    out.predicted = detail::ipow((deg - 1.0) / deg, k - 1);
    return out;
}

// ---------------------------------------------------------------------------
// Full report: empirical sensitivity vs. every bound, with the constants used.
// γ = μ_MIX·μ_SSM·‖B‖·‖C‖ taken as maxima over blocks; μ_MIX is floored at 1
// because element 0 bypasses the mixing FFN (an identity map), so the
// mixing stage's regularity constant can never drop below 1. The SSM's
// transition magnitudes lie in (0,1), which only shrinks the true sensitivity
// relative to the ρ≈1 regime the bounds assume, so they stay valid upper
// bounds. per_element follows the model's encoder: ‖∂S_in^(k)/∂x_v‖ =
// ‖column v of M^(k)‖·‖W_enc‖.
// ---------------------------------------------------------------------------
struct BoundReport {
    double empirical = 0.0;
    double bound_1block = 0.0;
    double bound_nogm = 0.0;
    double bound_full = 0.0;
    double gamma = 0.0;
    double mu_ssm = 0.0;       // raw estimate for the post-SSM FFN
    double mu_mix = 0.0;       // raw estimate for the mixing FFN
    double norm_b = 0.0;       // max over blocks of ‖B‖
    double norm_c = 0.0;       // max over blocks of ‖C‖
    double norm_a_graph = 0.0; // ‖A_G‖
    int mu_samples = 0;
    std::vector<double> per_element;
};

inline BoundReport sensitivity_report(const ModelParams& model, const Graph& g, const Matrix& X,
                                      int v, int mu_samples = 128, double mu_scale = 3.0,
                                      uint64_t mu_seed = 0) {
    BoundReport rep;
    rep.mu_samples = mu_samples;
    for (size_t b = 0; b < model.blocks.size(); ++b) {
        const BlockParams& blk = model.blocks[b];
        rep.mu_ssm = std::max(rep.mu_ssm, mu_estimate(blk.ffn1, mu_samples, mu_scale, mu_seed + 2 * b));
        if (!model.hooks.identity_sigma2)
            rep.mu_mix = std::max(rep.mu_mix,
                                  mu_estimate(blk.ffn_mix, mu_samples, mu_scale, mu_seed + 2 * b + 1));
        rep.norm_b = std::max(rep.norm_b, spectral_norm(blk.ssm.B.value));
        rep.norm_c = std::max(rep.norm_c, spectral_norm(blk.ssm.C.value));
    }
    double mu_mix_eff = std::max(rep.mu_mix, 1.0);  // identity path at element 0
    rep.gamma = mu_mix_eff * rep.mu_ssm * rep.norm_b * rep.norm_c;
    rep.norm_a_graph = spectral_norm(adjacency_matrix(g));

    OperatorSequence ops = operator_sequence(g, model.cfg.seq);
    double enc_norm = spectral_norm(model.enc_w.value);
    rep.per_element.resize(ops.mats.size());
    for (size_t k = 0; k < ops.mats.size(); ++k) {
        double s = 0.0;
        for (int i = 0; i < g.n; ++i) s += ops.mats[k](i, v) * ops.mats[k](i, v);
        rep.per_element[k] = std::sqrt(s) * enc_norm;
    }

    rep.empirical = empirical_sensitivity(model, g, X, v);
    rep.bound_1block = lgsm::bound_1block(rep.gamma, rep.norm_a_graph, rep.per_element);
    rep.bound_nogm = lgsm::bound_nogm(rep.gamma, model.cfg.num_blocks, rep.per_element);
    rep.bound_full =
        lgsm::bound_full(rep.gamma, model.cfg.num_blocks, rep.norm_a_graph, rep.per_element);
    return rep;
}

}  // namespace lgsm

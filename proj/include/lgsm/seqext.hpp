#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lgsm/error.hpp"
#include "lgsm/graph.hpp"
#include "lgsm/matrix.hpp"

namespace lgsm {

// A sequence of per-element node feature matrices, each n × d.
using SequenceBatch = std::vector<Matrix>;

enum class OperatorKind { Adjacency, NormalizedAdjacency, NonBacktracking };

// RowOnFeatures is reserved for normalizing the extracted sequence instead of
// the operator; it is not implemented.
enum class SeqNorm { NoNorm, Row, RowOnFeatures };

struct SeqExtractConfig {
    OperatorKind kind = OperatorKind::NonBacktracking;
    int length = 1;
    SeqNorm normalization = SeqNorm::NoNorm;

    void validate() const {
        if (length < 1) throw InvalidParams("sequence length must be >= 1");
        if (normalization == SeqNorm::RowOnFeatures)
            throw InvalidParams("RowOnFeatures normalization is reserved, not implemented");
    }
};

struct OperatorSequence {
    std::vector<Matrix> mats;  // M^(0..L-1), M^(0) = I
};

namespace detail {

inline void row_normalize(Matrix& m) {
    for (int i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += r[j];
        if (s == 0.0) continue;
        for (int j = 0; j < m.cols; ++j) r[j] /= s;
    }
}

// b = scale_rows(deg - 1) * a, i.e. row v of a times (deg[v] - 1).
inline Matrix scale_rows_deg_minus_one(const Matrix& a, const std::vector<int>& deg) {
    Matrix b = a;
    for (int i = 0; i < b.rows; ++i) {
        double f = static_cast<double>(deg[i]) - 1.0;
        double* r = b.row(i);
        for (int j = 0; j < b.cols; ++j) r[j] *= f;
    }
    return b;
}

}  // namespace detail

inline OperatorSequence operator_sequence(const Graph& g, const SeqExtractConfig& cfg) {
    cfg.validate();
    int L = cfg.length;
    OperatorSequence seq;
    seq.mats.reserve(L);
    seq.mats.push_back(Matrix::identity(g.n));
    if (cfg.kind == OperatorKind::NonBacktracking) {
        Matrix a = adjacency_matrix(g);
        if (L > 1) seq.mats.push_back(a);
        if (L > 2) {
            Matrix b2 = matmul(a, a);
            for (int v = 0; v < g.n; ++v) b2(v, v) -= g.degrees[v];
            seq.mats.push_back(std::move(b2));
        }
        for (int t = 3; t < L; ++t) {
            Matrix next = matmul(a, seq.mats[t - 1]);
            add_into(next, detail::scale_rows_deg_minus_one(seq.mats[t - 2], g.degrees), -1.0);
            seq.mats.push_back(std::move(next));
        }
    } else {
        Matrix m = adjacency_matrix(g);
        if (cfg.kind == OperatorKind::NormalizedAdjacency) {
            std::vector<double> inv_sqrt(g.n, 0.0);
            for (int v = 0; v < g.n; ++v)
                if (g.degrees[v] > 0) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degrees[v]));
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j) m(i, j) *= inv_sqrt[i] * inv_sqrt[j];
        }
        for (int k = 1; k < L; ++k) seq.mats.push_back(matmul(seq.mats.back(), m));
    }
    if (cfg.normalization == SeqNorm::Row)
        for (Matrix& m : seq.mats) detail::row_normalize(m);
    return seq;
}

inline SequenceBatch extract_sequence(const Graph& g, const Matrix& X, const SeqExtractConfig& cfg) {
    if (X.rows != g.n) throw ShapeError("feature rows must match node count");
    OperatorSequence ops = operator_sequence(g, cfg);
    SequenceBatch seq;
    seq.reserve(ops.mats.size());
    for (const Matrix& m : ops.mats) seq.push_back(matmul(m, X));
    return seq;
}

// Exhaustive DFS over walks of length k from u with no immediate edge
// reversal; counts arrivals at v. Oracle for the recurrence, never used by it.
inline int64_t brute_force_nbt_count(const Graph& g, int k, int u, int v) {
    if (k < 0) throw InvalidParams("walk length must be >= 0");
    int64_t count = 0;
    auto dfs = [&](auto&& self, int node, int prev, int remaining) -> void {
        if (remaining == 0) {
            if (node == v) ++count;
            return;
        }
        for (int nb : g.adjacency[node]) {
            if (nb == prev) continue;
            self(self, nb, node, remaining - 1);
        }
    };
    dfs(dfs, u, -1, k);
    return count;
}

// Same, with reversals allowed: counts all length-k walks (adjacency oracle).
inline int64_t brute_force_walk_count(const Graph& g, int k, int u, int v) {
    if (k < 0) throw InvalidParams("walk length must be >= 0");
    int64_t count = 0;
    auto dfs = [&](auto&& self, int node, int remaining) -> void {
        if (remaining == 0) {
            if (node == v) ++count;
            return;
        }
        for (int nb : g.adjacency[node]) self(self, nb, remaining - 1);
    };
    dfs(dfs, u, k);
    return count;
}

// I_{v,k}(w) = M^(k)[v,w] / sum_u M^(k)[v,u].
inline std::vector<double> influence(const Graph& g, const SeqExtractConfig& cfg, int v, int k) {
    cfg.validate();
    if (k < 0 || k >= cfg.length) throw InvalidParams("influence index must satisfy k < length");
    if (v < 0 || v >= g.n) throw InvalidParams("influence node out of range");
    OperatorSequence ops = operator_sequence(g, cfg);
    const Matrix& m = ops.mats[k];
    double sum = 0.0;
    for (int w = 0; w < g.n; ++w) sum += m(v, w);
    if (sum == 0.0) throw ZeroInfluenceRow("node has no length-k continuation");
    std::vector<double> out(g.n);
    for (int w = 0; w < g.n; ++w) out[w] = m(v, w) / sum;
    return out;
}

// Default instability threshold: 2^64, the smallest clean magnitude whose
// square exceeds FLT_MAX, i.e. the point where single-precision pipelines
// that square values (variances, MSE) overflow.
constexpr double kInstabilityThreshold = 18446744073709551616.0;

struct InstabilityReport {
    double max_abs = 0.0;
    bool has_nonfinite = false;
    int overflow_at_index = -1;  // first offending sequence element, -1 if none
    double threshold = kInstabilityThreshold;

    bool flagged() const { return overflow_at_index >= 0; }
};

inline InstabilityReport detect_instability(const std::vector<Matrix>& seq,
                                            double threshold = kInstabilityThreshold) {
    InstabilityReport rep;
    rep.threshold = threshold;
    for (size_t k = 0; k < seq.size(); ++k) {
        bool bad = false;
        for (double x : seq[k].data) {
            if (!std::isfinite(x)) {
                rep.has_nonfinite = true;
                bad = true;
                continue;
            }
            double a = std::abs(x);
            if (a > rep.max_abs) rep.max_abs = a;
            if (a > threshold) bad = true;
        }
        if (bad && rep.overflow_at_index < 0) rep.overflow_at_index = static_cast<int>(k);
    }
    return rep;
}

inline InstabilityReport detect_instability(const OperatorSequence& seq,
                                            double threshold = kInstabilityThreshold) {
    return detect_instability(seq.mats, threshold);
}

}  // namespace lgsm

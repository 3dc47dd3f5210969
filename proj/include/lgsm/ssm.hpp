#pragma once

#include <cmath>
#include <vector>

#include "lgsm/matrix.hpp"
#include "lgsm/nn.hpp"
#include "lgsm/rng.hpp"
#include "lgsm/seqext.hpp"

namespace lgsm {

// Diagonal linear SSM: h^(t) = a ⊙ h^(t-1) + s^(t)·Bᵀ, y^(t) = h^(t)·Cᵀ,
// h^(-1) = 0, applied independently to each node row.
struct SsmParams {
    ParamSlot a_logits;  // 1 × d_h
    ParamSlot B;         // d_h × d_in
    ParamSlot C;         // d_out × d_h
    // Test constructor flag: use a_logits as the transition values verbatim
    // instead of sigmoid(a_logits), so a=1 / a=0 cases are expressible.
    bool direct_a = false;

    int d_h() const { return a_logits.value.cols; }
    int d_in() const { return B.value.cols; }
    int d_out() const { return C.value.rows; }

    std::vector<double> effective_a() const {
        std::vector<double> a(d_h());
        for (int i = 0; i < d_h(); ++i) {
            double l = a_logits.value(0, i);
            a[i] = direct_a ? l : 1.0 / (1.0 + std::exp(-l));
        }
        return a;
    }

    std::vector<ParamSlot*> slots() { return {&a_logits, &B, &C}; }

    // Transition values uniform in [0.9, 0.99); B, C zero-mean with scale
    // 1/sqrt(fan-in).
    static SsmParams init(int d_h, int d_in, int d_out, Rng& rng) {
        if (d_h < 1 || d_in < 1 || d_out < 1) throw InvalidParams("ssm dims must be >= 1");
        SsmParams p;
        p.a_logits = ParamSlot(1, d_h);
        p.B = ParamSlot(d_h, d_in);
        p.C = ParamSlot(d_out, d_h);
        for (int i = 0; i < d_h; ++i) {
            double a = rng.uniform(0.9, 0.99);
            p.a_logits.value(0, i) = std::log(a / (1.0 - a));
        }
        fill_uniform(p.B.value, rng, 1.0 / std::sqrt(static_cast<double>(d_in)));
        fill_uniform(p.C.value, rng, 1.0 / std::sqrt(static_cast<double>(d_h)));
        return p;
    }

    static SsmParams direct(const std::vector<double>& a, Matrix B, Matrix C) {
        SsmParams p;
        p.direct_a = true;
        p.a_logits = ParamSlot(1, static_cast<int>(a.size()));
        for (size_t i = 0; i < a.size(); ++i) p.a_logits.value(0, static_cast<int>(i)) = a[i];
        p.B = ParamSlot(B.rows, B.cols);
        p.B.value = std::move(B);
        p.C = ParamSlot(C.rows, C.cols);
        p.C.value = std::move(C);
        return p;
    }
};

struct SsmCache {
    std::vector<Matrix> h;  // hidden states H^(0..L-1), each n × d_h
};

namespace detail {

inline void check_ssm_seq(const SsmParams& p, const SequenceBatch& seq) {
    if (seq.empty()) throw ShapeError("ssm needs a nonempty sequence");
    for (const Matrix& s : seq) {
        check_shape(s.cols == p.d_in(), "ssm input width");
        check_shape(s.rows == seq[0].rows, "ssm row count per element");
    }
}

}  // namespace detail

inline SequenceBatch ssm_forward_sequential(const SsmParams& p, const SequenceBatch& seq,
                                            SsmCache* cache = nullptr) {
    detail::check_ssm_seq(p, seq);
    int n = seq[0].rows, dh = p.d_h();
    std::vector<double> a = p.effective_a();
    Matrix h(n, dh);
    SequenceBatch out;
    out.reserve(seq.size());
    if (cache) {
        cache->h.clear();
        cache->h.reserve(seq.size());
    }
    Matrix u(n, dh);
    for (const Matrix& s : seq) {
        matmul_nt_into(s, p.B.value, u);
        for (int i = 0; i < n; ++i) {
            double* hr = h.row(i);
            const double* ur = u.row(i);
            for (int j = 0; j < dh; ++j) hr[j] = a[j] * hr[j] + ur[j];
        }
        Matrix y(n, p.d_out());
        matmul_nt_into(h, p.C.value, y);
        out.push_back(std::move(y));
        if (cache) cache->h.push_back(h);
    }
    return out;
}

namespace detail {

// Scan element: h ↦ a ⊙ h + b. Composing e1 then e2 gives
// (a1 ⊙ a2, a2 ⊙ b1 + b2).
struct ScanElem {
    std::vector<double> a;
    Matrix b;
};

inline ScanElem compose(const ScanElem& e1, const ScanElem& e2) {
    ScanElem out;
    out.a.resize(e1.a.size());
    for (size_t j = 0; j < e1.a.size(); ++j) out.a[j] = e1.a[j] * e2.a[j];
    out.b = e2.b;
    int dh = static_cast<int>(e1.a.size());
    for (int i = 0; i < out.b.rows; ++i) {
        double* br = out.b.row(i);
        const double* b1 = e1.b.row(i);
        for (int j = 0; j < dh; ++j) br[j] += e2.a[j] * b1[j];
    }
    return out;
}

// Inclusive scan by recursive pairing; odd tails are carried.
inline std::vector<ScanElem> inclusive_scan(std::vector<ScanElem> v) {
    if (v.size() <= 1) return v;
    std::vector<ScanElem> paired;
    paired.reserve(v.size() / 2);
    for (size_t i = 0; i + 1 < v.size(); i += 2) paired.push_back(compose(v[i], v[i + 1]));
    std::vector<ScanElem> scanned = inclusive_scan(std::move(paired));
    std::vector<ScanElem> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        if (i % 2 == 1) {
            out[i] = scanned[i / 2];
        } else if (i == 0) {
            out[i] = v[i];
        } else {
            out[i] = compose(scanned[i / 2 - 1], v[i]);
        }
    }
    return out;
}

}  // namespace detail

inline SequenceBatch ssm_forward_scan(const SsmParams& p, const SequenceBatch& seq) {
    detail::check_ssm_seq(p, seq);
    int n = seq[0].rows;
    std::vector<double> a = p.effective_a();
    std::vector<detail::ScanElem> elems(seq.size());
    for (size_t t = 0; t < seq.size(); ++t) {
        elems[t].a = a;
        elems[t].b = Matrix(n, p.d_h());
        matmul_nt_into(seq[t], p.B.value, elems[t].b);
    }
    std::vector<detail::ScanElem> h = detail::inclusive_scan(std::move(elems));
    SequenceBatch out;
    out.reserve(seq.size());
    for (auto& e : h) {
        Matrix y(n, p.d_out());
        matmul_nt_into(e.b, p.C.value, y);
        out.push_back(std::move(y));
    }
    return out;
}

// y^(t) = C · Σ_{k=0}^t A^k B s^(t-k), evaluated directly.
inline Matrix ssm_closed_form(const SsmParams& p, const SequenceBatch& seq, int t) {
    detail::check_ssm_seq(p, seq);
    if (t < 0 || t >= static_cast<int>(seq.size())) throw InvalidParams("closed form index out of range");
    int n = seq[0].rows, dh = p.d_h();
    std::vector<double> a = p.effective_a();
    std::vector<double> ak(dh, 1.0);
    Matrix acc(n, dh);
    Matrix u(n, dh);
    for (int k = 0; k <= t; ++k) {
        matmul_nt_into(seq[t - k], p.B.value, u);
        for (int i = 0; i < n; ++i) {
            double* ar = acc.row(i);
            const double* ur = u.row(i);
            for (int j = 0; j < dh; ++j) ar[j] += ak[j] * ur[j];
        }
        for (int j = 0; j < dh; ++j) ak[j] *= a[j];
    }
    Matrix y(n, p.d_out());
    matmul_nt_into(acc, p.C.value, y);
    return y;
}

// Reverse-mode of the sequential recurrence. Accumulates parameter grads,
// returns the grad wrt each sequence element.
inline SequenceBatch ssm_backward(SsmParams& p, const SequenceBatch& seq, const SsmCache& cache,
                                  const SequenceBatch& upstream) {
    detail::check_ssm_seq(p, seq);
    check_shape(upstream.size() == seq.size(), "ssm upstream length");
    int L = static_cast<int>(seq.size());
    int n = seq[0].rows, dh = p.d_h();
    std::vector<double> a = p.effective_a();
    SequenceBatch dseq(L);
    Matrix gh(n, dh);  // grad wrt h^(t), built backwards
    Matrix da(1, dh);
    for (int t = L - 1; t >= 0; --t) {
        check_shape(upstream[t].rows == n && upstream[t].cols == p.d_out(), "ssm upstream shape");
        // gh^(t) = up^(t)·C + a ⊙ gh^(t+1)
        for (int i = 0; i < n; ++i) {
            double* g = gh.row(i);
            for (int j = 0; j < dh; ++j) g[j] *= a[j];
        }
        matmul_into(upstream[t], p.C.value, gh, true);
        matmul_tn_into(upstream[t], cache.h[t], p.C.grad, true);
        matmul_tn_into(gh, seq[t], p.B.grad, true);
        dseq[t] = Matrix(n, p.d_in());
        matmul_into(gh, p.B.value, dseq[t]);
        if (t >= 1) {
            const Matrix& hprev = cache.h[t - 1];
            for (int i = 0; i < n; ++i) {
                const double* g = gh.row(i);
                const double* hp = hprev.row(i);
                for (int j = 0; j < dh; ++j) da(0, j) += g[j] * hp[j];
            }
        }
    }
    for (int j = 0; j < dh; ++j) {
        double chain = p.direct_a ? 1.0 : a[j] * (1.0 - a[j]);
        p.a_logits.grad(0, j) += da(0, j) * chain;
    }
    return dseq;
}

}  // namespace lgsm

#include <gtest/gtest.h>

#include "lgsm/ssm.hpp"

namespace lgsm {
namespace {

double seq_max_diff(const SequenceBatch& a, const SequenceBatch& b) {
    double m = 0.0;
    for (size_t t = 0; t < a.size(); ++t) m = std::max(m, max_abs(sub(a[t], b[t])));
    return m;
}

SequenceBatch random_seq(int L, int n, int d, Rng& rng) {
    SequenceBatch s(L);
    for (Matrix& m : s) {
        m = Matrix(n, d);
        fill_uniform(m, rng, 1.0);
    }
    return s;
}

TEST(SsmSequential, ScalarHandUnroll) {
    SsmParams p = SsmParams::direct({0.5}, Matrix::filled(1, 1, 1.0), Matrix::filled(1, 1, 2.0));
    SequenceBatch seq = {Matrix::filled(1, 1, 1.0), Matrix::filled(1, 1, 1.0)};
    auto y = ssm_forward_sequential(p, seq);
    EXPECT_DOUBLE_EQ(y[0](0, 0), 2.0);
    EXPECT_DOUBLE_EQ(y[1](0, 0), 3.0);
}

TEST(SsmSequential, IdentityDynamicsPrefixSums) {
    int d = 3;
    SsmParams p = SsmParams::direct(std::vector<double>(d, 1.0), Matrix::identity(d), Matrix::identity(d));
    Rng rng(3);
    SequenceBatch seq = random_seq(5, 2, d, rng);
    auto y = ssm_forward_sequential(p, seq);
    Matrix acc(2, d);
    for (int t = 0; t < 5; ++t) {
        add_into(acc, seq[t]);
        EXPECT_NEAR(max_abs(sub(y[t], acc)), 0.0, 1e-12);
    }
}

TEST(SsmSequential, ZeroTransitionIsMemoryless) {
    Rng rng(4);
    SsmParams base = SsmParams::init(3, 2, 2, rng);
    SsmParams p = SsmParams::direct(std::vector<double>(3, 0.0), base.B.value, base.C.value);
    SequenceBatch seq = random_seq(4, 3, 2, rng);
    auto y = ssm_forward_sequential(p, seq);
    for (int t = 0; t < 4; ++t) {
        Matrix u(3, 3);
        matmul_nt_into(seq[t], p.B.value, u);
        Matrix ref(3, 2);
        matmul_nt_into(u, p.C.value, ref);
        EXPECT_NEAR(max_abs(sub(y[t], ref)), 0.0, 1e-12);
    }
}

TEST(SsmSequential, ZeroInputZeroOutput) {
    Rng rng(5);
    SsmParams p = SsmParams::init(4, 3, 2, rng);
    SequenceBatch seq(6, Matrix(2, 3));
    auto y = ssm_forward_sequential(p, seq);
    for (auto& m : y) EXPECT_EQ(max_abs(m), 0.0);
}

TEST(SsmScan, ComposeRule) {
    detail::ScanElem e1{{0.5}, Matrix::filled(1, 1, 1.0)};
    detail::ScanElem e2{{0.5}, Matrix::filled(1, 1, 1.0)};
    auto c = detail::compose(e1, e2);
    EXPECT_DOUBLE_EQ(c.a[0], 0.25);
    EXPECT_DOUBLE_EQ(c.b(0, 0), 1.5);
}

TEST(SsmScan, SingleElementEqualsSequential) {
    Rng rng(6);
    SsmParams p = SsmParams::init(3, 2, 2, rng);
    SequenceBatch seq = random_seq(1, 4, 2, rng);
    EXPECT_LE(seq_max_diff(ssm_forward_scan(p, seq), ssm_forward_sequential(p, seq)), 1e-15);
}

TEST(SsmEquivalence, TripleOverLengths) {
    Rng rng(7);
    for (int L : {1, 2, 3, 8, 33, 64}) {
        SsmParams p = SsmParams::init(5, 3, 4, rng);
        SequenceBatch seq = random_seq(L, 3, 3, rng);
        auto ref = ssm_forward_sequential(p, seq);
        EXPECT_LE(seq_max_diff(ssm_forward_scan(p, seq), ref), 1e-10) << "L=" << L;
        for (int t : {0, L / 2, L - 1})
            EXPECT_LE(max_abs(sub(ssm_closed_form(p, seq, t), ref[t])), 1e-8) << "L=" << L << " t=" << t;
    }
}

TEST(SsmForward, LinearInInput) {
    Rng rng(8);
    SsmParams p = SsmParams::init(4, 3, 2, rng);
    SequenceBatch s = random_seq(7, 3, 3, rng);
    SequenceBatch t = random_seq(7, 3, 3, rng);
    double alpha = 0.7, beta = -1.3;
    SequenceBatch mix(7);
    for (int k = 0; k < 7; ++k) {
        mix[k] = s[k];
        scale_into(mix[k], alpha);
        add_into(mix[k], t[k], beta);
    }
    auto ys = ssm_forward_sequential(p, s);
    auto yt = ssm_forward_sequential(p, t);
    auto ymix = ssm_forward_sequential(p, mix);
    for (int k = 0; k < 7; ++k) {
        Matrix ref = ys[k];
        scale_into(ref, alpha);
        add_into(ref, yt[k], beta);
        EXPECT_LE(max_abs(sub(ymix[k], ref)), 1e-10);
    }
}

TEST(SsmInit, TransitionRangeAndDeterminism) {
    Rng r1(9), r2(9), r3(10);
    SsmParams a = SsmParams::init(8, 3, 3, r1);
    SsmParams b = SsmParams::init(8, 3, 3, r2);
    SsmParams c = SsmParams::init(8, 3, 3, r3);
    for (double av : a.effective_a()) {
        EXPECT_GE(av, 0.9);
        EXPECT_LE(av, 0.99);
    }
    EXPECT_EQ(a.a_logits.value.data, b.a_logits.value.data);
    EXPECT_EQ(a.B.value.data, b.B.value.data);
    EXPECT_NE(a.B.value.data, c.B.value.data);
}

TEST(SsmBackward, ZeroUpstreamZeroGrads) {
    Rng rng(11);
    SsmParams p = SsmParams::init(3, 2, 2, rng);
    SequenceBatch seq = random_seq(4, 2, 2, rng);
    SsmCache cache;
    ssm_forward_sequential(p, seq, &cache);
    SequenceBatch up(4, Matrix(2, 2));
    auto dseq = ssm_backward(p, seq, cache, up);
    EXPECT_EQ(max_abs(p.B.grad), 0.0);
    EXPECT_EQ(max_abs(p.C.grad), 0.0);
    EXPECT_EQ(max_abs(p.a_logits.grad), 0.0);
    EXPECT_EQ(seq_max_diff(dseq, up), 0.0);
}

TEST(SsmBackward, PrefixSumAdjointBroadcasts) {
    int d = 2;
    SsmParams p = SsmParams::direct(std::vector<double>(d, 1.0), Matrix::identity(d), Matrix::identity(d));
    Rng rng(12);
    SequenceBatch seq = random_seq(5, 3, d, rng);
    SsmCache cache;
    ssm_forward_sequential(p, seq, &cache);
    SequenceBatch up(5, Matrix(3, d));
    fill_uniform(up[4], rng, 1.0);
    auto dseq = ssm_backward(p, seq, cache, up);
    for (int t = 0; t < 5; ++t) EXPECT_NEAR(max_abs(sub(dseq[t], up[4])), 0.0, 1e-12);
}

TEST(SsmBackward, GradCheck) {
    for (uint64_t seed : {1, 2, 3, 4}) {
        Rng rng(seed);
        int L = 3, n = 2, d_in = 3, d_h = 3, d_out = 2;
        SsmParams p = SsmParams::init(d_h, d_in, d_out, rng);
        std::vector<ParamSlot> inputs(L);
        for (auto& s : inputs) {
            s = ParamSlot(n, d_in);
            fill_uniform(s.value, rng, 1.0);
        }
        SequenceBatch up(L);
        for (auto& u : up) {
            u = Matrix(n, d_out);
            fill_uniform(u, rng, 1.0);
        }

        auto current_seq = [&] {
            SequenceBatch seq(L);
            for (int t = 0; t < L; ++t) seq[t] = inputs[t].value;
            return seq;
        };
        auto loss = [&] {
            auto y = ssm_forward_sequential(p, current_seq());
            double s = 0.0;
            for (int t = 0; t < L; ++t)
                for (size_t i = 0; i < y[t].size(); ++i) s += up[t].data[i] * y[t].data[i];
            return s;
        };
        auto backward = [&] {
            for (ParamSlot* s : p.slots()) s->zero_grad();
            SsmCache cache;
            auto seq = current_seq();
            ssm_forward_sequential(p, seq, &cache);
            auto dseq = ssm_backward(p, seq, cache, up);
            for (int t = 0; t < L; ++t) inputs[t].grad = dseq[t];
        };
        std::vector<ParamSlot*> slots = p.slots();
        for (auto& s : inputs) slots.push_back(&s);
        EXPECT_LE(grad_check(slots, nullptr, nullptr, loss, backward), 1e-4) << "seed " << seed;
    }
}

TEST(SsmParamsChecks, SpectralRadiusBounded) {
    Rng rng(13);
    SsmParams p = SsmParams::init(16, 4, 4, rng);
    for (double a : p.effective_a()) {
        EXPECT_GT(a, 0.0);
        EXPECT_LT(a, 1.0);
    }
}

}  // namespace
}  // namespace lgsm

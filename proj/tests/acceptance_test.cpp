// End-to-end acceptance gate. Each test prints one pass/fail line with its
// runtime; thresholds and budgets are fixed here on purpose.
#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "lgsm/analysis.hpp"
#include "lgsm/train.hpp"

using namespace lgsm;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int criterion, const Stopwatch& sw, const std::string& detail) {
    bool ok = !::testing::Test::HasFailure();
    std::printf("criterion %d: %s (%.1fs) — %s\n", criterion, ok ? "PASS" : "FAIL", sw.seconds(),
                detail.c_str());
    std::fflush(stdout);
}

double dot_all(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    fill_uniform(m, rng, scale);
    return m;
}

// Independent walk-counting oracle: dynamic program over directed edges.
// f[(x,u)] = number of non-backtracking walks from v of length k arriving at
// u with previous node x; extension may not immediately return to x.
std::vector<std::vector<std::vector<long long>>> brute_nbt_counts(const Graph& g, int max_k) {
    int n = g.n;
    std::vector<std::vector<std::vector<long long>>> count(
        max_k + 1, std::vector<std::vector<long long>>(n, std::vector<long long>(n, 0)));
    for (int v = 0; v < n; ++v) count[0][v][v] = 1;
    for (int v = 0; v < n; ++v) {
        std::vector<std::vector<long long>> f(n, std::vector<long long>(n, 0));  // f[prev][cur]
        for (int w : g.adjacency[v]) f[v][w] = 1;
        for (int k = 1; k <= max_k; ++k) {
            for (int x = 0; x < n; ++x)
                for (int u = 0; u < n; ++u)
                    if (f[x][u] > 0) count[k][v][u] += f[x][u];
            if (k == max_k) break;
            std::vector<std::vector<long long>> next(n, std::vector<long long>(n, 0));
            for (int x = 0; x < n; ++x)
                for (int u = 0; u < n; ++u)
                    if (f[x][u] > 0)
                        for (int w : g.adjacency[u])
                            if (w != x) next[u][w] += f[x][u];
            f = std::move(next);
        }
    }
    return count;
}

void check_nbt_oracle(const Graph& g, const std::string& label) {
    SeqExtractConfig scfg;
    scfg.kind = OperatorKind::NonBacktracking;
    scfg.length = 7;  // elements 0..6
    scfg.normalization = SeqNorm::NoNorm;
    OperatorSequence ops = operator_sequence(g, scfg);
    auto brute = brute_nbt_counts(g, 6);
    for (int k = 0; k <= 6; ++k)
        for (int v = 0; v < g.n; ++v)
            for (int w = 0; w < g.n; ++w)
                ASSERT_EQ(ops.mats[k](v, w), static_cast<double>(brute[k][v][w]))
                    << label << " k=" << k << " v=" << v << " w=" << w;
}

// Criterion-6/8 dataset: lines and random trees, rejection-sampled to keep
// the eccentricity target within the model's long-horizon reach.
std::vector<LabeledGraph> trend_set(int count, uint64_t seed, double line_frac) {
    Rng rng(seed);
    std::vector<LabeledGraph> out;
    while (static_cast<int>(out.size()) < count) {
        Graph g;
        if (rng.uniform() < line_frac) {
            int n = static_cast<int>(rng.uniform_int(16, 25));
            g = generate_family(Family::Line, {.n = n}, rng.next_u64());
        } else {
            int n = static_cast<int>(rng.uniform_int(16, 48));
            g = generate_family(Family::RandomTree, {.n = n}, rng.next_u64());
        }
        LabeledGraph lg = make_task_instance(std::move(g), Task::Eccentricity, rng);
        double diam = 0.0;
        for (double t : lg.targets) diam = std::max(diam, t);
        if (diam > 24) continue;
        out.push_back(std::move(lg));
    }
    return out;
}

}  // namespace

// 1. Non-backtracking recurrence equals brute-force walk counts, exact
// integer equality, k <= 6, on 100 random connected graphs (n <= 7) plus a
// minimal instance of every generator family.
TEST(Acceptance, C1NonBacktrackingWalkCounts) {
    Stopwatch sw;
    int accepted = 0;
    uint64_t seed = 0;
    while (accepted < 100) {
        ++seed;
        Rng rng(seed);
        int n = static_cast<int>(rng.uniform_int(4, 7));
        Graph g = generate_family(Family::ErdosRenyi, {.n = n, .edge_prob = 0.5}, rng.next_u64());
        if (!is_connected(g)) continue;
        ++accepted;
        check_nbt_oracle(g, "random#" + std::to_string(accepted));
        if (::testing::Test::HasFatalFailure()) break;
    }
    std::vector<std::pair<std::string, Graph>> minimal;
    minimal.emplace_back("line", generate_family(Family::Line, {.n = 2}, 0));
    minimal.emplace_back("ladder", generate_family(Family::Ladder, {.n = 2}, 0));
    minimal.emplace_back("grid", generate_family(Family::Grid, {.rows = 2, .cols = 2}, 0));
    minimal.emplace_back("random_tree", generate_family(Family::RandomTree, {.n = 2}, 1));
    minimal.emplace_back("caterpillar", generate_family(Family::Caterpillar, {.backbone = 2}, 2));
    minimal.emplace_back("lobster", generate_family(Family::Lobster, {.backbone = 2}, 3));
    minimal.emplace_back("cycle", generate_family(Family::Cycle, {.n = 3}, 0));
    minimal.emplace_back("regular_tree",
                         generate_family(Family::RegularTree, {.branching = 2, .depth = 1}, 0));
    minimal.emplace_back("erdos_renyi",
                         generate_family(Family::ErdosRenyi, {.n = 4, .edge_prob = 0.6}, 4));
    for (auto& [label, g] : minimal) {
        check_nbt_oracle(g, label);
        if (::testing::Test::HasFatalFailure()) break;
    }
    EXPECT_LT(sw.seconds(), 30.0);
    report(1, sw, "exact walk counts k<=6 on 100 random connected graphs + 9 family minima");
}

// 2. SSM triple equivalence: parallel scan vs sequential <= 1e-10, closed
// form vs sequential <= 1e-8, 50 random configs at L in {1,2,3,8,33,64}.
TEST(Acceptance, C2SsmTripleEquivalence) {
    Stopwatch sw;
    double worst_scan = 0.0, worst_closed = 0.0;
    for (uint64_t cfg_seed = 1; cfg_seed <= 50; ++cfg_seed) {
        Rng rng(cfg_seed * 31);
        int d_h = static_cast<int>(rng.uniform_int(1, 8));
        int d_in = static_cast<int>(rng.uniform_int(1, 4));
        int d_out = static_cast<int>(rng.uniform_int(1, 4));
        int n = static_cast<int>(rng.uniform_int(1, 5));
        SsmParams p = SsmParams::init(d_h, d_in, d_out, rng);
        for (int L : {1, 2, 3, 8, 33, 64}) {
            SequenceBatch seq(L);
            for (Matrix& s : seq) s = random_matrix(n, d_in, rng);
            SequenceBatch ref = ssm_forward_sequential(p, seq);
            SequenceBatch scan = ssm_forward_scan(p, seq);
            ASSERT_EQ(ref.size(), scan.size());
            for (int t = 0; t < L; ++t) {
                worst_scan = std::max(worst_scan, max_abs(sub(ref[t], scan[t])));
                worst_closed = std::max(worst_closed, max_abs(sub(ref[t], ssm_closed_form(p, seq, t))));
            }
        }
    }
    EXPECT_LE(worst_scan, 1e-10);
    EXPECT_LE(worst_closed, 1e-8);
    EXPECT_LT(sw.seconds(), 10.0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "scan vs sequential %.2e, closed form vs sequential %.2e",
                  worst_scan, worst_closed);
    report(2, sw, buf);
}

// 3. Central-finite-difference gradient checks for every layer and the full
// model, 20 seeds, rel err <= 1e-4.
TEST(Acceptance, C3GradientChecks) {
    Stopwatch sw;
    double worst = 0.0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 977);
        // FFN layer
        {
            Ffn f = Ffn::init(3, 3, rng);
            fill_uniform(f.b1.value, rng, 0.2);
            fill_uniform(f.b2.value, rng, 0.2);
            Matrix x = random_matrix(2, 3, rng), up = random_matrix(2, 3, rng), dx;
            auto loss = [&] { return dot_all(up, ffn_forward(f, x)); };
            auto backward = [&] {
                for (ParamSlot* s : f.slots()) s->zero_grad();
                FfnCache cache;
                ffn_forward(f, x, &cache);
                dx = ffn_backward(f, x, cache, up);
            };
            worst = std::max(worst, grad_check(f.slots(), &x, &dx, loss, backward));
        }
        // LayerNorm layer
        {
            LayerNorm ln = LayerNorm::init(4);
            fill_uniform(ln.gain.value, rng, 0.5);
            add_into(ln.gain.value, Matrix::filled(1, 4, 1.0));
            fill_uniform(ln.bias.value, rng, 0.5);
            Matrix x = random_matrix(3, 4, rng, 2.0), up = random_matrix(3, 4, rng), dx;
            auto loss = [&] { return dot_all(up, layernorm_forward(ln, x)); };
            auto backward = [&] {
                for (ParamSlot* s : ln.slots()) s->zero_grad();
                LayerNormCache cache;
                layernorm_forward(ln, x, &cache);
                dx = layernorm_backward(ln, cache, up);
            };
            worst = std::max(worst, grad_check(ln.slots(), &x, &dx, loss, backward));
        }
        // SSM layer over a short sequence
        {
            int d_h = 1 + static_cast<int>(seed % 4);
            SsmParams p = SsmParams::init(d_h, 2, 2, rng);
            int L = 1 + static_cast<int>(seed % 3);
            SequenceBatch seq(L), up(L);
            for (int t = 0; t < L; ++t) {
                seq[t] = random_matrix(2, 2, rng);
                up[t] = random_matrix(2, 2, rng);
            }
            auto loss = [&] {
                SequenceBatch out = ssm_forward_sequential(p, seq);
                double s = 0.0;
                for (int t = 0; t < L; ++t) s += dot_all(up[t], out[t]);
                return s;
            };
            auto backward = [&] {
                for (ParamSlot* s : p.slots()) s->zero_grad();
                SsmCache cache;
                ssm_forward_sequential(p, seq, &cache);
                ssm_backward(p, seq, cache, up);
            };
            worst = std::max(worst, grad_check(p.slots(), nullptr, nullptr, loss, backward));
        }
        // Full model: rotate structure within n<=5, d<=4, L<=3, D<=2
        {
            ModelConfig cfg;
            cfg.hidden_dim = 2 + static_cast<int>(seed % 3);
            cfg.num_blocks = 1 + static_cast<int>(seed % 2);
            cfg.in_dim = 1 + static_cast<int>(seed % 2);
            cfg.out_dim = 1 + static_cast<int>((seed / 2) % 2);
            cfg.level = seed % 2 ? TaskLevel::Node : TaskLevel::Graph;
            cfg.seq.length = 1 + static_cast<int>(seed % 3);
            switch (seed % 3) {
                case 0: cfg.seq.kind = OperatorKind::Adjacency; break;
                case 1: cfg.seq.kind = OperatorKind::NormalizedAdjacency; break;
                default: cfg.seq.kind = OperatorKind::NonBacktracking; break;
            }
            cfg.seq.normalization = seed % 2 ? SeqNorm::Row : SeqNorm::NoNorm;
            ModelParams p = init_model(cfg, seed);
            Graph g = seed % 2 ? generate_family(Family::Cycle, {.n = 5}, 0)
                               : generate_family(Family::RandomTree, {.n = 4 + (int)(seed % 2)}, seed);
            Matrix X = random_matrix(g.n, cfg.in_dim, rng);
            OperatorSequence ops = operator_sequence(g, cfg.seq);
            Matrix A = adjacency_matrix(g);
            int out_rows = cfg.level == TaskLevel::Node ? g.n : 1;
            Matrix up = random_matrix(out_rows, cfg.out_dim, rng);
            std::vector<ParamSlot*> slots;
            for (auto& [name, slot] : named_slots(p)) slots.push_back(slot);
            Matrix dx;
            auto loss = [&] { return dot_all(up, model_forward_ops(p, ops.mats, A, X)); };
            auto backward = [&] {
                zero_grads(p);
                ModelCache cache;
                model_forward_ops(p, ops.mats, A, X, &cache);
                dx = model_backward(p, ops.mats, A, X, cache, up);
            };
            worst = std::max(worst, grad_check(slots, &X, &dx, loss, backward));
        }
    }
    EXPECT_LE(worst, 1e-4);
    EXPECT_LT(sw.seconds(), 120.0);
    char buf[96];
    std::snprintf(buf, sizeof buf, "worst relative error %.2e over 20 seeds x 4 checks", worst);
    report(3, sw, buf);
}

// 4. Influence-ratio law on regular trees: measured I^A/I^B equals
// ((d-1)/d)^(k-1) within 1e-12; the d=3,k=2 cell gives 1/9 and 1/6 exactly.
TEST(Acceptance, C4InfluenceRatioLaw) {
    Stopwatch sw;
    double worst = 0.0;
    for (int d : {3, 4})
        for (int k : {1, 2, 3}) {
            InfluenceCheck c = influence_ratio_check(d, k);
            EXPECT_NEAR(c.measured, c.predicted, 1e-12) << "d=" << d << " k=" << k;
            worst = std::max(worst, std::abs(c.measured - c.predicted));
        }
    InfluenceCheck ref = influence_ratio_check(3, 2);
    EXPECT_DOUBLE_EQ(ref.i_adjacency, 1.0 / 9.0);
    EXPECT_DOUBLE_EQ(ref.i_nbt, 1.0 / 6.0);
    EXPECT_LT(sw.seconds(), 5.0);
    char buf[96];
    std::snprintf(buf, sizeof buf, "worst |measured-predicted| %.2e; d=3,k=2 gives 1/9 and 1/6 exactly",
                  worst);
    report(4, sw, buf);
}

// 5. Sensitivity bounds: empirical Jacobian norm <= full bound on 20 random
// configs; the full bound collapses to the no-graph-mixing bound at zero
// graph norm bit-exactly, and that collapses to the single-block sum at D=1.
TEST(Acceptance, C5SensitivityBounds) {
    Stopwatch sw;
    int violations = 0;
    double tightest = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(2000 + trial);
        ModelConfig cfg;
        cfg.hidden_dim = static_cast<int>(rng.uniform_int(2, 4));
        cfg.num_blocks = static_cast<int>(rng.uniform_int(1, 2));
        cfg.in_dim = static_cast<int>(rng.uniform_int(1, 2));
        cfg.seq.length = static_cast<int>(rng.uniform_int(1, 4));
        switch (trial % 3) {
            case 0: cfg.seq.kind = OperatorKind::Adjacency; break;
            case 1: cfg.seq.kind = OperatorKind::NormalizedAdjacency; break;
            default: cfg.seq.kind = OperatorKind::NonBacktracking; break;
        }
        int n = static_cast<int>(rng.uniform_int(2, 6));
        Graph g = generate_family(Family::ErdosRenyi, {.n = n, .edge_prob = 0.6}, rng.next_u64());
        ModelHooks hooks;
        hooks.bypass_layernorm = true;
        hooks.bypass_residual = true;
        ModelParams model = init_model(cfg, 3000 + trial, hooks);
        for (auto& [name, slot] : named_slots(model)) scale_into(slot->value, 0.5);
        Matrix X = random_matrix(g.n, cfg.in_dim, rng);
        int v = static_cast<int>(rng.uniform_int(0, g.n - 1));
        BoundReport rep = sensitivity_report(model, g, X, v, 128, 3.0, trial);
        if (rep.empirical > rep.bound_full)
            rep = sensitivity_report(model, g, X, v, 1280, 3.0, trial);
        EXPECT_LE(rep.empirical, rep.bound_full) << "trial " << trial;
        if (rep.empirical > rep.bound_full) ++violations;
        if (rep.bound_full > 0.0) tightest = std::min(tightest, rep.bound_full / std::max(rep.empirical, 1e-300));
    }
    // Reduction identities on random horizon profiles.
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        int L = static_cast<int>(rng.uniform_int(0, 6));
        std::vector<double> pe(L + 1);
        for (double& p : pe) p = rng.uniform(0.0, 2.0);
        double gamma = rng.uniform(0.1, 2.0);
        int D = static_cast<int>(rng.uniform_int(1, 4));
        EXPECT_EQ(bound_full(gamma, D, 0.0, pe), bound_nogm(gamma, D, pe)) << trial;
        double plain = 0.0;
        for (double p : pe) plain += p;
        EXPECT_DOUBLE_EQ(bound_nogm(gamma, 1, pe), gamma * plain) << trial;
    }
    EXPECT_EQ(violations, 0);
    EXPECT_LT(sw.seconds(), 300.0);
    char buf[96];
    std::snprintf(buf, sizeof buf, "0 violations in 20 configs; tightest bound/empirical ratio %.2f",
                  tightest);
    report(5, sw, buf);
}

// 6. Long-horizon trend on eccentricity (lines + random trees, n in [16,48],
// diameter <= 24; D=4, d=32, seeds {0,1,2}; L in {4,16}): (a) NBT median val
// MSE drops >= 20% from L=4 to L=16, (b) NBT median <= normalized-adjacency
// median at every L, (c) parameter count identical across cells.
// Recipe pinned by calibration: 48 train / 24 val graphs (one quarter lines,
// the rest random trees), Adam lr 3e-4, batch size 8, 100 epochs.
TEST(Acceptance, C6LongHorizonTrend) {
    Stopwatch sw;
    std::vector<LabeledGraph> tr = trend_set(48, 1000, 0.25);
    std::vector<LabeledGraph> va = trend_set(24, 2000, 0.25);
    for (const auto* ds : {&tr, &va})
        for (const LabeledGraph& lg : *ds) {
            ASSERT_GE(lg.graph.n, 16);
            ASSERT_LE(lg.graph.n, 48);
            ASSERT_LE(*std::max_element(lg.targets.begin(), lg.targets.end()), 24.0);
        }
    std::map<std::string, double> median;
    long long params_ref = -1;
    bool params_identical = true;
    for (const std::string& kind : {std::string("nbt:row"), std::string("adjnorm:none")}) {
        for (int L : {4, 16}) {
            std::vector<double> vals;
            for (uint64_t seed : {0, 1, 2}) {
                ModelConfig cfg;
                cfg.hidden_dim = 32;
                cfg.num_blocks = 4;
                cfg.level = TaskLevel::Node;
                cfg.seq.length = L;
                cfg.seq.kind = kind == "nbt:row" ? OperatorKind::NonBacktracking
                                                 : OperatorKind::NormalizedAdjacency;
                cfg.seq.normalization = kind == "nbt:row" ? SeqNorm::Row : SeqNorm::NoNorm;
                ModelParams model = init_model(cfg, seed);
                long long np = count_params(model);
                if (params_ref < 0) params_ref = np;
                if (np != params_ref) params_identical = false;
                TrainConfig tcfg;
                tcfg.learning_rate = 3e-4;
                tcfg.batch_size = 8;
                tcfg.max_epochs = 100;
                tcfg.seed = seed;
                TrainResult res = train(model, tcfg, tr, va);
                vals.push_back(res.best_val_mse);
                std::printf("  cell %s L=%d seed=%llu best val MSE %.4f (%.0fs)\n", kind.c_str(), L,
                            static_cast<unsigned long long>(seed), res.best_val_mse, sw.seconds());
                std::fflush(stdout);
            }
            std::sort(vals.begin(), vals.end());
            median[kind + "/" + std::to_string(L)] = vals[1];
        }
    }
    double m4 = median["nbt:row/4"], m16 = median["nbt:row/16"];
    double a4 = median["adjnorm:none/4"], a16 = median["adjnorm:none/16"];
    double reduction = (m4 - m16) / m4;
    EXPECT_GE(reduction, 0.20);       // (a)
    EXPECT_LE(m4, a4);                // (b) at L=4
    EXPECT_LE(m16, a16);              // (b) at L=16
    EXPECT_TRUE(params_identical);    // (c)
    EXPECT_LT(sw.seconds(), 1800.0);
    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "nbt medians L4 %.3f -> L16 %.3f (%.0f%% lower); adjnorm L4 %.3f L16 %.3f; "
                  "params %lld in all cells",
                  m4, m16, 100.0 * reduction, a4, a16, params_ref);
    report(6, sw, buf);
}

// 7. Instability reproduction: unnormalized adjacency powers at L=40 on the
// 4x10 grid trip the extraction guard; normalized adjacency and the
// row-normalized non-backtracking sequence never do.
TEST(Acceptance, C7InstabilityReproduction) {
    Stopwatch sw;
    Graph g = generate_family(Family::Grid, {.rows = 4, .cols = 10}, 0);
    auto probe = [&](OperatorKind kind, SeqNorm norm) {
        SeqExtractConfig scfg;
        scfg.kind = kind;
        scfg.length = 40;
        scfg.normalization = norm;
        return detect_instability(operator_sequence(g, scfg));
    };
    InstabilityReport adj = probe(OperatorKind::Adjacency, SeqNorm::NoNorm);
    InstabilityReport adjnorm = probe(OperatorKind::NormalizedAdjacency, SeqNorm::NoNorm);
    InstabilityReport nbt = probe(OperatorKind::NonBacktracking, SeqNorm::Row);
    EXPECT_TRUE(adj.flagged());
    EXPECT_GT(adj.overflow_at_index, 0);
    EXPECT_FALSE(adjnorm.flagged());
    EXPECT_FALSE(nbt.flagged());
    EXPECT_LT(sw.seconds(), 10.0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "adjacency flagged at element %d (max %.2e); normalized max %.2e and nbt:row max "
                  "%.2e stay clean",
                  adj.overflow_at_index, adj.max_abs, adjnorm.max_abs, nbt.max_abs);
    report(7, sw, buf);
}

// 8. Training smoke: 100-graph SSSP overfit set (lines, n <= 32), L=16, D=2,
// d=32, 200 epochs of Adam at lr 3e-4 cut train MSE to <= 50% of the
// epoch-1 value; the run is deterministic under a fixed seed.
TEST(Acceptance, C8TrainingSmoke) {
    Stopwatch sw;
    Rng rng(4000);
    std::vector<LabeledGraph> tr;
    while (static_cast<int>(tr.size()) < 100) {
        int n = static_cast<int>(rng.uniform_int(8, 32));
        Graph g = generate_family(Family::Line, {.n = n}, rng.next_u64());
        tr.push_back(make_task_instance(std::move(g), Task::Sssp, rng));
    }
    ModelConfig cfg;
    cfg.hidden_dim = 32;
    cfg.num_blocks = 2;
    cfg.level = TaskLevel::Node;
    cfg.in_dim = task_in_dim(Task::Sssp);
    cfg.seq.kind = OperatorKind::NonBacktracking;
    cfg.seq.normalization = SeqNorm::Row;
    cfg.seq.length = 16;
    TrainConfig tcfg;
    tcfg.learning_rate = 3e-4;
    tcfg.batch_size = 32;
    tcfg.max_epochs = 200;
    tcfg.seed = 0;
    ModelParams model = init_model(cfg, 0);
    TrainResult res = train(model, tcfg, tr, tr);
    ASSERT_EQ(res.history.size(), 200u);
    // history stores pooled log MSE of normalized labels; the 50% test is on
    // the MSE ratio, which normalization leaves unchanged.
    double first = std::exp(res.history.front().train_logmse);
    double last = std::exp(res.history.back().train_logmse);
    EXPECT_LE(last, 0.5 * first);
    // Determinism: a fresh 30-epoch run must reproduce the prefix bitwise;
    // epoch t depends only on the state after epoch t-1, so an identical
    // prefix pins the whole trajectory.
    ModelParams model2 = init_model(cfg, 0);
    TrainConfig short_cfg = tcfg;
    short_cfg.max_epochs = 30;
    TrainResult res2 = train(model2, short_cfg, tr, tr);
    ASSERT_EQ(res2.history.size(), 30u);
    bool deterministic = true;
    for (int e = 0; e < 30; ++e) {
        const HistoryRow &a = res.history[e], &b = res2.history[e];
        if (a.train_logmse != b.train_logmse || a.val_mse != b.val_mse || a.val_mae != b.val_mae)
            deterministic = false;
    }
    EXPECT_TRUE(deterministic);
    EXPECT_LT(sw.seconds(), 600.0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "train MSE ratio epoch200/epoch1 = %.3f (needs <= 0.5); 30-epoch re-run bitwise "
                  "identical: %s",
                  last / first, deterministic ? "yes" : "no");
    report(8, sw, buf);
}

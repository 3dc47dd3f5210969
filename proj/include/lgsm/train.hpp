#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lgsm/model.hpp"
#include "lgsm/parallel.hpp"

namespace lgsm {

struct TrainConfig {
    double learning_rate = 3e-4;
    int batch_size = 32;
    int max_epochs = 100;
    double clip_norm = 1.0;
    uint64_t seed = 0;
    double log_eps = 1e-12;
    bool label_normalize = true;

    void validate() const {
        // learning_rate 0 is allowed: it must yield a flat history.
        if (learning_rate < 0 || clip_norm <= 0 || log_eps <= 0 || batch_size < 1 || max_epochs < 0)
            throw ConfigError("bad train config");
    }
};

struct Metrics {
    double mse = 0, mae = 0, logmse = 0;
};

struct BatchLoss {
    double mse = 0;
    double logmse = 0;
    std::vector<Matrix> grads;  // d loss / d pred, one per member
};

// log of pooled MSE across all prediction entries in the batch;
// grad = 2(pred−target) / (N·(mse+ε)).
inline BatchLoss logmse_loss(const std::vector<Matrix>& preds, const std::vector<Matrix>& targets,
                             double log_eps = 1e-12) {
    if (preds.empty() || preds.size() != targets.size()) throw EmptyBatch("empty loss batch");
    size_t total = 0;
    double sq = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        check_shape(preds[i].same_shape(targets[i]), "loss shapes");
        total += preds[i].size();
        for (size_t j = 0; j < preds[i].size(); ++j) {
            double r = preds[i].data[j] - targets[i].data[j];
            sq += r * r;
        }
    }
    if (total == 0) throw EmptyBatch("no prediction entries");
    BatchLoss out;
    out.mse = sq / static_cast<double>(total);
    out.logmse = std::log(out.mse + log_eps);
    double scale = 2.0 / (static_cast<double>(total) * (out.mse + log_eps));
    out.grads.reserve(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) {
        Matrix g = sub(preds[i], targets[i]);
        scale_into(g, scale);
        out.grads.push_back(std::move(g));
    }
    return out;
}

struct LabelStats {
    double mean = 0;
    double stddev = 1;
};

// Population statistics over every target entry of the given (train) split.
inline LabelStats label_stats(const std::vector<LabeledGraph>& dataset) {
    size_t total = 0;
    double sum = 0;
    for (const LabeledGraph& g : dataset) {
        total += g.targets.size();
        sum = std::accumulate(g.targets.begin(), g.targets.end(), sum);
    }
    if (total == 0) throw EmptyBatch("no labels");
    double mean = sum / static_cast<double>(total);
    double var = 0;
    for (const LabeledGraph& g : dataset)
        for (double y : g.targets) var += (y - mean) * (y - mean);
    var /= static_cast<double>(total);
    if (var <= 0) throw DegenerateLabels("constant labels");
    return {mean, std::sqrt(var)};
}

inline double normalize_label(double y, const LabelStats& s) { return (y - s.mean) / s.stddev; }
inline double denormalize_label(double y, const LabelStats& s) { return y * s.stddev + s.mean; }

struct AdamConfig {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct AdamState {
    int64_t step = 0;
    std::vector<Matrix> m, v;
};

inline void adam_step(const std::vector<ParamSlot*>& slots, AdamState& st, double lr,
                      const AdamConfig& cfg = {}) {
    if (st.m.empty()) {
        for (ParamSlot* s : slots) {
            st.m.emplace_back(s->value.rows, s->value.cols);
            st.v.emplace_back(s->value.rows, s->value.cols);
        }
    }
    ++st.step;
    double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (size_t i = 0; i < slots.size(); ++i) {
        Matrix& m = st.m[i];
        Matrix& v = st.v[i];
        ParamSlot& p = *slots[i];
        for (size_t j = 0; j < p.value.size(); ++j) {
            double g = p.grad.data[j];
            m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * g;
            v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * g * g;
            double mhat = m.data[j] / c1;
            double vhat = v.data[j] / c2;
            p.value.data[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// Returns the pre-clip global norm; rescales in place when it exceeds max_norm.
inline double clip_gradients(const std::vector<ParamSlot*>& slots, double max_norm) {
    if (max_norm <= 0) throw ConfigError("clip norm must be > 0");
    double sq = 0;
    for (ParamSlot* s : slots) sq += sqnorm(s->grad);
    double norm = std::sqrt(sq);
    if (norm > max_norm) {
        double scale = max_norm / norm;
        for (ParamSlot* s : slots) scale_into(s->grad, scale);
    }
    return norm;
}

struct HistoryRow {
    int epoch = 0;
    double train_logmse = 0;
    double val_mse = 0;
    double val_mae = 0;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    ModelParams best;
    int best_epoch = -1;
    double best_val_mse = std::numeric_limits<double>::infinity();
    LabelStats stats;
};

namespace detail {

struct PreparedGraph {
    const LabeledGraph* lg = nullptr;
    std::vector<Matrix> mats;
    Matrix A;
    Matrix target;  // raw scale, n×1 or 1×1
};

inline std::vector<PreparedGraph> prepare(const std::vector<LabeledGraph>& dataset,
                                          const ModelConfig& cfg) {
    std::vector<PreparedGraph> out(dataset.size());
    parallel_for(dataset.size(), [&](size_t i) {
        const LabeledGraph& lg = dataset[i];
        PreparedGraph& pg = out[i];
        pg.lg = &lg;
        pg.mats = operator_sequence(lg.graph, cfg.seq).mats;
        pg.A = adjacency_matrix(lg.graph);
        int rows = task_level(lg.task) == TaskLevel::Node ? lg.graph.n : 1;
        check_shape(static_cast<int>(lg.targets.size()) == rows, "target length");
        pg.target = Matrix(rows, 1);
        for (int r = 0; r < rows; ++r) pg.target(r, 0) = lg.targets[r];
    });
    return out;
}

inline Matrix normalized_target(const PreparedGraph& pg, const LabelStats& stats) {
    Matrix t = pg.target;
    for (auto& v : t.data) v = normalize_label(v, stats);
    return t;
}

}  // namespace detail

// Metrics on the original label scale; predictions are denormalized with the
// training-split stats before comparison.
inline Metrics evaluate(const ModelParams& model, const std::vector<detail::PreparedGraph>& data,
                        const LabelStats& stats, double log_eps = 1e-12) {
    if (data.empty()) throw EmptyBatch("empty eval set");
    double sq = 0, ab = 0;
    size_t total = 0;
    for (const auto& pg : data) {
        Matrix pred = model_forward_ops(model, pg.mats, pg.A, pg.lg->features);
        check_shape(pred.same_shape(pg.target), "eval shapes");
        for (size_t j = 0; j < pred.size(); ++j) {
            double r = denormalize_label(pred.data[j], stats) - pg.target.data[j];
            sq += r * r;
            ab += std::abs(r);
        }
        total += pred.size();
    }
    Metrics m;
    m.mse = sq / static_cast<double>(total);
    m.mae = ab / static_cast<double>(total);
    m.logmse = std::log(m.mse + log_eps);
    return m;
}

inline Metrics evaluate(const ModelParams& model, const std::vector<LabeledGraph>& dataset,
                        const LabelStats& stats = {}, double log_eps = 1e-12) {
    return evaluate(model, detail::prepare(dataset, model.cfg), stats, log_eps);
}

// Mini-batch loop: deterministic seeded shuffling, per-batch forward pass with
// retained caches feeding the pooled loss and the backward pass, ordered
// gradient reduction, clip, Adam; best-val checkpoint retained.
inline TrainResult train(ModelParams& model, const TrainConfig& tcfg,
                         const std::vector<LabeledGraph>& train_set,
                         const std::vector<LabeledGraph>& val_set) {
    tcfg.validate();
    if (train_set.empty() || val_set.empty()) throw EmptyBatch("train/val must be nonempty");

    TrainResult result;
    result.stats = tcfg.label_normalize ? label_stats(train_set) : LabelStats{};

    auto train_prep = detail::prepare(train_set, model.cfg);
    auto val_prep = detail::prepare(val_set, model.cfg);

    std::vector<ParamSlot*> slots;
    for (auto& [name, slot] : named_slots(model)) slots.push_back(slot);
    AdamState adam;
    std::vector<size_t> order(train_prep.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(tcfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        // epoch train loss pools every residual seen in the first passes;
        // per-graph sums reduced in index order keep it independent of the
        // shuffle when params are frozen (lr = 0 must give a flat history)
        std::vector<double> graph_sq(train_prep.size(), 0.0);
        size_t epoch_count = 0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            size_t end = std::min(order.size(), start + tcfg.batch_size);
            std::vector<Matrix> preds, targets;
            std::vector<ModelCache> caches(end - start);
            preds.reserve(end - start);
            try {
                for (size_t i = start; i < end; ++i) {
                    const auto& pg = train_prep[order[i]];
                    preds.push_back(
                        model_forward_ops(model, pg.mats, pg.A, pg.lg->features, &caches[i - start]));
                    targets.push_back(detail::normalized_target(pg, result.stats));
                }
                BatchLoss loss = logmse_loss(preds, targets, tcfg.log_eps);
                for (size_t i = 0; i < preds.size(); ++i) {
                    epoch_count += preds[i].size();
                    double sq = 0;
                    for (size_t j = 0; j < preds[i].size(); ++j) {
                        double r = preds[i].data[j] - targets[i].data[j];
                        sq += r * r;
                    }
                    graph_sq[order[start + i]] = sq;
                }
                ++batches;

                zero_grads(model);
                for (size_t i = start; i < end; ++i) {
                    const auto& pg = train_prep[order[i]];
                    model_backward(model, pg.mats, pg.A, pg.lg->features, caches[i - start],
                                   loss.grads[i - start]);
                }
            } catch (const NonFiniteActivation& e) {
                throw NonFiniteActivation("epoch " + std::to_string(epoch) + " batch " +
                                          std::to_string(batches) + ": " + e.what());
            }
            clip_gradients(slots, tcfg.clip_norm);
            adam_step(slots, adam, tcfg.learning_rate);
        }

        double epoch_sq = std::accumulate(graph_sq.begin(), graph_sq.end(), 0.0);
        double train_mse = epoch_count ? epoch_sq / static_cast<double>(epoch_count) : 0.0;
        Metrics val = evaluate(model, val_prep, result.stats, tcfg.log_eps);
        result.history.push_back({epoch, std::log(train_mse + tcfg.log_eps), val.mse, val.mae});
        if (val.mse < result.best_val_mse) {
            result.best_val_mse = val.mse;
            result.best_epoch = epoch;
            result.best = model;
        }
    }
    if (result.best_epoch < 0) result.best = model;  // max_epochs == 0
    return result;
}

inline std::string history_csv(const std::vector<HistoryRow>& history) {
    std::string out = "epoch,train_logmse,val_mse,val_mae\n";
    char buf[128];
    for (const HistoryRow& r : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.epoch, r.train_logmse, r.val_mse,
                      r.val_mae);
        out += buf;
    }
    return out;
}

}  // namespace lgsm

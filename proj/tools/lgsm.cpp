#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lgsm/analysis.hpp"
#include "lgsm/checkpoint.hpp"
#include "lgsm/dataset.hpp"
#include "lgsm/train.hpp"

using nlohmann::json;
using namespace lgsm;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return json::parse(in);  // json::exception maps to a usage error
}

int parse_int(const std::string& s, const std::string& what) {
    size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("bad " + what + ": " + s);
    }
    if (pos != s.size()) throw ConfigError("bad " + what + ": " + s);
    return v;
}

// A size token is "N" (n / backbone length) or "AxB" (grid rows x cols,
// regular tree branching x depth).
FamilyParams parse_size_token(const std::string& tok, double edge_prob, int max_legs) {
    FamilyParams p;
    p.edge_prob = edge_prob;
    p.max_legs = max_legs;
    auto x = tok.find('x');
    if (x == std::string::npos) {
        int n = parse_int(tok, "size");
        p.n = n;
        p.backbone = n;
    } else {
        p.rows = p.branching = parse_int(tok.substr(0, x), "size");
        p.cols = p.depth = parse_int(tok.substr(x + 1), "size");
    }
    return p;
}

// Extraction tokens name the operator and optionally its normalization:
// "nbt:row", "adjnorm:none", "adjacency".
void parse_kind_token(const std::string& tok, OperatorKind* kind, SeqNorm* norm) {
    auto c = tok.find(':');
    *kind = parse_operator_kind(c == std::string::npos ? tok : tok.substr(0, c));
    *norm = c == std::string::npos ? SeqNorm::NoNorm : parse_seq_norm(tok.substr(c + 1));
}

TrainConfig train_cfg_from_json(const json& j) {
    TrainConfig t;
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.max_epochs = j.value("max_epochs", t.max_epochs);
    t.clip_norm = j.value("clip_norm", t.clip_norm);
    t.seed = j.value("seed", t.seed);
    t.log_eps = j.value("log_eps", t.log_eps);
    t.label_normalize = j.value("label_normalize", t.label_normalize);
    t.validate();
    return t;
}

ModelConfig model_cfg_from_json(const json& j, const ModelConfig& base) {
    ModelConfig c = base;
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.num_blocks = j.value("num_blocks", c.num_blocks);
    c.in_dim = j.value("in_dim", c.in_dim);
    c.out_dim = j.value("out_dim", c.out_dim);
    if (j.contains("level")) c.level = parse_task_level(j.at("level").get<std::string>());
    if (j.contains("seq")) {
        const json& s = j.at("seq");
        if (s.contains("kind")) c.seq.kind = parse_operator_kind(s.at("kind").get<std::string>());
        c.seq.length = s.value("length", c.seq.length);
        if (s.contains("normalization"))
            c.seq.normalization = parse_seq_norm(s.at("normalization").get<std::string>());
    }
    c.validate();
    return c;
}

Task uniform_task(const std::vector<LabeledGraph>& ds, const std::string& which) {
    if (ds.empty()) throw ConfigError(which + " dataset is empty");
    for (const LabeledGraph& lg : ds)
        if (lg.task != ds[0].task) throw ConfigError(which + " dataset mixes tasks");
    return ds[0].task;
}

void check_dataset_fits(const std::vector<LabeledGraph>& ds, const ModelConfig& cfg,
                        const std::string& which) {
    Task task = uniform_task(ds, which);
    if (cfg.level != task_level(task))
        throw ConfigError(which + ": model level \"" + to_string(cfg.level) +
                          "\" does not match task \"" + to_string(task) + "\"");
    for (const LabeledGraph& lg : ds)
        if (lg.features.cols != cfg.in_dim)
            throw ConfigError(which + ": feature width " + std::to_string(lg.features.cols) +
                              " does not match model in_dim " + std::to_string(cfg.in_dim));
    if (cfg.out_dim != 1) throw ConfigError("tasks here are scalar: out_dim must be 1");
}

json matrix_rows_json(const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json instability_json(const InstabilityReport& rep) {
    return {{"max_abs", rep.max_abs},
            {"has_nonfinite", rep.has_nonfinite},
            {"overflow_at_index", rep.overflow_at_index},
            {"threshold", rep.threshold},
            {"flagged", rep.flagged()}};
}

// Worst-case extraction report over a whole dataset.
json dataset_instability_json(const std::vector<LabeledGraph>& ds, const SeqExtractConfig& scfg) {
    double max_abs = 0.0;
    bool nonfinite = false;
    int first_graph = -1, at_index = -1;
    for (size_t i = 0; i < ds.size(); ++i) {
        InstabilityReport rep = detect_instability(operator_sequence(ds[i].graph, scfg));
        max_abs = std::max(max_abs, rep.max_abs);
        nonfinite = nonfinite || rep.has_nonfinite;
        if (rep.flagged() && first_graph < 0) {
            first_graph = static_cast<int>(i);
            at_index = rep.overflow_at_index;
        }
    }
    return {{"max_abs", max_abs},
            {"has_nonfinite", nonfinite},
            {"first_flagged_graph", first_graph},
            {"overflow_at_index", at_index},
            {"threshold", kInstabilityThreshold}};
}

int worker_threads() {
    const char* env = std::getenv("LGSM_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) throw ConfigError("LGSM_THREADS must be >= 0");
    return v == 0 ? 1 : static_cast<int>(v);  // 0 = serial
}

// Emit to stdout, or to <dir>/<name> when an output directory is given.
void emit(const std::string& out_dir, const std::string& name, const std::string& text) {
    if (out_dir.empty()) {
        std::cout << text;
        return;
    }
    std::filesystem::create_directories(out_dir);
    write_text(out_dir + "/" + name, text);
    std::cout << "wrote " << out_dir + "/" + name << "\n";
}

struct LoadedRun {
    ModelConfig model;
    TrainConfig train;
    std::vector<LabeledGraph> train_set, val_set;
    std::string out_dir;
    uint64_t model_seed = 0;
    json raw;
};

LoadedRun load_run_config(const std::string& path, const std::string& out_override,
                          int64_t seed_override) {
    json j = read_config(path);
    LoadedRun run;
    run.raw = j;
    if (!j.contains("data") || !j.at("data").contains("train") || !j.at("data").contains("val"))
        throw ConfigError("run config needs data.train and data.val paths");
    run.train_set = read_jsonl(j.at("data").at("train").get<std::string>());
    run.val_set = read_jsonl(j.at("data").at("val").get<std::string>());
    Task task = uniform_task(run.train_set, "train");

    ModelConfig base;
    base.in_dim = task_in_dim(task);
    base.level = task_level(task);
    run.model = model_cfg_from_json(j.value("model", json::object()), base);
    run.train = train_cfg_from_json(j.value("train", json::object()));
    run.model_seed = j.value("model_seed", uint64_t{0});
    if (seed_override >= 0) {
        run.train.seed = static_cast<uint64_t>(seed_override);
        run.model_seed = static_cast<uint64_t>(seed_override);
    }
    run.out_dir = !out_override.empty() ? out_override : j.value("out_dir", std::string{});
    check_dataset_fits(run.train_set, run.model, "train");
    check_dataset_fits(run.val_set, run.model, "val");
    return run;
}

Graph graph_from_flags(const std::string& family, const std::string& size, uint64_t seed,
                       double edge_prob, int max_legs) {
    return generate_family(parse_family(family), parse_size_token(size, edge_prob, max_legs), seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph sequence model toolkit: data generation, sequence extraction, "
                 "training, and sensitivity/influence analysis.\n"
                 "Exit codes: 0 ok, 2 usage/config, 3 numerical instability, 4 I/O.\n"
                 "LGSM_THREADS caps ablation worker concurrency (0 = serial)."};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a labeled graph dataset (JSONL)");
    std::string g_family, g_task = "ecc", g_out;
    std::vector<std::string> g_sizes;
    int g_count = 0, g_max_legs = 2;
    uint64_t g_seed = 0;
    double g_edge_prob = 0.3;
    gen->add_option("--family", g_family, "line|ladder|grid|random_tree|caterpillar|lobster|cycle|regular_tree|erdos_renyi")->required();
    gen->add_option("--sizes", g_sizes, "size tokens, e.g. 8,12 or 4x10 (grid rows x cols, tree branching x depth)")->required()->delimiter(',');
    gen->add_option("--count", g_count, "number of graphs")->required();
    gen->add_option("--task", g_task, "ecc|diam|sssp");
    gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--edge-prob", g_edge_prob, "erdos_renyi edge probability");
    gen->add_option("--max-legs", g_max_legs, "caterpillar/lobster max legs per backbone node");
    gen->add_option("--out", g_out, "output JSONL path")->required();

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train a model from a run config (JSON)");
    std::string t_config, t_out;
    int64_t t_seed = -1;
    tr->add_option("--config", t_config, "run config JSON")->required();
    tr->add_option("--out", t_out, "output directory (overrides config out_dir)");
    tr->add_option("--seed", t_seed, "override model_seed and train.seed");

    // ---- ablate-seq ----
    auto* ab = app.add_subcommand("ablate-seq", "train one cell per (kind, length, seed); CSV summary");
    std::string a_config, a_out;
    std::vector<std::string> a_kinds{"nbt:row", "normalized_adjacency:none"};
    std::vector<int> a_lengths{4, 16};
    std::vector<uint64_t> a_seeds{0, 1, 2};
    ab->add_option("--config", a_config, "run config JSON (its seq section is overridden per cell)")->required();
    ab->add_option("--kinds", a_kinds, "kind[:normalization] tokens, e.g. nbt:row,adjnorm:none")->delimiter(',');
    ab->add_option("--lengths", a_lengths, "sequence lengths")->delimiter(',');
    ab->add_option("--seeds", a_seeds, "model/train seeds")->delimiter(',');
    ab->add_option("--out", a_out, "output directory (overrides config out_dir)");

    // ---- sensitivity ----
    auto* se = app.add_subcommand("sensitivity", "empirical input sensitivity vs analytic bounds (JSON)");
    std::string s_family = "erdos_renyi", s_size = "5", s_checkpoint, s_out;
    std::string s_kind = "nbt", s_norm = "none";
    uint64_t s_gseed = 0, s_mseed = 0, s_fseed = 7, s_museed = 0;
    int s_hidden = 4, s_blocks = 1, s_length = 4, s_in = 1, s_v = 0, s_mu_samples = 128;
    double s_edge_prob = 0.5, s_mu_scale = 3.0;
    se->add_option("--family", s_family, "graph family");
    se->add_option("--size", s_size, "size token");
    se->add_option("--graph-seed", s_gseed, "graph generator seed");
    se->add_option("--edge-prob", s_edge_prob, "erdos_renyi edge probability");
    se->add_option("--checkpoint", s_checkpoint, "load model from checkpoint instead of flags");
    se->add_option("--hidden-dim", s_hidden, "model width");
    se->add_option("--num-blocks", s_blocks, "block count");
    se->add_option("--kind", s_kind, "operator kind");
    se->add_option("--normalization", s_norm, "operator normalization");
    se->add_option("--length", s_length, "sequence length");
    se->add_option("--in-dim", s_in, "feature width");
    se->add_option("--model-seed", s_mseed, "model init seed");
    se->add_option("--feature-seed", s_fseed, "random feature seed");
    se->add_option("--v", s_v, "probed node");
    se->add_option("--mu-samples", s_mu_samples, "samples per regularity estimate");
    se->add_option("--mu-scale", s_mu_scale, "sampling scale for regularity estimates");
    se->add_option("--mu-seed", s_museed, "sampling seed for regularity estimates");
    se->add_option("--out", s_out, "output directory (default: stdout)");

    // ---- influence-check ----
    auto* ic = app.add_subcommand("influence-check", "influence-ratio law on regular trees (CSV)");
    std::vector<int> i_degs{3, 4}, i_ks{1, 2, 3};
    std::string i_out;
    ic->add_option("--deg", i_degs, "tree degrees")->delimiter(',');
    ic->add_option("--k", i_ks, "walk lengths")->delimiter(',');
    ic->add_option("--out", i_out, "output directory (default: stdout)");

    // ---- extract ----
    auto* ex = app.add_subcommand("extract", "operator sequence (or feature sequence) as JSON");
    std::string e_family = "line", e_size = "3", e_kind = "nbt", e_norm = "none", e_dataset, e_out;
    uint64_t e_gseed = 0;
    int e_length = 3, e_index = 0;
    double e_edge_prob = 0.3;
    ex->add_option("--family", e_family, "graph family");
    ex->add_option("--size", e_size, "size token");
    ex->add_option("--graph-seed", e_gseed, "graph generator seed");
    ex->add_option("--edge-prob", e_edge_prob, "erdos_renyi edge probability");
    ex->add_option("--kind", e_kind, "operator kind");
    ex->add_option("--normalization", e_norm, "operator normalization");
    ex->add_option("--length", e_length, "sequence length");
    ex->add_option("--dataset", e_dataset, "JSONL dataset: extract S^(k) = M^(k) X for one record");
    ex->add_option("--index", e_index, "record index within --dataset");
    ex->add_option("--out", e_out, "output directory (default: stdout)");

    // ---- influence ----
    auto* infl = app.add_subcommand("influence", "influence distribution of one (node, step) as CSV");
    std::string f_family = "regular_tree", f_size = "3x3", f_kind = "nbt", f_norm = "none", f_out;
    uint64_t f_gseed = 0;
    int f_length = 4, f_v = 0, f_k = 2;
    double f_edge_prob = 0.3;
    infl->add_option("--family", f_family, "graph family");
    infl->add_option("--size", f_size, "size token");
    infl->add_option("--graph-seed", f_gseed, "graph generator seed");
    infl->add_option("--edge-prob", f_edge_prob, "erdos_renyi edge probability");
    infl->add_option("--kind", f_kind, "operator kind");
    infl->add_option("--normalization", f_norm, "operator normalization");
    infl->add_option("--length", f_length, "sequence length");
    infl->add_option("--v", f_v, "source node")->required();
    infl->add_option("--k", f_k, "step index (k < length)")->required();
    infl->add_option("--out", f_out, "output directory (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (app.got_subcommand(gen)) {
            Family family = parse_family(g_family);
            Task task = parse_task(g_task);
            if (g_sizes.empty()) throw ConfigError("need at least one size");
            std::vector<FamilyParams> sizes;
            for (const std::string& tok : g_sizes)
                sizes.push_back(parse_size_token(tok, g_edge_prob, g_max_legs));
            std::vector<LabeledGraph> ds = generate_dataset(family, sizes, g_count, task, g_seed);
            write_jsonl(g_out, ds);
            std::cout << "wrote " << ds.size() << " records to " << g_out << "\n";
            return kExitOk;
        }

        if (app.got_subcommand(tr)) {
            LoadedRun run = load_run_config(t_config, t_out, t_seed);
            if (run.out_dir.empty()) throw ConfigError("no output directory (out_dir or --out)");
            std::filesystem::create_directories(run.out_dir);
            ModelParams model = init_model(run.model, run.model_seed);
            std::cout << "params " << count_params(model) << "\n";

            TrainResult res;
            try {
                res = train(model, run.train, run.train_set, run.val_set);
            } catch (const NonFiniteActivation& e) {
                json rep = {{"error", e.what()},
                            {"train_operator", dataset_instability_json(run.train_set, run.model.seq)},
                            {"val_operator", dataset_instability_json(run.val_set, run.model.seq)}};
                std::string path = run.out_dir + "/instability.json";
                write_text(path, rep.dump(2) + "\n");
                std::cerr << "numerical instability: " << e.what() << "\nreport: " << path << "\n";
                return kExitInstability;
            }

            write_text(run.out_dir + "/history.csv", history_csv(res.history));
            save_checkpoint(res.best, run.out_dir + "/checkpoint.json");
            json resolved = {{"model", config_to_json(run.model)},
                             {"train",
                              {{"learning_rate", run.train.learning_rate},
                               {"batch_size", run.train.batch_size},
                               {"max_epochs", run.train.max_epochs},
                               {"clip_norm", run.train.clip_norm},
                               {"seed", run.train.seed},
                               {"log_eps", run.train.log_eps},
                               {"label_normalize", run.train.label_normalize}}},
                             {"model_seed", run.model_seed},
                             {"data", run.raw.at("data")}};
            write_text(run.out_dir + "/config.json", resolved.dump(2) + "\n");
            std::cout << "best_epoch " << res.best_epoch << " best_val_mse " << res.best_val_mse
                      << "\nwrote " << run.out_dir << "/history.csv, checkpoint.json, config.json\n";
            return kExitOk;
        }

        if (app.got_subcommand(ab)) {
            LoadedRun run = load_run_config(a_config, a_out, -1);
            if (run.out_dir.empty()) throw ConfigError("no output directory (out_dir or --out)");
            if (a_kinds.empty() || a_lengths.empty() || a_seeds.empty())
                throw ConfigError("kinds, lengths, and seeds must be nonempty");
            std::filesystem::create_directories(run.out_dir + "/cells");

            struct Cell {
                std::string token;
                OperatorKind kind;
                SeqNorm norm;
                int length;
                uint64_t seed;
                bool unstable = false, failed = false;
                double val_mse = 0, val_mae = 0;
                int64_t params = 0;
            };
            std::vector<Cell> cells;
            for (const std::string& tok : a_kinds)
                for (int L : a_lengths)
                    for (uint64_t seed : a_seeds) {
                        Cell c;
                        c.token = tok;
                        parse_kind_token(tok, &c.kind, &c.norm);
                        c.length = L;
                        c.seed = seed;
                        cells.push_back(c);
                    }

            std::mutex io_mutex;
            auto run_cell = [&](Cell& c) {
                ModelConfig cfg = run.model;
                cfg.seq.kind = c.kind;
                cfg.seq.normalization = c.norm;
                cfg.seq.length = c.length;
                ModelParams model = init_model(cfg, c.seed);
                c.params = count_params(model);
                for (const auto* ds : {&run.train_set, &run.val_set})
                    for (const LabeledGraph& lg : *ds)
                        if (detect_instability(operator_sequence(lg.graph, cfg.seq)).flagged())
                            c.unstable = true;
                TrainConfig tcfg = run.train;
                tcfg.seed = c.seed;
                try {
                    TrainResult res = train(model, tcfg, run.train_set, run.val_set);
                    Metrics best = evaluate(res.best, run.val_set, res.stats, tcfg.log_eps);
                    c.val_mse = best.mse;
                    c.val_mae = best.mae;
                } catch (const NonFiniteActivation&) {
                    c.failed = true;
                    c.unstable = true;
                    c.val_mse = c.val_mae = std::numeric_limits<double>::quiet_NaN();
                }
                char row[192];
                std::snprintf(row, sizeof row, "%s,%d,%llu,%.9g,%.9g,%d\n", c.token.c_str(),
                              c.length, static_cast<unsigned long long>(c.seed), c.val_mse,
                              c.val_mae, c.unstable ? 1 : 0);
                std::string name = c.token;
                for (char& ch : name)
                    if (ch == ':') ch = '_';
                write_text(run.out_dir + "/cells/" + name + "_L" + std::to_string(c.length) + "_s" +
                               std::to_string(c.seed) + ".csv",
                           std::string("kind,length,seed,val_mse,val_mae,instability\n") + row);
                std::lock_guard<std::mutex> lock(io_mutex);
                std::cout << "cell " << c.token << " L=" << c.length << " seed=" << c.seed
                          << (c.failed ? " failed (non-finite)" : "")
                          << (c.unstable ? " [unstable]" : "") << "\n";
            };

            int threads = std::min<int>(worker_threads(), static_cast<int>(cells.size()));
            if (threads <= 1) {
                for (Cell& c : cells) run_cell(c);
            } else {
                std::atomic<size_t> next{0};
                std::vector<std::thread> pool;
                for (int t = 0; t < threads; ++t)
                    pool.emplace_back([&] {
                        for (size_t i; (i = next.fetch_add(1)) < cells.size();) run_cell(cells[i]);
                    });
                for (std::thread& t : pool) t.join();
            }

            for (const Cell& c : cells)
                if (c.params != cells[0].params)
                    throw ConfigError("ablation cells disagree on parameter count");
            std::string csv = "kind,length,seed,val_mse,val_mae,instability\n";
            char row[192];
            for (const Cell& c : cells) {
                std::snprintf(row, sizeof row, "%s,%d,%llu,%.9g,%.9g,%d\n", c.token.c_str(),
                              c.length, static_cast<unsigned long long>(c.seed), c.val_mse,
                              c.val_mae, c.unstable ? 1 : 0);
                csv += row;
            }
            write_text(run.out_dir + "/ablation.csv", csv);
            std::cout << "params " << cells[0].params << " (identical across cells)\nwrote "
                      << run.out_dir << "/ablation.csv\n";
            return kExitOk;
        }

        if (app.got_subcommand(se)) {
            Graph g = graph_from_flags(s_family, s_size, s_gseed, s_edge_prob, 2);
            ModelParams model = [&] {
                if (!s_checkpoint.empty()) return load_checkpoint(s_checkpoint);
                ModelConfig cfg;
                cfg.hidden_dim = s_hidden;
                cfg.num_blocks = s_blocks;
                cfg.level = TaskLevel::Node;
                cfg.in_dim = s_in;
                cfg.seq.kind = parse_operator_kind(s_kind);
                cfg.seq.normalization = parse_seq_norm(s_norm);
                cfg.seq.length = s_length;
                return init_model(cfg, s_mseed);
            }();
            Rng rng(s_fseed);
            Matrix X(g.n, model.cfg.in_dim);
            for (double& x : X.data) x = rng.uniform(-1.0, 1.0);
            BoundReport rep = sensitivity_report(model, g, X, s_v, s_mu_samples, s_mu_scale, s_museed);
            json out = {{"node", s_v},
                        {"n", g.n},
                        {"empirical", rep.empirical},
                        {"bound_1block", rep.bound_1block},
                        {"bound_nogm", rep.bound_nogm},
                        {"bound_full", rep.bound_full},
                        {"gamma", rep.gamma},
                        {"mu_ssm", rep.mu_ssm},
                        {"mu_mix", rep.mu_mix},
                        {"norm_b", rep.norm_b},
                        {"norm_c", rep.norm_c},
                        {"norm_a_graph", rep.norm_a_graph},
                        {"mu_samples", rep.mu_samples},
                        {"per_element", rep.per_element}};
            emit(s_out, "sensitivity.json", out.dump(2) + "\n");
            return kExitOk;
        }

        if (app.got_subcommand(ic)) {
            std::string csv = "d,k,measured,predicted,abs_err\n";
            char row[128];
            for (int d : i_degs)
                for (int k : i_ks) {
                    InfluenceCheck c = influence_ratio_check(d, k);
                    std::snprintf(row, sizeof row, "%d,%d,%.6f,%.6f,%.3e\n", d, k, c.measured,
                                  c.predicted, std::abs(c.measured - c.predicted));
                    csv += row;
                }
            emit(i_out, "influence_check.csv", csv);
            return kExitOk;
        }

        if (app.got_subcommand(ex)) {
            SeqExtractConfig scfg;
            scfg.kind = parse_operator_kind(e_kind);
            scfg.normalization = parse_seq_norm(e_norm);
            scfg.length = e_length;
            json out = {{"kind", to_string(scfg.kind)},
                        {"normalization", to_string(scfg.normalization)},
                        {"length", scfg.length}};
            if (!e_dataset.empty()) {
                std::vector<LabeledGraph> ds = read_jsonl(e_dataset);
                if (e_index < 0 || e_index >= static_cast<int>(ds.size()))
                    throw ConfigError("record index out of range");
                const LabeledGraph& lg = ds[e_index];
                SequenceBatch seq = extract_sequence(lg.graph, lg.features, scfg);
                out["n"] = lg.graph.n;
                out["source_record"] = e_index;
                json elems = json::array();
                for (const Matrix& s : seq) elems.push_back(matrix_rows_json(s));
                out["seq"] = elems;
                out["instability"] = instability_json(detect_instability(seq));
            } else {
                Graph g = graph_from_flags(e_family, e_size, e_gseed, e_edge_prob, 2);
                OperatorSequence ops = operator_sequence(g, scfg);
                out["n"] = g.n;
                json elems = json::array();
                for (const Matrix& m : ops.mats) elems.push_back(matrix_rows_json(m));
                out["mats"] = elems;
                out["instability"] = instability_json(detect_instability(ops));
            }
            emit(e_out, "extract.json", out.dump(2) + "\n");
            return kExitOk;
        }

        if (app.got_subcommand(infl)) {
            Graph g = graph_from_flags(f_family, f_size, f_gseed, f_edge_prob, 2);
            SeqExtractConfig scfg;
            scfg.kind = parse_operator_kind(f_kind);
            scfg.normalization = parse_seq_norm(f_norm);
            scfg.length = f_length;
            std::vector<double> dist = influence(g, scfg, f_v, f_k);
            std::string csv = "v,k,w,influence\n";
            char row[96];
            for (int w = 0; w < g.n; ++w) {
                std::snprintf(row, sizeof row, "%d,%d,%d,%.17g\n", f_v, f_k, w, dist[w]);
                csv += row;
            }
            emit(f_out, "influence.csv", csv);
            return kExitOk;
        }
    } catch (const NonFiniteActivation& e) {
        std::cerr << "numerical instability: " << e.what() << "\n";
        return kExitInstability;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}

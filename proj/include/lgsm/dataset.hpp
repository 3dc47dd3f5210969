#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lgsm/graph.hpp"
#include "lgsm/names.hpp"

namespace lgsm {

// One labeled graph per JSONL line:
//   {"n": 4, "edges": [[0,1],[1,2]], "x": [[...],...], "y": [...], "task": "ecc", "source": 2}
// "source" appears only for sssp records.

inline nlohmann::json record_to_json(const LabeledGraph& lg) {
    nlohmann::json j;
    j["n"] = lg.graph.n;
    auto edges = nlohmann::json::array();
    for (int u = 0; u < lg.graph.n; ++u)
        for (int v : lg.graph.adjacency[u])
            if (u < v) edges.push_back(nlohmann::json::array({u, v}));
    j["edges"] = std::move(edges);
    auto x = nlohmann::json::array();
    for (int i = 0; i < lg.features.rows; ++i) {
        auto row = nlohmann::json::array();
        for (int c = 0; c < lg.features.cols; ++c) row.push_back(lg.features(i, c));
        x.push_back(std::move(row));
    }
    j["x"] = std::move(x);
    j["y"] = lg.targets;
    j["task"] = to_string(lg.task);
    if (lg.source >= 0) j["source"] = lg.source;
    return j;
}

inline LabeledGraph record_from_json(const nlohmann::json& j) {
    for (const char* key : {"n", "edges", "x", "y", "task"})
        if (!j.contains(key)) throw IoError(std::string("missing key \"") + key + "\"");

    int n = j.at("n").get<int>();
    EdgeList edges;
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw IoError("edge must be a [u,v] pair");
        edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }

    LabeledGraph lg;
    lg.graph = build_graph(n, edges);
    lg.task = parse_task(j.at("task").get<std::string>());
    lg.source = j.value("source", -1);
    if (lg.task == Task::Sssp && lg.source < 0) throw IoError("sssp record needs \"source\"");
    if (lg.source >= n) throw IoError("source out of range");

    const auto& x = j.at("x");
    if (static_cast<int>(x.size()) != n) throw IoError("\"x\" must have one row per node");
    int width = x.empty() ? 0 : static_cast<int>(x.at(0).size());
    if (width < 1) throw IoError("\"x\" rows must be nonempty");
    lg.features = Matrix(n, width);
    for (int i = 0; i < n; ++i) {
        const auto& row = x.at(i);
        if (static_cast<int>(row.size()) != width) throw IoError("ragged \"x\" rows");
        for (int c = 0; c < width; ++c) lg.features(i, c) = row.at(c).get<double>();
    }

    lg.targets = j.at("y").get<std::vector<double>>();
    size_t want = task_level(lg.task) == TaskLevel::Graph ? 1 : static_cast<size_t>(n);
    if (lg.targets.size() != want)
        throw IoError("\"y\" length " + std::to_string(lg.targets.size()) + ", expected " +
                      std::to_string(want));
    return lg;
}

// Each graph draws its size uniformly from `sizes`, then its structure and
// labels from the stream of `seed`; the whole dataset is a pure function of
// the arguments.
inline std::vector<LabeledGraph> generate_dataset(Family family,
                                                  const std::vector<FamilyParams>& sizes, int count,
                                                  Task task, uint64_t seed) {
    if (sizes.empty()) throw InvalidParams("need at least one size");
    if (count < 1) throw InvalidParams("count must be >= 1");
    Rng rng(seed);
    std::vector<LabeledGraph> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const auto& p = sizes[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(sizes.size()) - 1))];
        Graph g = generate_family(family, p, rng.next_u64());
        out.push_back(make_task_instance(std::move(g), task, rng));
    }
    return out;
}

inline void write_jsonl(const std::string& path, const std::vector<LabeledGraph>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const LabeledGraph& lg : data) out << record_to_json(lg).dump() << "\n";
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<LabeledGraph> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<LabeledGraph> data;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            data.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const Error& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return data;
}

}  // namespace lgsm

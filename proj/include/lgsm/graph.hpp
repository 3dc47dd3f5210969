#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "lgsm/error.hpp"
#include "lgsm/matrix.hpp"
#include "lgsm/rng.hpp"

namespace lgsm {

constexpr int kUnreachable = -1;

struct Graph {
    int n = 0;
    std::vector<std::vector<int>> adjacency;
    std::vector<int> degrees;

    int num_edges() const {
        int m = 0;
        for (const auto& nb : adjacency) m += static_cast<int>(nb.size());
        return m / 2;
    }
};

using EdgeList = std::vector<std::pair<int, int>>;

inline Graph build_graph(int num_nodes, const EdgeList& edges) {
    if (num_nodes < 1) throw InvalidParams("graph needs at least one node");
    std::set<std::pair<int, int>> uniq;
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
            throw InvalidEdge("endpoint out of range");
        if (u == v) throw InvalidEdge("self-loop");
        uniq.insert({std::min(u, v), std::max(u, v)});
    }
    Graph g;
    g.n = num_nodes;
    g.adjacency.resize(num_nodes);
    for (auto [u, v] : uniq) {
        g.adjacency[u].push_back(v);
        g.adjacency[v].push_back(u);
    }
    for (auto& nb : g.adjacency) std::sort(nb.begin(), nb.end());
    g.degrees.resize(num_nodes);
    for (int v = 0; v < num_nodes; ++v) g.degrees[v] = static_cast<int>(g.adjacency[v].size());
    return g;
}

inline Matrix adjacency_matrix(const Graph& g) {
    Matrix a(g.n, g.n);
    for (int v = 0; v < g.n; ++v)
        for (int u : g.adjacency[v]) a(v, u) = 1.0;
    return a;
}

enum class Family { Line, Ladder, Grid, RandomTree, Caterpillar, Lobster, Cycle, RegularTree, ErdosRenyi };

struct FamilyParams {
    int n = 0;          // Line, RandomTree, Cycle, ErdosRenyi
    int rows = 0;       // Grid
    int cols = 0;       // Grid; Ladder rung count
    int branching = 0;  // RegularTree
    int depth = 0;      // RegularTree
    int backbone = 0;   // Caterpillar, Lobster
    int max_legs = 2;   // Caterpillar, Lobster: per-node leg count is sampled from [0, max_legs]
    double edge_prob = 0.0;  // ErdosRenyi
};

namespace detail {

inline EdgeList path_edges(int n, int offset = 0) {
    EdgeList e;
    for (int i = 0; i + 1 < n; ++i) e.push_back({offset + i, offset + i + 1});
    return e;
}

// Decodes a uniformly random Pruefer sequence into a labeled tree.
inline EdgeList random_tree_edges(int n, Rng& rng) {
    if (n == 1) return {};
    if (n == 2) return {{0, 1}};
    std::vector<int> seq(n - 2);
    for (int& s : seq) s = static_cast<int>(rng.uniform_int(0, n - 1));
    std::vector<int> deg(n, 1);
    for (int s : seq) ++deg[s];
    std::priority_queue<int, std::vector<int>, std::greater<>> leaves;
    for (int v = 0; v < n; ++v)
        if (deg[v] == 1) leaves.push(v);
    EdgeList edges;
    for (int s : seq) {
        int leaf = leaves.top();
        leaves.pop();
        edges.push_back({leaf, s});
        if (--deg[s] == 1) leaves.push(s);
    }
    int u = leaves.top();
    leaves.pop();
    edges.push_back({u, leaves.top()});
    return edges;
}

}  // namespace detail

inline Graph generate_family(Family family, const FamilyParams& p, uint64_t seed) {
    Rng rng(seed);
    switch (family) {
        case Family::Line: {
            if (p.n < 1) throw InvalidParams("Line: n >= 1");
            return build_graph(p.n, detail::path_edges(p.n));
        }
        case Family::Cycle: {
            if (p.n < 3) throw InvalidParams("Cycle: n >= 3");
            EdgeList e = detail::path_edges(p.n);
            e.push_back({p.n - 1, 0});
            return build_graph(p.n, e);
        }
        case Family::Ladder: {
            int rungs = p.cols > 0 ? p.cols : p.n;
            if (rungs < 1) throw InvalidParams("Ladder: rung count >= 1");
            EdgeList e;
            for (int i = 0; i < rungs; ++i) {
                e.push_back({i, rungs + i});
                if (i + 1 < rungs) {
                    e.push_back({i, i + 1});
                    e.push_back({rungs + i, rungs + i + 1});
                }
            }
            return build_graph(2 * rungs, e);
        }
        case Family::Grid: {
            if (p.rows < 1 || p.cols < 1) throw InvalidParams("Grid: rows, cols >= 1");
            EdgeList e;
            auto id = [&](int r, int c) { return r * p.cols + c; };
            for (int r = 0; r < p.rows; ++r)
                for (int c = 0; c < p.cols; ++c) {
                    if (r + 1 < p.rows) e.push_back({id(r, c), id(r + 1, c)});
                    if (c + 1 < p.cols) e.push_back({id(r, c), id(r, c + 1)});
                }
            return build_graph(p.rows * p.cols, e);
        }
        case Family::RandomTree: {
            if (p.n < 1) throw InvalidParams("RandomTree: n >= 1");
            return build_graph(p.n, detail::random_tree_edges(p.n, rng));
        }
        case Family::Caterpillar:
        case Family::Lobster: {
            if (p.backbone < 1) throw InvalidParams("backbone >= 1");
            if (p.max_legs < 0) throw InvalidParams("max_legs >= 0");
            EdgeList e = detail::path_edges(p.backbone);
            int next = p.backbone;
            for (int v = 0; v < p.backbone; ++v) {
                int legs = static_cast<int>(rng.uniform_int(0, p.max_legs));
                for (int l = 0; l < legs; ++l) {
                    e.push_back({v, next});
                    if (family == Family::Lobster) {
                        e.push_back({next, next + 1});
                        next += 2;
                    } else {
                        next += 1;
                    }
                }
            }
            return build_graph(next, e);
        }
        case Family::RegularTree: {
            if (p.branching < 2) throw InvalidParams("RegularTree: branching >= 2");
            if (p.depth < 0) throw InvalidParams("RegularTree: depth >= 0");
            EdgeList e;
            int next = 1;
            std::vector<std::pair<int, int>> frontier = {{0, 0}};  // (node, depth)
            for (size_t h = 0; h < frontier.size(); ++h) {
                auto [v, d] = frontier[h];
                if (d == p.depth) continue;
                int kids = d == 0 ? p.branching : p.branching - 1;
                for (int k = 0; k < kids; ++k) {
                    e.push_back({v, next});
                    frontier.push_back({next, d + 1});
                    ++next;
                }
            }
            return build_graph(next, e);
        }
        case Family::ErdosRenyi: {
            if (p.n < 1) throw InvalidParams("ErdosRenyi: n >= 1");
            if (p.edge_prob < 0.0 || p.edge_prob > 1.0) throw InvalidParams("ErdosRenyi: p in [0,1]");
            EdgeList e;
            for (int u = 0; u < p.n; ++u)
                for (int v = u + 1; v < p.n; ++v)
                    if (rng.uniform() < p.edge_prob) e.push_back({u, v});
            return build_graph(p.n, e);
        }
    }
    throw InvalidParams("unknown family");
}

inline std::vector<int> bfs_distances(const Graph& g, int source) {
    if (source < 0 || source >= g.n) throw InvalidParams("bfs source out of range");
    std::vector<int> dist(g.n, kUnreachable);
    dist[source] = 0;
    std::vector<int> queue = {source};
    for (size_t h = 0; h < queue.size(); ++h) {
        int u = queue[h];
        for (int v : g.adjacency[u])
            if (dist[v] == kUnreachable) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
    }
    return dist;
}

inline bool is_connected(const Graph& g) {
    auto d = bfs_distances(g, 0);
    return std::find(d.begin(), d.end(), kUnreachable) == d.end();
}

inline std::vector<int> eccentricities(const Graph& g) {
    std::vector<int> ecc(g.n);
    for (int v = 0; v < g.n; ++v) {
        auto d = bfs_distances(g, v);
        int mx = 0;
        for (int x : d) {
            if (x == kUnreachable) throw DisconnectedGraph("eccentricity needs a connected graph");
            mx = std::max(mx, x);
        }
        ecc[v] = mx;
    }
    return ecc;
}

inline int diameter(const Graph& g) {
    auto ecc = eccentricities(g);
    return *std::max_element(ecc.begin(), ecc.end());
}

enum class Task { Diameter, Eccentricity, Sssp };
enum class TaskLevel { Node, Graph };

inline TaskLevel task_level(Task t) {
    return t == Task::Diameter ? TaskLevel::Graph : TaskLevel::Node;
}

// Node-level tasks return one value per node; graph-level a single value.
inline std::vector<double> task_labels(const Graph& g, Task task, int source = -1) {
    switch (task) {
        case Task::Eccentricity: {
            auto ecc = eccentricities(g);
            return std::vector<double>(ecc.begin(), ecc.end());
        }
        case Task::Diameter:
            return {static_cast<double>(diameter(g))};
        case Task::Sssp: {
            if (source < 0) throw InvalidParams("Sssp needs a source node");
            auto d = bfs_distances(g, source);
            std::vector<double> out(d.size());
            for (size_t i = 0; i < d.size(); ++i) out[i] = static_cast<double>(d[i]);
            return out;
        }
    }
    throw InvalidParams("unknown task");
}

struct LabeledGraph {
    Graph graph;
    Matrix features;  // n × d_in
    std::vector<double> targets;
    Task task = Task::Eccentricity;
    int source = -1;  // Sssp only
};

inline int task_in_dim(Task t) { return t == Task::Sssp ? 2 : 1; }

// Random scalar feature per node; Sssp adds a one-hot source channel.
inline LabeledGraph make_task_instance(Graph g, Task task, Rng& rng, int source = -1) {
    LabeledGraph lg;
    lg.task = task;
    if (task == Task::Sssp && source < 0) source = static_cast<int>(rng.uniform_int(0, g.n - 1));
    lg.source = task == Task::Sssp ? source : -1;
    lg.features = Matrix(g.n, task_in_dim(task));
    for (int v = 0; v < g.n; ++v) lg.features(v, 0) = rng.uniform();
    if (task == Task::Sssp) lg.features(lg.source, 1) = 1.0;
    lg.targets = task_labels(g, task, lg.source);
    lg.graph = std::move(g);
    return lg;
}

}  // namespace lgsm

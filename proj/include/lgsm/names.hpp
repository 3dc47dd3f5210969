#pragma once

#include <string>

#include "lgsm/error.hpp"
#include "lgsm/graph.hpp"
#include "lgsm/seqext.hpp"

namespace lgsm {

inline std::string to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::Adjacency: return "adjacency";
        case OperatorKind::NormalizedAdjacency: return "normalized_adjacency";
        case OperatorKind::NonBacktracking: return "nbt";
    }
    throw ConfigError("bad operator kind");
}

inline OperatorKind parse_operator_kind(const std::string& s) {
    if (s == "adjacency" || s == "adj") return OperatorKind::Adjacency;
    if (s == "normalized_adjacency" || s == "adjnorm") return OperatorKind::NormalizedAdjacency;
    if (s == "nbt") return OperatorKind::NonBacktracking;
    throw ConfigError("unknown operator kind: " + s);
}

inline std::string to_string(SeqNorm n) {
    switch (n) {
        case SeqNorm::NoNorm: return "none";
        case SeqNorm::Row: return "row";
        case SeqNorm::RowOnFeatures: return "row_on_features";
    }
    throw ConfigError("bad normalization");
}

inline SeqNorm parse_seq_norm(const std::string& s) {
    if (s == "none") return SeqNorm::NoNorm;
    if (s == "row") return SeqNorm::Row;
    if (s == "row_on_features") return SeqNorm::RowOnFeatures;
    throw ConfigError("unknown normalization: " + s);
}

inline std::string to_string(Task t) {
    switch (t) {
        case Task::Eccentricity: return "ecc";
        case Task::Diameter: return "diam";
        case Task::Sssp: return "sssp";
    }
    throw ConfigError("bad task");
}

inline Task parse_task(const std::string& s) {
    if (s == "ecc") return Task::Eccentricity;
    if (s == "diam") return Task::Diameter;
    if (s == "sssp") return Task::Sssp;
    throw ConfigError("unknown task: " + s);
}

inline std::string to_string(TaskLevel l) {
    return l == TaskLevel::Node ? "node" : "graph";
}

inline TaskLevel parse_task_level(const std::string& s) {
    if (s == "node") return TaskLevel::Node;
    if (s == "graph") return TaskLevel::Graph;
    throw ConfigError("unknown task level: " + s);
}

inline std::string to_string(Family f) {
    switch (f) {
        case Family::Line: return "line";
        case Family::Ladder: return "ladder";
        case Family::Grid: return "grid";
        case Family::RandomTree: return "random_tree";
        case Family::Caterpillar: return "caterpillar";
        case Family::Lobster: return "lobster";
        case Family::Cycle: return "cycle";
        case Family::RegularTree: return "regular_tree";
        case Family::ErdosRenyi: return "erdos_renyi";
    }
    throw ConfigError("bad family");
}

inline Family parse_family(const std::string& s) {
    if (s == "line") return Family::Line;
    if (s == "ladder") return Family::Ladder;
    if (s == "grid") return Family::Grid;
    if (s == "random_tree") return Family::RandomTree;
    if (s == "caterpillar") return Family::Caterpillar;
    if (s == "lobster") return Family::Lobster;
    if (s == "cycle") return Family::Cycle;
    if (s == "regular_tree") return Family::RegularTree;
    if (s == "erdos_renyi") return Family::ErdosRenyi;
    throw ConfigError("unknown family: " + s);
}

}  // namespace lgsm

#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "lgsm/model.hpp"
#include "lgsm/names.hpp"

namespace lgsm {

inline nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"hidden_dim", cfg.hidden_dim},
            {"num_blocks", cfg.num_blocks},
            {"in_dim", cfg.in_dim},
            {"out_dim", cfg.out_dim},
            {"level", to_string(cfg.level)},
            {"seq",
             {{"kind", to_string(cfg.seq.kind)},
              {"length", cfg.seq.length},
              {"normalization", to_string(cfg.seq.normalization)}}}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.num_blocks = j.at("num_blocks").get<int>();
    cfg.in_dim = j.at("in_dim").get<int>();
    cfg.out_dim = j.at("out_dim").get<int>();
    cfg.level = parse_task_level(j.at("level").get<std::string>());
    const auto& s = j.at("seq");
    cfg.seq.kind = parse_operator_kind(s.at("kind").get<std::string>());
    cfg.seq.length = s.at("length").get<int>();
    cfg.seq.normalization = parse_seq_norm(s.at("normalization").get<std::string>());
    cfg.validate();
    return cfg;
}

inline nlohmann::json checkpoint_to_json(ModelParams& p) {
    nlohmann::json params = nlohmann::json::object();
    for (auto& [name, slot] : named_slots(p)) {
        params[name] = {{"rows", slot->value.rows},
                        {"cols", slot->value.cols},
                        {"data", slot->value.data}};
    }
    return {{"format", "lgsm-checkpoint-v1"},
            {"config", config_to_json(p.cfg)},
            {"hooks",
             {{"identity_sigma2", p.hooks.identity_sigma2},
              {"bypass_layernorm", p.hooks.bypass_layernorm},
              {"bypass_residual", p.hooks.bypass_residual}}},
            {"params", params}};
}

inline ModelParams checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "lgsm-checkpoint-v1") throw ConfigError("not a checkpoint file");
    ModelConfig cfg = config_from_json(j.at("config"));
    ModelHooks hooks;
    const auto& h = j.at("hooks");
    hooks.identity_sigma2 = h.at("identity_sigma2").get<bool>();
    hooks.bypass_layernorm = h.at("bypass_layernorm").get<bool>();
    hooks.bypass_residual = h.at("bypass_residual").get<bool>();
    ModelParams p = init_model(cfg, 0, hooks);
    const auto& params = j.at("params");
    for (auto& [name, slot] : named_slots(p)) {
        if (!params.contains(name)) throw ConfigError("checkpoint missing parameter: " + name);
        const auto& t = params.at(name);
        if (t.at("rows").get<int>() != slot->value.rows || t.at("cols").get<int>() != slot->value.cols)
            throw ConfigError("checkpoint shape mismatch for " + name);
        auto vals = t.at("data").get<std::vector<double>>();
        slot->value.data.assign(vals.begin(), vals.end());
        slot->grad.zero();
    }
    return p;
}

inline void save_checkpoint(ModelParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << checkpoint_to_json(p).dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad checkpoint JSON in " + path + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace lgsm

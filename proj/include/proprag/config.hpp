#pragma once
// Run configuration: a flat JSON file overriding the built-in defaults,
// which command-line flags override in turn. Unknown keys are rejected so
// typos fail loudly instead of silently running with defaults.

#include "proprag/embedding.hpp"
#include "proprag/errors.hpp"
#include "proprag/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace proprag {

using json = nlohmann::json;

struct RunConfig {
    RetrievalOptions retrieval;
    double tau_syn = 0.8;
    ProviderConfig provider;
};

inline SeedMode parse_seed_mode(const std::string& s) {
    if (s == "both") return SeedMode::both;
    if (s == "exploration_only") return SeedMode::exploration_only;
    if (s == "exploitation_only") return SeedMode::exploitation_only;
    throw DataError("unknown seed_mode: " + s +
                    " (expected both | exploration_only | exploitation_only)");
}

inline void apply_config_json(RunConfig& cfg, const json& j) {
    if (!j.is_object()) throw DataError("config: top level must be a JSON object");
    static const std::set<std::string> known = {
        "n_prop", "n_entity", "damping_explore", "subgraph_passages",
        "beam_width", "max_hops", "rescore_pool", "jump_count", "graph_guidance",
        "explore_entities", "explore_props", "exploit_entities", "exploit_paths",
        "passage_reset", "seed_mode", "damping_exploit",
        "ppr_tolerance", "ppr_max_iterations", "k_out",
        "tau_syn", "provider"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw DataError("config: unknown key: " + key);
    }

    auto& r = cfg.retrieval;
    if (j.contains("n_prop")) r.n_prop = j["n_prop"].get<int>();
    if (j.contains("n_entity")) r.n_entity = j["n_entity"].get<int>();
    if (j.contains("damping_explore")) r.damping_explore = j["damping_explore"].get<double>();
    if (j.contains("subgraph_passages")) r.subgraph_passages = j["subgraph_passages"].get<int>();
    if (j.contains("beam_width")) r.beam.beam_width = j["beam_width"].get<int>();
    if (j.contains("max_hops")) r.beam.max_hops = j["max_hops"].get<int>();
    if (j.contains("rescore_pool")) r.beam.rescore_pool = j["rescore_pool"].get<int>();
    if (j.contains("jump_count")) r.beam.jump_count = j["jump_count"].get<int>();
    if (j.contains("graph_guidance")) r.beam.graph_guidance = j["graph_guidance"].get<bool>();
    if (j.contains("explore_entities")) r.explore_entities = j["explore_entities"].get<int>();
    if (j.contains("explore_props")) r.explore_props = j["explore_props"].get<int>();
    if (j.contains("exploit_entities")) r.exploit_entities = j["exploit_entities"].get<int>();
    if (j.contains("exploit_paths")) r.exploit_paths = j["exploit_paths"].get<int>();
    if (j.contains("passage_reset")) r.passage_reset = j["passage_reset"].get<double>();
    if (j.contains("seed_mode")) r.seed_mode = parse_seed_mode(j["seed_mode"].get<std::string>());
    if (j.contains("damping_exploit")) r.damping_exploit = j["damping_exploit"].get<double>();
    if (j.contains("ppr_tolerance")) r.ppr_tolerance = j["ppr_tolerance"].get<double>();
    if (j.contains("ppr_max_iterations")) {
        r.ppr_max_iterations = j["ppr_max_iterations"].get<int>();
    }
    if (j.contains("k_out")) r.k_out = j["k_out"].get<int>();

    if (j.contains("tau_syn")) cfg.tau_syn = j["tau_syn"].get<double>();

    if (j.contains("provider")) {
        const auto& p = j["provider"];
        if (!p.is_object()) throw DataError("config: provider must be an object");
        static const std::set<std::string> pknown = {
            "kind", "dimension", "batch_size", "timeout_ms",
            "max_retries", "parallelism", "cache_path"};
        for (const auto& [key, _] : p.items()) {
            if (!pknown.count(key)) throw DataError("config: unknown provider key: " + key);
        }
        if (p.contains("kind")) cfg.provider.kind = p["kind"].get<std::string>();
        if (p.contains("dimension")) cfg.provider.dimension = p["dimension"].get<int>();
        if (p.contains("batch_size")) cfg.provider.batch_size = p["batch_size"].get<int>();
        if (p.contains("timeout_ms")) cfg.provider.timeout_ms = p["timeout_ms"].get<int>();
        if (p.contains("max_retries")) cfg.provider.max_retries = p["max_retries"].get<int>();
        if (p.contains("parallelism")) cfg.provider.parallelism = p["parallelism"].get<int>();
        if (p.contains("cache_path")) cfg.provider.cache_path = p["cache_path"].get<std::string>();
    }
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("config file is not valid JSON: " + path);
    RunConfig cfg;
    apply_config_json(cfg, j);
    return cfg;
}

} // namespace proprag

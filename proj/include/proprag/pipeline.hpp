#pragma once
// Two-stage retrieval pipeline.
//
// Stage one explores: seed a high-damping random walk with the entities of
// the propositions most similar to the query, rank passages, and induce a
// subgraph from the top K. Stage two exploits: run graph-guided beam search
// inside the subgraph, convert the surviving paths into entity scores,
// blend exploration and exploitation seeds, and run a low-damping walk over
// the subgraph to produce the final passage ranking. The returned top-k is
// always a prefix of the full stage-two ranking.

#include "proprag/beam.hpp"
#include "proprag/embedding.hpp"
#include "proprag/errors.hpp"
#include "proprag/graph.hpp"
#include "proprag/ppr.hpp"
#include "proprag/text.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace proprag {

enum class SeedMode { both, exploration_only, exploitation_only };

inline const char* seed_mode_name(SeedMode m) {
    switch (m) {
        case SeedMode::both: return "both";
        case SeedMode::exploration_only: return "exploration_only";
        case SeedMode::exploitation_only: return "exploitation_only";
    }
    return "?";
}

struct RetrievalOptions {
    // stage one (exploration)
    int n_prop = 20;               // propositions ranked against the query
    int n_entity = 40;             // entity seed cap for the first walk
    double damping_explore = 0.75;
    int subgraph_passages = 50;    // top passages inducing the subgraph

    // beam search
    BeamOptions beam;

    // stage two (exploitation) seeds
    int explore_entities = 5;      // entity seeds from the initial ranking
    int explore_props = -1;        // propositions feeding those seeds; -1 = beam width
    int exploit_entities = 5;      // entity seeds from path scores
    int exploit_paths = 5;         // paths contributing entity scores
    double passage_reset = 0.05;   // reset mass spread over retained passages
    SeedMode seed_mode = SeedMode::both;
    double damping_exploit = 0.45;

    // shared
    double ppr_tolerance = 1e-8;
    int ppr_max_iterations = 200;
    int k_out = 5;

    int resolved_explore_props() const {
        return explore_props > 0 ? explore_props : beam.beam_width;
    }

    void validate() const {
        beam.validate();
        if (n_prop < 1) throw DataError("retrieve: n_prop must be >= 1");
        if (n_entity < 1) throw DataError("retrieve: n_entity must be >= 1");
        if (subgraph_passages < 1) throw DataError("retrieve: subgraph_passages must be >= 1");
        if (explore_entities < 1) throw DataError("retrieve: explore_entities must be >= 1");
        if (explore_props == 0 || explore_props < -1) {
            throw DataError("retrieve: explore_props must be >= 1 (or -1 for beam width)");
        }
        if (exploit_entities < 1) throw DataError("retrieve: exploit_entities must be >= 1");
        if (exploit_paths < 1) throw DataError("retrieve: exploit_paths must be >= 1");
        if (!(passage_reset >= 0.0 && passage_reset < 1.0)) {
            throw DataError("retrieve: passage_reset must be in [0,1)");
        }
        if (!(damping_explore > 0.0 && damping_explore < 1.0) ||
            !(damping_exploit > 0.0 && damping_exploit < 1.0)) {
            throw DataError("retrieve: damping must be in (0,1)");
        }
        if (ppr_tolerance <= 0.0) throw DataError("retrieve: ppr_tolerance must be > 0");
        if (ppr_max_iterations < 1) throw DataError("retrieve: ppr_max_iterations must be >= 1");
        if (k_out < 1) throw DataError("retrieve: k_out must be >= 1");
    }
};

struct ScoredPassage {
    std::string id;
    double score;
};

struct StageOneResult {
    Embedding query_embedding;
    std::vector<std::pair<std::string, double>> top_propositions; // (id, similarity)
    SeedDistribution seeds;
    PPRScores ppr;
    std::vector<std::string> top_passages; // rank order, induces the subgraph
};

struct StageTwoResult {
    BeamResult beam;
    std::map<std::string, double> entity_scores; // empty for exploration_only
    SeedDistribution seeds;
    PPRScores ppr;
    std::vector<ScoredPassage> ranking; // every retained passage, ranked
};

struct RetrievalResult {
    std::vector<ScoredPassage> passages; // prefix of stage2.ranking, k_out long
    StageOneResult stage1;
    StageTwoResult stage2;
};

// ---------------------------------------------------------------------------
// Path-derived entity scores
// ---------------------------------------------------------------------------

// Every entity of every proposition on a path collects the path score once
// per containing proposition; the downstream entity of a synonymous bridge
// collects one extra share so synonym bridges weigh like exact ones, whose
// shared entity is counted in both propositions. Negative path scores are
// clamped to zero. Only the top `top_paths` ranked paths contribute.
inline std::map<std::string, double> entity_scores_from_paths(
    const PropositionGraph& g, std::span<const ReasoningPath> paths, int top_paths) {
    if (top_paths < 1) throw DataError("entity_scores_from_paths: top_paths must be >= 1");
    std::map<std::string, double> scores;
    size_t limit = std::min(paths.size(), static_cast<size_t>(top_paths));
    for (size_t i = 0; i < limit; ++i) {
        const ReasoningPath& path = paths[i];
        double s = std::max(path.score, 0.0);
        for (const auto& pid : path.proposition_ids) {
            auto prop = g.find_proposition(pid);
            if (!prop) throw DataError("entity_scores_from_paths: unknown proposition: " + pid);
            for (const auto& eid : g.proposition(*prop).entity_ids) {
                scores[eid] += s;
            }
        }
        for (const auto& conn : path.connections) {
            if (conn.kind == ConnectionKind::synonymous) {
                scores[conn.entity_b] += s;
            }
        }
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Stage one
// ---------------------------------------------------------------------------

inline StageOneResult run_stage_one(const PropositionGraph& g, Embedding query_embedding,
                                    const RetrievalOptions& opt) {
    StageOneResult out;
    out.query_embedding = std::move(query_embedding);

    std::vector<std::pair<double, uint32_t>> ranked;
    ranked.reserve(g.proposition_count());
    for (uint32_t p = 0; p < g.proposition_count(); ++p) {
        ranked.emplace_back(cosine(g.proposition(p).embedding, out.query_embedding), p);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    size_t keep = std::min(ranked.size(),
                           static_cast<size_t>(std::max(opt.n_prop, opt.resolved_explore_props())));
    for (size_t i = 0; i < keep; ++i) {
        out.top_propositions.emplace_back(g.proposition(ranked[i].second).id, ranked[i].first);
    }

    // Seed entities: first n_entity distinct entities encountered walking the
    // proposition ranking, uniformly weighted.
    std::map<std::string, double> seed_weights;
    size_t seed_props = std::min(ranked.size(), static_cast<size_t>(opt.n_prop));
    for (size_t i = 0; i < seed_props; ++i) {
        if (seed_weights.size() >= static_cast<size_t>(opt.n_entity)) break;
        for (const auto& eid : g.proposition(ranked[i].second).entity_ids) {
            if (seed_weights.size() >= static_cast<size_t>(opt.n_entity)) break;
            seed_weights.emplace(eid, 1.0);
        }
    }
    out.seeds = SeedDistribution::from_weights(seed_weights);

    GraphView view(g);
    out.ppr = run_ppr(view, out.seeds, opt.damping_explore, opt.ppr_tolerance,
                      opt.ppr_max_iterations);
    for (auto& p : top_passages(out.ppr, view, static_cast<size_t>(opt.subgraph_passages))) {
        out.top_passages.push_back(std::move(p.first));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage two
// ---------------------------------------------------------------------------

namespace detail {

// Rank candidate (id, weight) pairs by weight desc / id asc, keep the top
// `limit`, and normalize. All-zero weights fall back to uniform over the
// selected ids.
inline std::map<std::string, double> top_normalized(
    std::vector<std::pair<std::string, double>> candidates, int limit) {
    std::sort(candidates.begin(), candidates.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    if (candidates.size() > static_cast<size_t>(limit)) {
        candidates.resize(static_cast<size_t>(limit));
    }
    double total = 0.0;
    for (const auto& [_, w] : candidates) total += w;
    std::map<std::string, double> out;
    if (candidates.empty()) return out;
    for (const auto& [id, w] : candidates) {
        out[id] = total > 0.0 ? w / total : 1.0 / static_cast<double>(candidates.size());
    }
    return out;
}

} // namespace detail

inline StageTwoResult run_stage_two(const Subgraph& sub, const StageOneResult& stage1,
                                    EmbeddingProvider& provider, const RetrievalOptions& opt) {
    const PropositionGraph& g = sub.parent();
    GraphView view(sub);
    StageTwoResult out;
    out.beam = beam_search(view, stage1.query_embedding, provider, opt.beam);

    // Exploration seeds: entities of the top initial propositions, weighted
    // by their own query similarity (clamped at zero).
    std::map<std::string, double> explore_group;
    if (opt.seed_mode != SeedMode::exploitation_only) {
        std::vector<std::pair<std::string, double>> candidates;
        std::set<std::string> seen;
        size_t limit = std::min(stage1.top_propositions.size(),
                                static_cast<size_t>(opt.resolved_explore_props()));
        for (size_t i = 0; i < limit; ++i) {
            auto prop = g.find_proposition(stage1.top_propositions[i].first);
            if (!prop || !sub.contains_proposition(*prop)) continue;
            for (const auto& eid : g.proposition(*prop).entity_ids) {
                if (!seen.insert(eid).second) continue;
                uint32_t e = *g.find_entity(eid);
                double w = std::max(cosine(g.entity(e).embedding, stage1.query_embedding), 0.0);
                candidates.emplace_back(eid, w);
            }
        }
        explore_group = detail::top_normalized(std::move(candidates), opt.explore_entities);
    }

    // Exploitation seeds: path-derived entity scores.
    std::map<std::string, double> exploit_group;
    if (opt.seed_mode != SeedMode::exploration_only) {
        out.entity_scores = entity_scores_from_paths(g, out.beam.paths, opt.exploit_paths);
        std::vector<std::pair<std::string, double>> candidates(out.entity_scores.begin(),
                                                               out.entity_scores.end());
        exploit_group = detail::top_normalized(std::move(candidates), opt.exploit_entities);
    }

    std::map<std::string, double> seed_weights;
    if (!explore_group.empty() && !exploit_group.empty()) {
        for (const auto& [id, w] : explore_group) seed_weights[id] += 0.5 * w;
        for (const auto& [id, w] : exploit_group) seed_weights[id] += 0.5 * w;
    } else if (!explore_group.empty()) {
        seed_weights = std::move(explore_group);
    } else if (!exploit_group.empty()) {
        seed_weights = std::move(exploit_group);
    } else {
        throw DataError("retrieve: no stage-two seed entities");
    }

    if (opt.passage_reset > 0.0 && !sub.passages().empty()) {
        for (auto& [_, w] : seed_weights) w *= 1.0 - opt.passage_reset;
        double share = opt.passage_reset / static_cast<double>(sub.passages().size());
        for (uint32_t p : sub.passages()) {
            seed_weights[g.passage(p).id] += share;
        }
    }
    out.seeds = SeedDistribution::from_weights(seed_weights);

    out.ppr = run_ppr(view, out.seeds, opt.damping_exploit, opt.ppr_tolerance,
                      opt.ppr_max_iterations);
    for (auto& p : top_passages(out.ppr, view, sub.passages().size())) {
        out.ranking.push_back({std::move(p.first), p.second});
    }
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end retrieval
// ---------------------------------------------------------------------------

inline RetrievalResult retrieve(const PropositionGraph& g, const std::string& query,
                                EmbeddingProvider& provider,
                                const RetrievalOptions& opt = {}) {
    opt.validate();
    if (trim(query).empty()) throw DataError("retrieve: empty query");

    RetrievalResult out;
    out.stage1 = run_stage_one(g, provider.embed_one(query, EmbedRole::query), opt);
    Subgraph sub = induce_subgraph(g, out.stage1.top_passages);
    out.stage2 = run_stage_two(sub, out.stage1, provider, opt);
    size_t k = std::min(out.stage2.ranking.size(), static_cast<size_t>(opt.k_out));
    out.passages.assign(out.stage2.ranking.begin(), out.stage2.ranking.begin() + k);
    return out;
}

} // namespace proprag

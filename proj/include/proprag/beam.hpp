#pragma once
// Graph-guided beam search over proposition paths.
//
// Paths start as the top-scoring single propositions and grow one hop per
// round. Successors follow entity bridges: exact (shared entity),
// synonymous (synonymy edge between an entity of the last proposition and
// one of the successor), or a jump to one of the fixed high-similarity
// propositions chosen at initialization. Two-tier scoring keeps rounds
// cheap: a preliminary score from the running average of stored proposition
// embeddings ranks all expansions, then only the top pool is exactly
// rescored by embedding the concatenated path text. Dead-ended paths are
// retained and merged into the final ranking.

#include "proprag/embedding.hpp"
#include "proprag/errors.hpp"
#include "proprag/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace proprag {

enum class ConnectionKind { exact, synonymous, jump };

inline const char* connection_kind_name(ConnectionKind k) {
    switch (k) {
        case ConnectionKind::exact: return "exact";
        case ConnectionKind::synonymous: return "synonymous";
        case ConnectionKind::jump: return "jump";
    }
    return "?";
}

// connections[i] bridges proposition_ids[i] -> proposition_ids[i+1]. For an
// exact connection both entity fields carry the shared entity; for a
// synonymous connection entity_a sits in the earlier proposition and
// entity_b in the later one; jumps carry no entities.
struct PathConnection {
    ConnectionKind kind;
    std::string entity_a;
    std::string entity_b;
};

struct ReasoningPath {
    std::vector<std::string> proposition_ids;
    std::vector<PathConnection> connections;
    double score = 0.0;
};

struct BeamOptions {
    int beam_width = 4;   // paths kept per round and returned
    int max_hops = 3;     // maximum path length in propositions
    int rescore_pool = 40; // expansions exactly rescored per round
    int jump_count = 3;   // fixed jump targets drawn from the initial ranking
    bool graph_guidance = true; // when off, every proposition is a successor

    void validate() const {
        if (beam_width < 1) throw DataError("beam_search: beam_width must be >= 1");
        if (max_hops < 1) throw DataError("beam_search: max_hops must be >= 1");
        if (rescore_pool < 1) throw DataError("beam_search: rescore_pool must be >= 1");
        if (jump_count < 0) throw DataError("beam_search: jump_count must be >= 0");
    }
};

struct BeamResult {
    std::vector<ReasoningPath> paths; // ranked, at most beam_width
    std::vector<std::string> jump_points;
    int rounds = 0;
    int exact_rescores = 0; // fresh path-text embeddings computed
};

namespace detail {

struct BeamItem {
    std::vector<uint32_t> props; // ascending-index == lexicographic id order
    std::vector<PathConnection> connections;
    std::vector<double> embedding_sum; // running sum of stored embeddings
    double score = 0.0;
};

// Total order: score desc, then shorter path, then id sequence.
inline bool beam_item_less(const BeamItem& x, const BeamItem& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.props.size() != y.props.size()) return x.props.size() < y.props.size();
    return x.props < y.props;
}

inline double preliminary_score(const BeamItem& item, const Embedding& query) {
    double dot = 0.0;
    double norm_sq = 0.0;
    for (size_t i = 0; i < item.embedding_sum.size(); ++i) {
        dot += item.embedding_sum[i] * query[i];
        norm_sq += item.embedding_sum[i] * item.embedding_sum[i];
    }
    if (norm_sq < 1e-24) return -1.0;
    return dot / std::sqrt(norm_sq);
}

} // namespace detail

inline BeamResult beam_search(const GraphView& view, const Embedding& query,
                              EmbeddingProvider& provider, const BeamOptions& options = {}) {
    options.validate();
    const PropositionGraph& g = view.graph();
    if (static_cast<int>(query.size()) != g.dimension()) {
        throw DataError("beam_search: query dimension mismatch");
    }

    auto prop_in_view = [&](uint32_t prop) {
        return view.subgraph() ? view.subgraph()->contains_proposition(prop) : true;
    };
    std::vector<uint32_t> candidates; // ascending
    if (view.subgraph()) {
        auto props = view.subgraph()->propositions();
        candidates.assign(props.begin(), props.end());
    } else {
        candidates.resize(g.proposition_count());
        for (uint32_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    }

    BeamResult result;
    if (candidates.empty()) return result;

    // Initial ranking by stored-embedding similarity; ties break toward the
    // smaller proposition id.
    std::vector<std::pair<double, uint32_t>> initial;
    initial.reserve(candidates.size());
    for (uint32_t p : candidates) {
        initial.emplace_back(cosine(g.proposition(p).embedding, query), p);
    }
    std::sort(initial.begin(), initial.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });

    std::vector<uint32_t> jump_points;
    for (size_t i = 0; i < initial.size() && i < static_cast<size_t>(options.jump_count); ++i) {
        jump_points.push_back(initial[i].second);
    }
    for (uint32_t p : jump_points) result.jump_points.push_back(g.proposition(p).id);

    // Exact path score memo (concatenated text -> score for this query).
    std::unordered_map<std::string, double> exact_memo;
    auto path_text = [&](const std::vector<uint32_t>& props) {
        std::string out;
        for (size_t i = 0; i < props.size(); ++i) {
            if (i) out += ' ';
            out += g.proposition(props[i]).text;
        }
        return out;
    };

    std::vector<detail::BeamItem> beam;
    for (size_t i = 0; i < initial.size() && i < static_cast<size_t>(options.beam_width); ++i) {
        uint32_t p = initial[i].second;
        detail::BeamItem item;
        item.props = {p};
        const Embedding& e = g.proposition(p).embedding;
        item.embedding_sum.assign(e.begin(), e.end());
        item.score = initial[i].first;
        exact_memo[path_text(item.props)] = item.score;
        beam.push_back(std::move(item));
    }
    std::sort(beam.begin(), beam.end(), detail::beam_item_less);

    // Classifies the bridge between the last proposition of a path and a
    // successor: exact beats synonymous beats jump; within a kind the
    // lexicographically smallest entity (pair) wins.
    auto classify = [&](uint32_t last, uint32_t next) -> PathConnection {
        const auto& next_ents = g.proposition(next).entity_ids;
        std::set<uint32_t> next_set;
        for (const auto& eid : next_ents) next_set.insert(*g.find_entity(eid));
        std::vector<uint32_t> last_idx;
        for (const auto& eid : g.proposition(last).entity_ids) {
            last_idx.push_back(*g.find_entity(eid));
        }
        std::sort(last_idx.begin(), last_idx.end());
        for (uint32_t e : last_idx) {
            if (next_set.count(e)) {
                const std::string& id = g.entity(e).id;
                return {ConnectionKind::exact, id, id};
            }
        }
        for (uint32_t e : last_idx) {
            for (const auto& syn : g.synonyms_of(e)) {
                if (next_set.count(syn.entity)) {
                    return {ConnectionKind::synonymous, g.entity(e).id,
                            g.entity(syn.entity).id};
                }
            }
        }
        return {ConnectionKind::jump, "", ""};
    };

    auto successors = [&](const detail::BeamItem& item) {
        std::set<uint32_t> out;
        uint32_t last = item.props.back();
        if (options.graph_guidance) {
            for (const auto& eid : g.proposition(last).entity_ids) {
                uint32_t e = *g.find_entity(eid);
                for (uint32_t p : g.props_of_entity(e)) {
                    if (prop_in_view(p)) out.insert(p);
                }
                for (const auto& syn : g.synonyms_of(e)) {
                    for (uint32_t p : g.props_of_entity(syn.entity)) {
                        if (prop_in_view(p)) out.insert(p);
                    }
                }
            }
            for (uint32_t p : jump_points) out.insert(p);
        } else {
            out.insert(candidates.begin(), candidates.end());
        }
        for (uint32_t p : item.props) out.erase(p);
        return out;
    };

    std::vector<detail::BeamItem> finished;
    for (int round = 1; round < options.max_hops; ++round) {
        if (beam.empty()) break;
        std::vector<detail::BeamItem> pool;
        for (auto& item : beam) {
            auto next = successors(item);
            if (next.empty()) {
                finished.push_back(std::move(item));
                continue;
            }
            for (uint32_t p : next) {
                detail::BeamItem ext;
                ext.props = item.props;
                ext.props.push_back(p);
                ext.connections = item.connections;
                ext.connections.push_back(classify(item.props.back(), p));
                ext.embedding_sum = item.embedding_sum;
                const Embedding& e = g.proposition(p).embedding;
                for (size_t i = 0; i < ext.embedding_sum.size(); ++i) {
                    ext.embedding_sum[i] += e[i];
                }
                ext.score = detail::preliminary_score(ext, query);
                pool.push_back(std::move(ext));
            }
        }
        if (pool.empty()) {
            // Every path dead-ended this round; drop the moved-from shells so
            // only the finished paths reach the final ranking.
            beam.clear();
            break;
        }
        ++result.rounds;

        // Preliminary cut: only the top rescore_pool expansions survive.
        std::sort(pool.begin(), pool.end(), detail::beam_item_less);
        if (pool.size() > static_cast<size_t>(options.rescore_pool)) {
            pool.resize(static_cast<size_t>(options.rescore_pool));
        }

        // Exact rescoring of the pool, memoized on concatenated path text.
        std::vector<std::string> texts;
        std::vector<size_t> text_slot(pool.size());
        std::map<std::string, size_t> pending;
        for (size_t i = 0; i < pool.size(); ++i) {
            std::string text = path_text(pool[i].props);
            if (exact_memo.count(text)) {
                text_slot[i] = static_cast<size_t>(-1);
                pool[i].score = exact_memo[text];
                continue;
            }
            auto [it, fresh] = pending.emplace(text, texts.size());
            if (fresh) texts.push_back(text);
            text_slot[i] = it->second;
        }
        if (!texts.empty()) {
            auto vecs = provider.embed(texts, EmbedRole::document);
            result.exact_rescores += static_cast<int>(texts.size());
            for (size_t t = 0; t < texts.size(); ++t) {
                exact_memo[texts[t]] = cosine(vecs[t], query);
            }
            for (size_t i = 0; i < pool.size(); ++i) {
                if (text_slot[i] != static_cast<size_t>(-1)) {
                    pool[i].score = exact_memo[texts[text_slot[i]]];
                }
            }
        }

        std::sort(pool.begin(), pool.end(), detail::beam_item_less);
        if (pool.size() > static_cast<size_t>(options.beam_width)) {
            pool.resize(static_cast<size_t>(options.beam_width));
        }
        beam = std::move(pool);
    }

    // Final ranking: surviving beam plus dead-ended paths, capped at the
    // beam width.
    for (auto& item : finished) beam.push_back(std::move(item));
    std::sort(beam.begin(), beam.end(), detail::beam_item_less);
    if (beam.size() > static_cast<size_t>(options.beam_width)) {
        beam.resize(static_cast<size_t>(options.beam_width));
    }

    for (const auto& item : beam) {
        ReasoningPath path;
        for (uint32_t p : item.props) path.proposition_ids.push_back(g.proposition(p).id);
        path.connections = item.connections;
        path.score = item.score;
        result.paths.push_back(std::move(path));
    }
    return result;
}

} // namespace proprag

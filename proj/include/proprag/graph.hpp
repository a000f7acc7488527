#pragma once
// Proposition graph: entity nodes, passage nodes, propositions, and three
// undirected edge families.
//
//   clique      entity-entity, one adjacency entry per co-occurring pair,
//               weight = number of propositions sharing the pair
//   containment entity-passage, weight 1.0
//   synonymy    entity-entity with cosine >= tau_syn, weight = similarity
//
// Node index space: entities [0, n_entities), passages [n_entities,
// n_entities + n_passages). Entities, passages and propositions are sorted
// by id at build time, so index order equals id order and every derived
// structure is deterministic. A built graph is immutable.

#include "proprag/embedding.hpp"
#include "proprag/errors.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace proprag {

struct EntityNode {
    std::string id;      // normalized surface, corpus-global key
    std::string surface; // canonical display form (== id after normalization)
    Embedding embedding;
    std::vector<std::string> source_passages; // sorted
};

struct PassageNode {
    std::string id;
    std::string text;
    Embedding embedding;
    std::vector<std::string> proposition_ids; // extraction order
};

struct Proposition {
    std::string id;
    std::string text;
    std::vector<std::string> entity_ids; // distinct, extraction order
    std::string passage_id;
    Embedding embedding;
};

enum class EdgeKind { clique, containment, synonymy };

inline const char* edge_kind_name(EdgeKind k) {
    switch (k) {
        case EdgeKind::clique: return "clique";
        case EdgeKind::containment: return "containment";
        case EdgeKind::synonymy: return "synonymy";
    }
    return "?";
}

struct Edge {
    EdgeKind kind;
    uint32_t a; // node index, a < b
    uint32_t b;
    double weight;
    std::vector<uint32_t> clique_props; // provenance, clique edges only
};

struct AdjacencyEntry {
    uint32_t neighbor;
    EdgeKind kind;
    double weight;
    uint32_t edge_index;
};

struct SynonymEntry {
    uint32_t entity; // entity index
    double similarity;
};

struct PropositionInput {
    std::string id;
    std::string text;
    std::vector<std::string> entity_ids;
    std::string passage_id;
    Embedding embedding;
};

struct PassageInput {
    std::string id;
    std::string text;
    Embedding embedding;
};

struct SynonymPair {
    std::string entity_a; // entity_a < entity_b
    std::string entity_b;
    double similarity;
};

// All-pairs synonym detection at threshold tau_syn. Returns canonical
// (a < b) pairs; irreflexive by construction.
inline std::vector<SynonymPair> detect_synonyms(
    const std::vector<std::pair<std::string, Embedding>>& entities, double tau_syn) {
    std::vector<SynonymPair> out;
    for (size_t i = 0; i < entities.size(); ++i) {
        for (size_t j = i + 1; j < entities.size(); ++j) {
            if (entities[i].first == entities[j].first) continue;
            double sim = cosine(entities[i].second, entities[j].second);
            if (sim >= tau_syn) {
                const auto& a = entities[i].first;
                const auto& b = entities[j].first;
                if (a < b) {
                    out.push_back({a, b, sim});
                } else {
                    out.push_back({b, a, sim});
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const SynonymPair& x, const SynonymPair& y) {
        return std::tie(x.entity_a, x.entity_b) < std::tie(y.entity_a, y.entity_b);
    });
    return out;
}

class Subgraph; // fwd

class PropositionGraph {
public:
    // Raw parts as they appear in a persisted index. Used by the loader to
    // reconstruct a graph without re-running synonym detection.
    struct Parts {
        std::vector<EntityNode> entities;
        std::vector<PassageNode> passages;
        std::vector<Proposition> propositions;
        struct EdgeRecord {
            EdgeKind kind;
            std::string a;
            std::string b;
            double weight;
            std::vector<std::string> clique_props;
        };
        std::vector<EdgeRecord> edges;
        double tau_syn = 0.8;
    };

    static PropositionGraph build(std::vector<PropositionInput> propositions,
                                  std::vector<PassageInput> passages,
                                  const std::map<std::string, Embedding>& entity_embeddings,
                                  double tau_syn);

    static PropositionGraph from_parts(Parts parts);

    // --- sizes ---
    size_t entity_count() const { return entities_.size(); }
    size_t passage_count() const { return passages_.size(); }
    size_t proposition_count() const { return propositions_.size(); }
    size_t node_count() const { return entities_.size() + passages_.size(); }
    size_t edge_count() const { return edges_.size(); }
    size_t edge_count(EdgeKind k) const {
        size_t n = 0;
        for (const auto& e : edges_) {
            if (e.kind == k) ++n;
        }
        return n;
    }
    int dimension() const { return dim_; }
    double tau_syn() const { return tau_syn_; }

    // --- node index space ---
    bool is_passage_node(uint32_t node) const { return node >= entities_.size(); }
    const std::string& node_id(uint32_t node) const {
        return is_passage_node(node) ? passages_[node - entities_.size()].id
                                     : entities_[node].id;
    }
    std::optional<uint32_t> find_node(const std::string& id) const {
        if (auto it = entity_index_.find(id); it != entity_index_.end()) return it->second;
        if (auto it = passage_index_.find(id); it != passage_index_.end()) {
            return static_cast<uint32_t>(entities_.size()) + it->second;
        }
        return std::nullopt;
    }
    std::optional<uint32_t> find_entity(const std::string& id) const {
        if (auto it = entity_index_.find(id); it != entity_index_.end()) return it->second;
        return std::nullopt;
    }
    std::optional<uint32_t> find_passage(const std::string& id) const {
        if (auto it = passage_index_.find(id); it != passage_index_.end()) return it->second;
        return std::nullopt;
    }
    std::optional<uint32_t> find_proposition(const std::string& id) const {
        if (auto it = proposition_index_.find(id); it != proposition_index_.end()) {
            return it->second;
        }
        return std::nullopt;
    }

    const EntityNode& entity(uint32_t idx) const { return entities_[idx]; }
    const PassageNode& passage(uint32_t idx) const { return passages_[idx]; }
    const Proposition& proposition(uint32_t idx) const { return propositions_[idx]; }
    uint32_t passage_node(uint32_t passage_idx) const {
        return static_cast<uint32_t>(entities_.size()) + passage_idx;
    }

    std::span<const EntityNode> entities() const { return entities_; }
    std::span<const PassageNode> passages() const { return passages_; }
    std::span<const Proposition> propositions() const { return propositions_; }
    std::span<const Edge> edges() const { return edges_; }

    std::span<const AdjacencyEntry> adjacency(uint32_t node) const {
        return adjacency_[node];
    }
    std::span<const uint32_t> props_of_entity(uint32_t entity_idx) const {
        return props_of_entity_[entity_idx];
    }
    std::span<const SynonymEntry> synonyms_of(uint32_t entity_idx) const {
        return synonyms_of_[entity_idx];
    }
    // Proposition index for each proposition id of a passage.
    std::span<const uint32_t> props_of_passage(uint32_t passage_idx) const {
        return props_of_passage_[passage_idx];
    }

private:
    friend class Subgraph;
    PropositionGraph() = default;
    void build_derived_indexes();

    std::vector<EntityNode> entities_;       // sorted by id
    std::vector<PassageNode> passages_;      // sorted by id
    std::vector<Proposition> propositions_;  // sorted by id
    std::vector<Edge> edges_;                // sorted by (kind, a, b)
    std::vector<std::vector<AdjacencyEntry>> adjacency_;
    std::vector<std::vector<uint32_t>> props_of_entity_;
    std::vector<std::vector<uint32_t>> props_of_passage_;
    std::vector<std::vector<SynonymEntry>> synonyms_of_;
    std::unordered_map<std::string, uint32_t> entity_index_;
    std::unordered_map<std::string, uint32_t> passage_index_;
    std::unordered_map<std::string, uint32_t> proposition_index_;
    int dim_ = 0;
    double tau_syn_ = 0.8;
};

// Localized view induced by the top-K passages: their propositions, the
// union of those propositions' entities, and only edges with both
// endpoints retained.
class Subgraph {
public:
    Subgraph(const PropositionGraph& parent, const std::vector<std::string>& top_passage_ids)
        : parent_(&parent) {
        node_mask_.assign(parent.node_count(), 0);
        prop_mask_.assign(parent.proposition_count(), 0);
        std::set<uint32_t> passage_set;
        for (const auto& pid : top_passage_ids) {
            auto idx = parent.find_passage(pid);
            if (!idx) throw DataError("induce_subgraph: unknown passage id: " + pid);
            if (passage_set.insert(*idx).second) passage_order_.push_back(*idx);
        }
        std::set<uint32_t> entity_set;
        for (uint32_t p : passage_set) {
            node_mask_[parent.passage_node(p)] = 1;
            for (uint32_t prop : parent.props_of_passage(p)) {
                prop_mask_[prop] = 1;
                propositions_.push_back(prop);
                for (const auto& eid : parent.proposition(prop).entity_ids) {
                    entity_set.insert(*parent.find_entity(eid));
                }
            }
        }
        std::sort(propositions_.begin(), propositions_.end());
        passages_.assign(passage_set.begin(), passage_set.end());
        entities_.assign(entity_set.begin(), entity_set.end());
        for (uint32_t e : entities_) node_mask_[e] = 1;
    }

    const PropositionGraph& parent() const { return *parent_; }
    std::span<const uint32_t> entities() const { return entities_; }       // entity indices
    std::span<const uint32_t> passages() const { return passages_; }       // passage indices
    std::span<const uint32_t> propositions() const { return propositions_; }
    std::span<const uint32_t> passage_order() const { return passage_order_; }

    bool contains_node(uint32_t node) const { return node_mask_[node] != 0; }
    bool contains_proposition(uint32_t prop) const { return prop_mask_[prop] != 0; }
    bool contains_entity(uint32_t entity_idx) const { return node_mask_[entity_idx] != 0; }

private:
    const PropositionGraph* parent_;
    std::vector<uint32_t> entities_;
    std::vector<uint32_t> passages_;
    std::vector<uint32_t> propositions_;
    std::vector<uint32_t> passage_order_; // induction order (rank)
    std::vector<char> node_mask_;
    std::vector<char> prop_mask_;
};

inline Subgraph induce_subgraph(const PropositionGraph& graph,
                                const std::vector<std::string>& top_passage_ids) {
    return Subgraph(graph, top_passage_ids);
}

// Uniform read surface over the full graph or a subgraph restriction.
class GraphView {
public:
    explicit GraphView(const PropositionGraph& g) : graph_(&g), sub_(nullptr) {
        nodes_.resize(g.node_count());
        for (uint32_t i = 0; i < g.node_count(); ++i) nodes_[i] = i;
    }
    explicit GraphView(const Subgraph& s) : graph_(&s.parent()), sub_(&s) {
        nodes_.reserve(s.entities().size() + s.passages().size());
        for (uint32_t e : s.entities()) nodes_.push_back(e);
        for (uint32_t p : s.passages()) nodes_.push_back(graph_->passage_node(p));
        std::sort(nodes_.begin(), nodes_.end());
    }

    const PropositionGraph& graph() const { return *graph_; }
    const Subgraph* subgraph() const { return sub_; }
    std::span<const uint32_t> nodes() const { return nodes_; } // parent indices, ascending
    bool contains(uint32_t node) const {
        return sub_ ? sub_->contains_node(node) : true;
    }

    // Adjacency restricted to the view.
    template <typename Fn>
    void for_each_neighbor(uint32_t node, Fn&& fn) const {
        for (const auto& a : graph_->adjacency(node)) {
            if (contains(a.neighbor)) fn(a);
        }
    }

private:
    const PropositionGraph* graph_;
    const Subgraph* sub_;
    std::vector<uint32_t> nodes_;
};

struct NeighborRecord {
    std::string node_id;
    EdgeKind kind;
    double weight;
};

// Neighbor listing by string id, sorted by (neighbor id, kind). Pass an
// empty kind filter to get all edge families.
inline std::vector<NeighborRecord> neighbors(const GraphView& view, const std::string& node_id,
                                             const std::vector<EdgeKind>& kinds = {}) {
    auto idx = view.graph().find_node(node_id);
    if (!idx || !view.contains(*idx)) {
        throw DataError("neighbors: unknown node id: " + node_id);
    }
    std::vector<NeighborRecord> out;
    view.for_each_neighbor(*idx, [&](const AdjacencyEntry& a) {
        if (!kinds.empty() &&
            std::find(kinds.begin(), kinds.end(), a.kind) == kinds.end()) {
            return;
        }
        out.push_back({view.graph().node_id(a.neighbor), a.kind, a.weight});
    });
    std::sort(out.begin(), out.end(), [](const NeighborRecord& x, const NeighborRecord& y) {
        if (x.node_id != y.node_id) return x.node_id < y.node_id;
        return static_cast<int>(x.kind) < static_cast<int>(y.kind);
    });
    return out;
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

inline PropositionGraph PropositionGraph::build(
    std::vector<PropositionInput> propositions, std::vector<PassageInput> passages,
    const std::map<std::string, Embedding>& entity_embeddings, double tau_syn) {
    if (propositions.empty() || passages.empty()) {
        throw DataError("build_graph: empty corpus");
    }
    if (!(tau_syn > 0.0 && tau_syn <= 1.0)) {
        throw DataError("build_graph: tau_syn must be in (0,1]");
    }

    PropositionGraph g;
    g.tau_syn_ = tau_syn;

    // Passages, sorted by id.
    std::sort(passages.begin(), passages.end(),
              [](const PassageInput& a, const PassageInput& b) { return a.id < b.id; });
    for (auto& p : passages) {
        if (trim(p.text).empty()) throw DataError("build_graph: passage has empty text: " + p.id);
        if (g.passage_index_.count(p.id)) {
            throw DataError("build_graph: duplicate passage id: " + p.id);
        }
        g.passage_index_[p.id] = static_cast<uint32_t>(g.passages_.size());
        g.passages_.push_back({p.id, std::move(p.text), std::move(p.embedding), {}});
    }

    // Propositions, sorted by id; entity lists deduplicated preserving order.
    std::sort(propositions.begin(), propositions.end(),
              [](const PropositionInput& a, const PropositionInput& b) { return a.id < b.id; });
    std::set<std::string> entity_ids;
    for (auto& p : propositions) {
        if (trim(p.text).empty()) {
            throw DataError("build_graph: proposition has empty text: " + p.id);
        }
        if (g.proposition_index_.count(p.id)) {
            throw DataError("build_graph: duplicate proposition id: " + p.id);
        }
        if (!g.passage_index_.count(p.passage_id)) {
            throw DataError("build_graph: dangling passage reference '" + p.passage_id +
                            "' in proposition " + p.id);
        }
        std::vector<std::string> ents;
        std::unordered_set<std::string> seen;
        for (auto& e : p.entity_ids) {
            if (e.empty()) continue;
            if (seen.insert(e).second) ents.push_back(e);
        }
        if (ents.empty()) {
            throw DataError("build_graph: proposition has no entities: " + p.id);
        }
        for (const auto& e : ents) entity_ids.insert(e);
        g.proposition_index_[p.id] = static_cast<uint32_t>(g.propositions_.size());
        g.propositions_.push_back(
            {p.id, std::move(p.text), std::move(ents), p.passage_id, std::move(p.embedding)});
    }

    // Entities: the union referenced by propositions, keyed and sorted by id.
    for (const auto& eid : entity_ids) {
        auto it = entity_embeddings.find(eid);
        if (it == entity_embeddings.end()) {
            throw DataError("build_graph: dangling entity reference (no embedding): " + eid);
        }
        g.entity_index_[eid] = static_cast<uint32_t>(g.entities_.size());
        g.entities_.push_back({eid, eid, it->second, {}});
    }

    // Dimension consistency across all embeddings.
    int dim = static_cast<int>(g.entities_.front().embedding.size());
    auto check_dim = [&](const Embedding& e, const std::string& what) {
        if (static_cast<int>(e.size()) != dim) {
            throw DataError("build_graph: dimension mismatch at " + what + " (" +
                            std::to_string(e.size()) + " vs " + std::to_string(dim) + ")");
        }
        double n = l2_norm(e);
        if (std::abs(n - 1.0) > 1e-4) {
            throw DataError("build_graph: embedding not unit-norm at " + what);
        }
    };
    for (const auto& e : g.entities_) check_dim(e.embedding, "entity " + e.id);
    for (const auto& p : g.passages_) check_dim(p.embedding, "passage " + p.id);
    for (const auto& p : g.propositions_) check_dim(p.embedding, "proposition " + p.id);
    g.dim_ = dim;

    // Clique edges: one entry per co-occurring entity pair, provenance lists
    // every proposition sharing the pair, weight = that multiplicity.
    std::map<std::pair<uint32_t, uint32_t>, std::vector<uint32_t>> clique;
    // Containment: entity -> owning passages via its propositions.
    std::map<std::pair<uint32_t, uint32_t>, char> containment; // (entity, passage_idx)
    for (uint32_t pi = 0; pi < g.propositions_.size(); ++pi) {
        const auto& prop = g.propositions_[pi];
        uint32_t passage_idx = g.passage_index_.at(prop.passage_id);
        g.passages_[passage_idx].proposition_ids.push_back(prop.id);
        std::vector<uint32_t> eidx;
        for (const auto& e : prop.entity_ids) eidx.push_back(g.entity_index_.at(e));
        for (uint32_t e : eidx) containment[{e, passage_idx}] = 1;
        std::sort(eidx.begin(), eidx.end());
        for (size_t i = 0; i < eidx.size(); ++i) {
            for (size_t j = i + 1; j < eidx.size(); ++j) {
                clique[{eidx[i], eidx[j]}].push_back(pi);
            }
        }
    }

    for (auto& [pair, props] : clique) {
        g.edges_.push_back({EdgeKind::clique, pair.first, pair.second,
                            static_cast<double>(props.size()), std::move(props)});
    }
    for (const auto& [pair, _] : containment) {
        uint32_t passage_node = static_cast<uint32_t>(g.entities_.size()) + pair.second;
        g.edges_.push_back({EdgeKind::containment, pair.first, passage_node, 1.0, {}});
        g.entities_[pair.first].source_passages.push_back(g.passages_[pair.second].id);
    }

    // Synonymy over all distinct entity pairs.
    {
        std::vector<std::pair<std::string, Embedding>> flat;
        flat.reserve(g.entities_.size());
        for (const auto& e : g.entities_) flat.emplace_back(e.id, e.embedding);
        for (const auto& pair : detect_synonyms(flat, tau_syn)) {
            uint32_t a = g.entity_index_.at(pair.entity_a);
            uint32_t b = g.entity_index_.at(pair.entity_b);
            if (a > b) std::swap(a, b);
            g.edges_.push_back({EdgeKind::synonymy, a, b, pair.similarity, {}});
        }
    }

    g.build_derived_indexes();
    return g;
}

inline PropositionGraph PropositionGraph::from_parts(Parts parts) {
    if (parts.propositions.empty() || parts.passages.empty()) {
        throw DataError("from_parts: empty graph");
    }
    PropositionGraph g;
    g.tau_syn_ = parts.tau_syn;
    g.entities_ = std::move(parts.entities);
    g.passages_ = std::move(parts.passages);
    g.propositions_ = std::move(parts.propositions);
    auto sorted_by_id = [](const auto& v) {
        return std::is_sorted(v.begin(), v.end(),
                              [](const auto& a, const auto& b) { return a.id < b.id; });
    };
    if (!sorted_by_id(g.entities_) || !sorted_by_id(g.passages_) ||
        !sorted_by_id(g.propositions_)) {
        throw DataError("from_parts: records not sorted by id");
    }
    for (uint32_t i = 0; i < g.entities_.size(); ++i) g.entity_index_[g.entities_[i].id] = i;
    for (uint32_t i = 0; i < g.passages_.size(); ++i) g.passage_index_[g.passages_[i].id] = i;
    for (uint32_t i = 0; i < g.propositions_.size(); ++i) {
        g.proposition_index_[g.propositions_[i].id] = i;
    }
    g.dim_ = static_cast<int>(g.entities_.front().embedding.size());
    for (const auto& e : parts.edges) {
        auto resolve = [&](const std::string& id) -> uint32_t {
            auto n = g.find_node(id);
            if (!n) throw DataError("from_parts: unknown edge endpoint: " + id);
            return *n;
        };
        Edge edge{e.kind, resolve(e.a), resolve(e.b), e.weight, {}};
        for (const auto& pid : e.clique_props) {
            auto p = g.find_proposition(pid);
            if (!p) throw DataError("from_parts: unknown clique provenance: " + pid);
            edge.clique_props.push_back(*p);
        }
        if (edge.a > edge.b) std::swap(edge.a, edge.b);
        g.edges_.push_back(std::move(edge));
    }
    g.build_derived_indexes();
    return g;
}

inline void PropositionGraph::build_derived_indexes() {
    std::sort(edges_.begin(), edges_.end(), [](const Edge& x, const Edge& y) {
        return std::tie(x.kind, x.a, x.b) < std::tie(y.kind, y.a, y.b);
    });

    adjacency_.assign(node_count(), {});
    synonyms_of_.assign(entities_.size(), {});
    for (uint32_t ei = 0; ei < edges_.size(); ++ei) {
        const Edge& e = edges_[ei];
        adjacency_[e.a].push_back({e.b, e.kind, e.weight, ei});
        adjacency_[e.b].push_back({e.a, e.kind, e.weight, ei});
        if (e.kind == EdgeKind::synonymy) {
            synonyms_of_[e.a].push_back({e.b, e.weight});
            synonyms_of_[e.b].push_back({e.a, e.weight});
        }
    }
    for (uint32_t n = 0; n < adjacency_.size(); ++n) {
        std::sort(adjacency_[n].begin(), adjacency_[n].end(),
                  [&](const AdjacencyEntry& x, const AdjacencyEntry& y) {
                      const std::string& xi = node_id(x.neighbor);
                      const std::string& yi = node_id(y.neighbor);
                      if (xi != yi) return xi < yi;
                      return static_cast<int>(x.kind) < static_cast<int>(y.kind);
                  });
    }
    for (auto& s : synonyms_of_) {
        std::sort(s.begin(), s.end(), [&](const SynonymEntry& x, const SynonymEntry& y) {
            return entities_[x.entity].id < entities_[y.entity].id;
        });
    }

    props_of_entity_.assign(entities_.size(), {});
    props_of_passage_.assign(passages_.size(), {});
    for (uint32_t pi = 0; pi < propositions_.size(); ++pi) {
        const auto& prop = propositions_[pi];
        for (const auto& eid : prop.entity_ids) {
            props_of_entity_[entity_index_.at(eid)].push_back(pi);
        }
        props_of_passage_[passage_index_.at(prop.passage_id)].push_back(pi);
    }
    for (auto& v : props_of_entity_) std::sort(v.begin(), v.end());
    for (auto& v : props_of_passage_) std::sort(v.begin(), v.end());
}

} // namespace proprag

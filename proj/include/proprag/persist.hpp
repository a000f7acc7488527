#pragma once
// Index persistence. An index directory holds three artifacts:
//
//   graph.jsonl     one versioned record per node / proposition / edge,
//                   sorted keys, id order — canonical bytes
//   embeddings.bin  "PRPG" magic, u32 dim, u32 rows, 4 pad bytes, then f32
//                   little-endian rows: entities, passages, propositions,
//                   each in id order
//   manifest.json   counts, threshold, provider fingerprint, corpus hash,
//                   and a chained FNV-1a hash over the other two files
//
// Saving the same graph twice produces byte-identical artifacts (the build
// timestamp is caller-supplied or pinned via PROPRAG_BUILD_TIME). Loading
// verifies the content hash before reconstructing the graph.

#include "proprag/errors.hpp"
#include "proprag/extraction.hpp"
#include "proprag/graph.hpp"
#include "proprag/text.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace proprag {

using json = nlohmann::json;

struct IndexManifest {
    int version = 1;
    int dimension = 0;
    double tau_syn = 0.8;
    size_t entity_count = 0;
    size_t passage_count = 0;
    size_t proposition_count = 0;
    size_t clique_edges = 0;
    size_t containment_edges = 0;
    size_t synonymy_edges = 0;
    std::string content_hash; // "fnv1a64:<hex>" over graph.jsonl then embeddings.bin
    std::string corpus_hash;
    std::string provider;
    std::string built_at;
};

struct IndexMetadata {
    std::string provider;
    std::string corpus_hash;
    std::string built_at; // empty -> PROPRAG_BUILD_TIME env or current UTC
};

inline std::string utc_timestamp() {
    if (const char* pinned = std::getenv("PROPRAG_BUILD_TIME")) return pinned;
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string hash_corpus(std::span<const CorpusPassage> passages) {
    uint64_t h = kFnvOffset;
    for (const auto& p : passages) {
        h = fnv1a64(p.id, h);
        h = fnv1a64(std::string_view("\0", 1), h);
        h = fnv1a64(p.text, h);
        h = fnv1a64(std::string_view("\0", 1), h);
    }
    return "fnv1a64:" + to_hex(h);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string serialize_graph_jsonl(const PropositionGraph& g) {
    std::string out;
    auto emit = [&](json j) {
        j["v"] = 1;
        out += j.dump();
        out += '\n';
    };
    for (const auto& e : g.entities()) {
        emit({{"kind", "entity"},
              {"id", e.id},
              {"surface", e.surface},
              {"source_passages", e.source_passages}});
    }
    for (const auto& p : g.passages()) {
        emit({{"kind", "passage"},
              {"id", p.id},
              {"text", p.text},
              {"proposition_ids", p.proposition_ids}});
    }
    for (const auto& p : g.propositions()) {
        emit({{"kind", "proposition"},
              {"id", p.id},
              {"text", p.text},
              {"entity_ids", p.entity_ids},
              {"passage_id", p.passage_id}});
    }
    for (const auto& e : g.edges()) {
        json j{{"kind", "edge"},
               {"edge_kind", edge_kind_name(e.kind)},
               {"a", g.node_id(e.a)},
               {"b", g.node_id(e.b)},
               {"weight", e.weight}};
        if (!e.clique_props.empty()) {
            json props = json::array();
            for (uint32_t p : e.clique_props) props.push_back(g.proposition(p).id);
            j["clique_props"] = std::move(props);
        }
        emit(std::move(j));
    }
    return out;
}

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline uint32_t get_u32(const std::string& in, size_t pos) {
    return static_cast<uint32_t>(static_cast<unsigned char>(in[pos])) |
           static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 1])) << 8 |
           static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 2])) << 16 |
           static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 3])) << 24;
}

inline void put_f32_row(std::string& out, const Embedding& row) {
    for (float f : row) put_u32(out, std::bit_cast<uint32_t>(f));
}

} // namespace detail

inline std::string serialize_embeddings(const PropositionGraph& g) {
    std::string out;
    out += "PRPG";
    uint32_t rows = static_cast<uint32_t>(g.entity_count() + g.passage_count() +
                                          g.proposition_count());
    detail::put_u32(out, static_cast<uint32_t>(g.dimension()));
    detail::put_u32(out, rows);
    detail::put_u32(out, 0);
    for (const auto& e : g.entities()) detail::put_f32_row(out, e.embedding);
    for (const auto& p : g.passages()) detail::put_f32_row(out, p.embedding);
    for (const auto& p : g.propositions()) detail::put_f32_row(out, p.embedding);
    return out;
}

inline std::string content_hash(const std::string& graph_jsonl,
                                const std::string& embeddings_bin) {
    uint64_t h = fnv1a64(graph_jsonl);
    h = fnv1a64(embeddings_bin, h);
    return "fnv1a64:" + to_hex(h);
}

inline json manifest_to_json(const IndexManifest& m) {
    return json{{"version", m.version},
                {"dimension", m.dimension},
                {"tau_syn", m.tau_syn},
                {"counts",
                 {{"entities", m.entity_count},
                  {"passages", m.passage_count},
                  {"propositions", m.proposition_count},
                  {"edges",
                   {{"clique", m.clique_edges},
                    {"containment", m.containment_edges},
                    {"synonymy", m.synonymy_edges},
                    {"total", m.clique_edges + m.containment_edges + m.synonymy_edges}}}}},
                {"content_hash", m.content_hash},
                {"corpus_hash", m.corpus_hash},
                {"provider", m.provider},
                {"built_at", m.built_at}};
}

inline IndexManifest manifest_from_json(const json& j) {
    IndexManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) {
        throw DataError("manifest: unsupported version " + std::to_string(m.version));
    }
    m.dimension = j.at("dimension").get<int>();
    m.tau_syn = j.at("tau_syn").get<double>();
    const auto& counts = j.at("counts");
    m.entity_count = counts.at("entities").get<size_t>();
    m.passage_count = counts.at("passages").get<size_t>();
    m.proposition_count = counts.at("propositions").get<size_t>();
    const auto& edges = counts.at("edges");
    m.clique_edges = edges.at("clique").get<size_t>();
    m.containment_edges = edges.at("containment").get<size_t>();
    m.synonymy_edges = edges.at("synonymy").get<size_t>();
    m.content_hash = j.at("content_hash").get<std::string>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.provider = j.at("provider").get<std::string>();
    m.built_at = j.at("built_at").get<std::string>();
    return m;
}

// ---------------------------------------------------------------------------
// Save / load
// ---------------------------------------------------------------------------

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

} // namespace detail

inline IndexManifest save_index(const PropositionGraph& g, const std::string& dir,
                                const IndexMetadata& meta) {
    std::filesystem::path root(dir);
    std::filesystem::create_directories(root);

    std::string jsonl = serialize_graph_jsonl(g);
    std::string bin = serialize_embeddings(g);

    IndexManifest m;
    m.dimension = g.dimension();
    m.tau_syn = g.tau_syn();
    m.entity_count = g.entity_count();
    m.passage_count = g.passage_count();
    m.proposition_count = g.proposition_count();
    m.clique_edges = g.edge_count(EdgeKind::clique);
    m.containment_edges = g.edge_count(EdgeKind::containment);
    m.synonymy_edges = g.edge_count(EdgeKind::synonymy);
    m.content_hash = content_hash(jsonl, bin);
    m.corpus_hash = meta.corpus_hash;
    m.provider = meta.provider;
    m.built_at = meta.built_at.empty() ? utc_timestamp() : meta.built_at;

    detail::write_file(root / "graph.jsonl", jsonl);
    detail::write_file(root / "embeddings.bin", bin);
    detail::write_file(root / "manifest.json", manifest_to_json(m).dump(2) + "\n");
    return m;
}

struct LoadedIndex {
    PropositionGraph graph;
    IndexManifest manifest;
};

inline LoadedIndex load_index(const std::string& dir) {
    std::filesystem::path root(dir);
    std::string jsonl = detail::read_file(root / "graph.jsonl");
    std::string bin = detail::read_file(root / "embeddings.bin");
    json mj = json::parse(detail::read_file(root / "manifest.json"), nullptr, false);
    if (mj.is_discarded()) throw DataError("manifest.json is not valid JSON");
    IndexManifest manifest = manifest_from_json(mj);

    if (content_hash(jsonl, bin) != manifest.content_hash) {
        throw DataError("index content hash mismatch (corrupt or edited artifacts)");
    }

    PropositionGraph::Parts parts;
    parts.tau_syn = manifest.tau_syn;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < jsonl.size()) {
        size_t end = jsonl.find('\n', pos);
        if (end == std::string::npos) end = jsonl.size();
        std::string_view line(jsonl.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("graph.jsonl:" + std::to_string(line_no) + ": malformed record");
        }
        if (j.value("v", 0) != 1) {
            throw DataError("graph.jsonl:" + std::to_string(line_no) + ": unsupported version");
        }
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "entity") {
            EntityNode e;
            e.id = j.at("id").get<std::string>();
            e.surface = j.at("surface").get<std::string>();
            for (const auto& s : j.at("source_passages")) {
                e.source_passages.push_back(s.get<std::string>());
            }
            parts.entities.push_back(std::move(e));
        } else if (kind == "passage") {
            PassageNode p;
            p.id = j.at("id").get<std::string>();
            p.text = j.at("text").get<std::string>();
            for (const auto& s : j.at("proposition_ids")) {
                p.proposition_ids.push_back(s.get<std::string>());
            }
            parts.passages.push_back(std::move(p));
        } else if (kind == "proposition") {
            Proposition p;
            p.id = j.at("id").get<std::string>();
            p.text = j.at("text").get<std::string>();
            for (const auto& s : j.at("entity_ids")) {
                p.entity_ids.push_back(s.get<std::string>());
            }
            p.passage_id = j.at("passage_id").get<std::string>();
            parts.propositions.push_back(std::move(p));
        } else if (kind == "edge") {
            PropositionGraph::Parts::EdgeRecord e;
            std::string ek = j.at("edge_kind").get<std::string>();
            if (ek == "clique") {
                e.kind = EdgeKind::clique;
            } else if (ek == "containment") {
                e.kind = EdgeKind::containment;
            } else if (ek == "synonymy") {
                e.kind = EdgeKind::synonymy;
            } else {
                throw DataError("graph.jsonl:" + std::to_string(line_no) +
                                ": unknown edge kind: " + ek);
            }
            e.a = j.at("a").get<std::string>();
            e.b = j.at("b").get<std::string>();
            e.weight = j.at("weight").get<double>();
            if (j.contains("clique_props")) {
                for (const auto& s : j["clique_props"]) {
                    e.clique_props.push_back(s.get<std::string>());
                }
            }
            parts.edges.push_back(std::move(e));
        } else {
            throw DataError("graph.jsonl:" + std::to_string(line_no) +
                            ": unknown record kind: " + kind);
        }
    }

    if (parts.entities.size() != manifest.entity_count ||
        parts.passages.size() != manifest.passage_count ||
        parts.propositions.size() != manifest.proposition_count) {
        throw DataError("graph.jsonl record counts disagree with manifest");
    }

    // Embedding rows follow the record order of graph.jsonl.
    if (bin.size() < 16 || bin.compare(0, 4, "PRPG") != 0) {
        throw DataError("embeddings.bin: bad magic");
    }
    uint32_t dim = detail::get_u32(bin, 4);
    uint32_t rows = detail::get_u32(bin, 8);
    size_t expected_rows =
        parts.entities.size() + parts.passages.size() + parts.propositions.size();
    if (dim != static_cast<uint32_t>(manifest.dimension) || rows != expected_rows) {
        throw DataError("embeddings.bin header disagrees with manifest");
    }
    if (bin.size() != 16 + static_cast<size_t>(rows) * dim * 4) {
        throw DataError("embeddings.bin truncated");
    }
    size_t off = 16;
    auto next_row = [&] {
        Embedding e(dim);
        for (uint32_t i = 0; i < dim; ++i) {
            e[i] = std::bit_cast<float>(detail::get_u32(bin, off));
            off += 4;
        }
        return e;
    };
    for (auto& e : parts.entities) e.embedding = next_row();
    for (auto& p : parts.passages) p.embedding = next_row();
    for (auto& p : parts.propositions) p.embedding = next_row();

    LoadedIndex out{PropositionGraph::from_parts(std::move(parts)), std::move(manifest)};
    if (out.graph.dimension() != out.manifest.dimension) {
        throw DataError("index dimension disagrees with manifest");
    }
    return out;
}

} // namespace proprag

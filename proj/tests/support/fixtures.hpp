#pragma once
// Shared test fixtures.
//
// - fixture_path/slurp: access to the files under fixtures/ (golden prompts,
//   mini corpus). The directory is injected by CTest via PROPRAG_FIXTURE_DIR.
// - SpecPassage/SpecProp: a declarative mini-corpus notation. build_world
//   pushes it through the real assembly path (extraction records + mock
//   embedding provider) so every test graph satisfies production invariants.
// - load_mini_world: the bundled 12-passage corpus with two planted
//   multi-hop chains (one over a shared entity, one over a synonym bridge).

#include "proprag/proprag.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace proprag::test {

inline std::string fixture_dir() {
    if (const char* env = std::getenv("PROPRAG_FIXTURE_DIR")) return env;
#ifdef PROPRAG_FIXTURE_DIR
    return PROPRAG_FIXTURE_DIR;
#else
    return "fixtures"; // ad hoc runs from the repository root
#endif
}

inline std::string fixture_path(const std::string& rel) {
    return fixture_dir() + "/" + rel;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fixture not readable: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// ---------------------------------------------------------------------------
// Declarative corpus worlds
// ---------------------------------------------------------------------------

struct SpecProp {
    std::string text;
    std::vector<std::string> entities;
};

struct SpecPassage {
    std::string id;
    std::string text;
    std::vector<SpecProp> props;
};

inline std::vector<CorpusPassage> to_corpus(const std::vector<SpecPassage>& world) {
    std::vector<CorpusPassage> out;
    out.reserve(world.size());
    for (const auto& p : world) out.push_back({p.id, p.text});
    return out;
}

inline std::vector<ExtractionRecord> to_records(const std::vector<SpecPassage>& world) {
    std::vector<ExtractionRecord> out;
    out.reserve(world.size());
    for (const auto& p : world) {
        ExtractionRecord rec;
        rec.passage_id = p.id;
        rec.provenance = {"fixture", "declarative test world"};
        for (const auto& sp : p.props) {
            PropositionDraft draft;
            draft.text = sp.text;
            for (const auto& surface : sp.entities) {
                std::string norm = normalize_entity(surface);
                draft.entities.push_back(norm);
                bool known = false;
                for (const auto& e : rec.entities) known = known || e == norm;
                if (!known) rec.entities.push_back(norm);
            }
            rec.propositions.push_back(std::move(draft));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline AssembledIndex build_world(const std::vector<SpecPassage>& world, double tau_syn = 0.8,
                                  int dimension = 256) {
    MockEmbeddingProvider provider(dimension);
    return assemble_index(to_corpus(world), to_records(world), provider, tau_syn);
}

// ---------------------------------------------------------------------------
// Bundled mini corpus
// ---------------------------------------------------------------------------

struct MiniWorld {
    std::vector<CorpusPassage> corpus;
    std::vector<ExtractionRecord> records;
    AssembledIndex index;
};

inline MiniWorld load_mini_world(double tau_syn = 0.8, int dimension = 256) {
    auto corpus = load_corpus(fixture_path("corpus/mini_corpus.jsonl"), /*strict=*/true);
    auto records = load_extraction_records(fixture_path("corpus/mini_records.jsonl"));
    MockEmbeddingProvider provider(dimension);
    auto index = assemble_index(corpus, records, provider, tau_syn);
    return MiniWorld{std::move(corpus), std::move(records), std::move(index)};
}

} // namespace proprag::test

#pragma once
// Corpus loading and offline index assembly: pair extraction records with
// their passages, mint proposition ids, embed every surface once, and build
// the graph. Proposition ids are "<passage id>::NNNN" with a zero-padded
// extraction ordinal, so sorting by id preserves extraction order.

#include "proprag/embedding.hpp"
#include "proprag/errors.hpp"
#include "proprag/extraction.hpp"
#include "proprag/graph.hpp"
#include "proprag/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace proprag {

// Corpus files are jsonl: {"id": ..., "text": ..., "title"?: ...}. A title
// is folded into the stored text ("<title>\n<text>"). Malformed lines are
// reported and skipped unless strict is set.
inline std::vector<CorpusPassage> load_corpus(const std::string& path, bool strict = false,
                                              std::ostream* diagnostics = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus: " + path);
    std::vector<CorpusPassage> out;
    std::set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    auto bad = [&](const std::string& why) {
        std::string msg = path + ":" + std::to_string(line_no) + ": " + why;
        if (strict) throw DataError(msg);
        if (diagnostics) *diagnostics << "warning: skipping " << msg << "\n";
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            bad("malformed JSON");
            continue;
        }
        if (!j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
            !j["text"].is_string()) {
            bad("missing id or text");
            continue;
        }
        CorpusPassage p;
        p.id = j["id"].get<std::string>();
        p.text = j["text"].get<std::string>();
        if (j.contains("title") && j["title"].is_string() &&
            !j["title"].get<std::string>().empty()) {
            p.text = j["title"].get<std::string>() + "\n" + p.text;
        }
        if (p.id.empty() || trim(p.text).empty()) {
            bad("empty id or text");
            continue;
        }
        if (!seen.insert(p.id).second) {
            bad("duplicate passage id: " + p.id);
            continue;
        }
        out.push_back(std::move(p));
    }
    if (out.empty()) throw DataError("corpus has no usable passages: " + path);
    return out;
}

inline std::string make_proposition_id(const std::string& passage_id, size_t ordinal) {
    if (ordinal >= 10000) {
        throw DataError("passage " + passage_id + " has too many propositions");
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04zu", ordinal);
    return passage_id + "::" + buf;
}

struct AssemblyStats {
    size_t passages = 0;
    size_t propositions = 0;
    size_t entities = 0;
    size_t embedded_texts = 0;
    std::vector<std::string> uncovered_passages; // corpus ids without records
};

struct AssembledIndex {
    PropositionGraph graph;
    AssemblyStats stats;
};

// Records drive the graph: a corpus passage without a record is skipped
// (and reported in stats), a record without a corpus passage is an error.
inline AssembledIndex assemble_index(const std::vector<CorpusPassage>& corpus,
                                     const std::vector<ExtractionRecord>& records,
                                     EmbeddingProvider& provider, double tau_syn) {
    if (records.empty()) throw DataError("assemble_index: no extraction records");
    std::map<std::string, const CorpusPassage*> by_id;
    for (const auto& p : corpus) by_id[p.id] = &p;

    std::set<std::string> covered;
    std::vector<PassageInput> passages;
    std::vector<PropositionInput> propositions;
    std::set<std::string> entity_ids;
    for (const auto& rec : records) {
        auto it = by_id.find(rec.passage_id);
        if (it == by_id.end()) {
            throw DataError("extraction record references unknown passage: " + rec.passage_id);
        }
        if (!covered.insert(rec.passage_id).second) {
            throw DataError("duplicate extraction record for passage: " + rec.passage_id);
        }
        if (rec.propositions.empty()) continue; // nothing to index for this passage
        passages.push_back({rec.passage_id, it->second->text, {}});
        for (size_t i = 0; i < rec.propositions.size(); ++i) {
            const auto& draft = rec.propositions[i];
            propositions.push_back({make_proposition_id(rec.passage_id, i), draft.text,
                                    draft.entities, rec.passage_id, {}});
            for (const auto& e : draft.entities) entity_ids.insert(e);
        }
    }
    if (passages.empty()) {
        throw DataError("assemble_index: no passage has extracted propositions");
    }

    AssemblyStats stats;
    for (const auto& p : corpus) {
        if (!covered.count(p.id)) stats.uncovered_passages.push_back(p.id);
    }

    // One deterministic embedding pass per surface family, document role.
    std::vector<std::string> entity_list(entity_ids.begin(), entity_ids.end());
    auto entity_vecs = provider.embed(entity_list, EmbedRole::document);
    std::map<std::string, Embedding> entity_embeddings;
    for (size_t i = 0; i < entity_list.size(); ++i) {
        entity_embeddings[entity_list[i]] = std::move(entity_vecs[i]);
    }
    {
        std::vector<std::string> texts;
        for (const auto& p : passages) texts.push_back(p.text);
        auto vecs = provider.embed(texts, EmbedRole::document);
        for (size_t i = 0; i < passages.size(); ++i) passages[i].embedding = std::move(vecs[i]);
    }
    {
        std::vector<std::string> texts;
        for (const auto& p : propositions) texts.push_back(p.text);
        auto vecs = provider.embed(texts, EmbedRole::document);
        for (size_t i = 0; i < propositions.size(); ++i) {
            propositions[i].embedding = std::move(vecs[i]);
        }
    }
    stats.embedded_texts = entity_list.size() + passages.size() + propositions.size();
    stats.passages = passages.size();
    stats.propositions = propositions.size();
    stats.entities = entity_list.size();

    return AssembledIndex{PropositionGraph::build(std::move(propositions), std::move(passages),
                                                  entity_embeddings, tau_syn),
                          std::move(stats)};
}

} // namespace proprag

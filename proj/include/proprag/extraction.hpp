#pragma once
// Offline knowledge extraction: two-stage prompting (entities first, then
// propositions restricted to those entities), response parsing into
// extraction records, and fixture-file IO so everything downstream is
// testable without an LLM endpoint.

#include "proprag/errors.hpp"
#include "proprag/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

namespace proprag {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

inline const std::string& entity_prompt_template() {
    static const std::string t =
        "Your task is to extract entities from the given paragraph.\n"
        "Respond with a JSON dictionary only, with a \"entities\" key that maps to an "
        "non-empty list of entities.\n"
        "All named entities and dates must be included in the list.\n"
        "All generic entities important to the theme of the passage must be included in the "
        "list.\n"
        "All entities that is involved in a predicate relation to the above entities must be "
        "included in the list.\n"
        "All dates must be included in the list.\n"
        "\n"
        "Example Paragraph:\n"
        "Radio City\n"
        "Radio City is India's first private FM radio station and was started on 3 July 2001.\n"
        "It plays Hindi, English and regional songs.\n"
        "Radio City recently forayed into New Media in May 2008 with the launch of a music "
        "portal\n"
        "- PlanetRadiocity.com that offers music related news, videos, songs, and other\n"
        "music-related features.\n"
        "\n"
        "Example Output:\n"
        "{\"entities\":\n"
        "    [\"Radio City\", \"India\", \"private FM radio station\", \"3 July 2001\", "
        "\"Hindi\",\n"
        "     \"English\", \"New Media\", \"May 2008\", \"PlanetRadiocity.com\", \"music "
        "portal\",\n"
        "     \"news\", \"videos\", \"songs\"]\n"
        "}\n"
        "\n"
        "Passage: ${passage}";
    return t;
}

inline const std::string& proposition_prompt_template() {
    static const std::string t =
        "Your task is to analyze text passages and break them down into precise, atomic "
        "propositions using a specified list of named entities. A proposition is a fully "
        "contextualized statement that expresses a single unit of meaning with complete "
        "specificity about the relationships described.\n"
        "\n"
        "For each proposition:\n"
        "1. Extract a complete, standalone statement that preserves the full context\n"
        "2. Use ONLY the entities provided in the named_entities list - do not introduce new "
        "entities\n"
        "3. Ensure each proposition contains only ONE claim or relationship\n"
        "4. Be extremely specific about which entities are involved in each relationship\n"
        "5. Maintain clear causal connections between related statements\n"
        "\n"
        "Respond with a JSON object containing a list of propositions, where each proposition "
        "is an object with:\n"
        "- \"text\": The full proposition text as a complete, contextualized statement\n"
        "- \"entities\": An array of entities from the named_entities list that appear in that "
        "proposition\n"
        "\n"
        "Critical Guidelines:\n"
        "- ONLY use entities from the provided named_entities list\n"
        "- Make relationships explicit and specific - clarify exactly which entities relate to "
        "which other entities\n"
        "- Clarify precisely which entity a modifier applies to (e.g., specify which product "
        "had \"80% improvement\")\n"
        "- Establish clear connections between related facts (e.g., \"Adobe optimized their "
        "applications FOR THE M1 CHIP\")\n"
        "- Connect comparative statements to their specific reference points (e.g., \"Adobe's "
        "applications on the M1 chip improved by 80% compared to Intel-based Macs\")\n"
        "- Preserve temporal information and causal relationships between events\n"
        "- Make each proposition stand alone with all necessary context\n"
        "- Include ALL relevant entities from the named_entities list in both the proposition "
        "text and entities array\n"
        "- Ensure the collection of propositions captures ALL meaningful information in the "
        "passage\n"
        "\n"
        "Demonstration:\n"
        "Passage: In 2020, after Apple launched the M1 chip, major software companies like "
        "Adobe optimized their applications, improving performance by up to 80% compared to "
        "Intel-based Macs.\n"
        "Named entities: [\"Apple\", \"M1 chip\", \"2020\", \"Adobe\", \"Adobe's "
        "applications\", \"Intel-based Macs\", \"80%\"]\n"
        "{\n"
        "  \"propositions\": [\n"
        "    {\n"
        "      \"text\": \"Apple launched the M1 chip in 2020.\",\n"
        "      \"entities\": [\"Apple\", \"M1 chip\", \"2020\"]\n"
        "    },\n"
        "    {\n"
        "      \"text\": \"Adobe optimized their applications specifically for the M1 chip "
        "after its launch.\",\n"
        "      \"entities\": [\"Adobe\", \"Adobe's applications\", \"M1 chip\"]\n"
        "    },\n"
        "    {\n"
        "      \"text\": \"Adobe's applications running on the M1 chip improved performance by "
        "up to 80% compared to Intel-based Macs.\",\n"
        "      \"entities\": [\"Adobe\", \"Adobe's applications\", \"M1 chip\", \"80%\", "
        "\"Intel-based Macs\"]\n"
        "    }\n"
        "  ]\n"
        "}\n"
        "\n"
        "Passage: ${passage}\n"
        "Named entities: ${entities_json_list}";
    return t;
}

// Replaces every occurrence of `slot` verbatim, no escaping.
inline std::string fill_slot(std::string tmpl, const std::string& slot,
                             const std::string& value) {
    size_t pos = 0;
    while ((pos = tmpl.find(slot, pos)) != std::string::npos) {
        tmpl.replace(pos, slot.size(), value);
        pos += value.size();
    }
    return tmpl;
}

inline std::string render_entity_prompt(const std::string& passage) {
    if (trim(passage).empty()) throw DataError("render_entity_prompt: empty passage");
    return fill_slot(entity_prompt_template(), "${passage}", passage);
}

inline std::string render_proposition_prompt(const std::string& passage,
                                             const std::vector<std::string>& entities) {
    if (entities.empty()) throw DataError("render_proposition_prompt: empty entity list");
    json list = json::array();
    for (const auto& e : entities) list.push_back(e);
    std::string out = fill_slot(proposition_prompt_template(), "${passage}", passage);
    return fill_slot(out, "${entities_json_list}", list.dump());
}

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

// First balanced JSON object in the text, tolerant of surrounding prose.
inline std::optional<std::string> extract_first_json_object(const std::string& raw) {
    size_t start = raw.find('{');
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < raw.size(); ++i) {
        char c = raw[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) return raw.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

inline std::string snippet(const std::string& s, size_t limit = 160) {
    if (s.size() <= limit) return s;
    return s.substr(0, limit) + "...";
}

// Oversized responses are rejected outright: a truncated object that still
// parses would corrupt the graph silently.
inline constexpr size_t kMaxResponseBytes = 1 << 20;

// Deduplicated, order-preserving, normalized entity list.
inline std::vector<std::string> parse_entity_response(const std::string& raw,
                                                      size_t max_bytes = kMaxResponseBytes) {
    if (raw.size() > max_bytes) {
        throw DataError("entity response exceeds " + std::to_string(max_bytes) + " bytes");
    }
    auto obj_text = extract_first_json_object(raw);
    if (!obj_text) {
        throw DataError("malformed entity response (no JSON object): " + snippet(raw));
    }
    json obj = json::parse(*obj_text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("entities") ||
        !obj["entities"].is_array()) {
        throw DataError("malformed entity response: " + snippet(raw));
    }
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& item : obj["entities"]) {
        if (!item.is_string()) {
            throw DataError("malformed entity response (non-string entity): " + snippet(raw));
        }
        std::string norm = normalize_entity(item.get<std::string>());
        if (norm.empty()) continue;
        if (seen.insert(norm).second) out.push_back(norm);
    }
    if (out.empty()) throw DataError("entity response contains no entities: " + snippet(raw));
    return out;
}

struct PropositionDraft {
    std::string text;
    std::vector<std::string> entities; // normalized
};

struct ParsedPropositions {
    std::vector<PropositionDraft> propositions;
    int dropped_propositions = 0; // empty text or empty entity list after filtering
    int removed_entities = 0;     // mentions outside the allowed list
};

inline ParsedPropositions parse_proposition_response(
    const std::string& raw, const std::vector<std::string>& allowed_entities,
    size_t max_bytes = kMaxResponseBytes) {
    if (allowed_entities.empty()) {
        throw DataError("parse_proposition_response: empty allowed-entity list");
    }
    if (raw.size() > max_bytes) {
        throw DataError("proposition response exceeds " + std::to_string(max_bytes) + " bytes");
    }
    auto obj_text = extract_first_json_object(raw);
    if (!obj_text) {
        throw DataError("malformed proposition response (no JSON object): " + snippet(raw));
    }
    json obj = json::parse(*obj_text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("propositions") ||
        !obj["propositions"].is_array()) {
        throw DataError("malformed proposition response: " + snippet(raw));
    }
    std::unordered_set<std::string> allowed;
    for (const auto& e : allowed_entities) allowed.insert(normalize_entity(e));

    ParsedPropositions out;
    for (const auto& item : obj["propositions"]) {
        if (!item.is_object() || !item.contains("text") || !item["text"].is_string() ||
            !item.contains("entities") || !item["entities"].is_array()) {
            ++out.dropped_propositions;
            continue;
        }
        PropositionDraft draft;
        draft.text = trim(item["text"].get<std::string>());
        if (draft.text.empty()) {
            ++out.dropped_propositions;
            continue;
        }
        std::unordered_set<std::string> seen;
        for (const auto& e : item["entities"]) {
            if (!e.is_string()) continue;
            std::string norm = normalize_entity(e.get<std::string>());
            if (norm.empty()) continue;
            if (!allowed.count(norm)) {
                ++out.removed_entities;
                continue;
            }
            if (seen.insert(norm).second) draft.entities.push_back(norm);
        }
        if (draft.entities.empty()) {
            ++out.dropped_propositions;
            continue;
        }
        out.propositions.push_back(std::move(draft));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extraction records
// ---------------------------------------------------------------------------

struct Provenance {
    std::string kind;   // "llm" | "fixture"
    std::string detail; // model name or fixture file
};

struct ExtractionRecord {
    std::string passage_id;
    std::vector<std::string> entities; // normalized, unique
    std::vector<PropositionDraft> propositions;
    Provenance provenance;
};

inline void validate_record(const ExtractionRecord& rec) {
    std::unordered_set<std::string> ents(rec.entities.begin(), rec.entities.end());
    if (ents.size() != rec.entities.size()) {
        throw DataError("record " + rec.passage_id + ": duplicate entities");
    }
    for (const auto& p : rec.propositions) {
        if (trim(p.text).empty()) {
            throw DataError("record " + rec.passage_id + ": proposition with empty text");
        }
        if (p.entities.empty()) {
            throw DataError("record " + rec.passage_id + ": proposition with no entities");
        }
        for (const auto& e : p.entities) {
            if (!ents.count(e)) {
                throw DataError("record " + rec.passage_id + ": proposition entity '" + e +
                                "' not in record entity list");
            }
        }
    }
}

inline json record_to_json(const ExtractionRecord& rec) {
    json props = json::array();
    for (const auto& p : rec.propositions) {
        props.push_back({{"text", p.text}, {"entities", p.entities}});
    }
    return json{{"passage_id", rec.passage_id},
                {"entities", rec.entities},
                {"propositions", props},
                {"provenance", {{"kind", rec.provenance.kind}, {"detail", rec.provenance.detail}}}};
}

inline ExtractionRecord record_from_json(const json& j, const std::string& fallback_source) {
    ExtractionRecord rec;
    rec.passage_id = j.at("passage_id").get<std::string>();
    for (const auto& e : j.at("entities")) rec.entities.push_back(e.get<std::string>());
    for (const auto& p : j.at("propositions")) {
        PropositionDraft d;
        d.text = p.at("text").get<std::string>();
        for (const auto& e : p.at("entities")) d.entities.push_back(e.get<std::string>());
        rec.propositions.push_back(std::move(d));
    }
    if (j.contains("provenance")) {
        rec.provenance.kind = j["provenance"].value("kind", "fixture");
        rec.provenance.detail = j["provenance"].value("detail", fallback_source);
    } else {
        rec.provenance = {"fixture", fallback_source};
    }
    validate_record(rec);
    return rec;
}

inline std::vector<ExtractionRecord> load_extraction_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open extraction records: " + path);
    std::vector<ExtractionRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw DataError("malformed record at " + path + ":" + std::to_string(line_no));
        }
        out.push_back(record_from_json(j, path));
    }
    std::sort(out.begin(), out.end(), [](const ExtractionRecord& a, const ExtractionRecord& b) {
        return a.passage_id < b.passage_id;
    });
    return out;
}

inline void save_extraction_records(const std::vector<ExtractionRecord>& records,
                                    const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write extraction records: " + path);
    for (const auto& rec : records) {
        out << record_to_json(rec).dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Corpus ingestion
// ---------------------------------------------------------------------------

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
    virtual std::string model_name() const = 0;
};

struct CorpusPassage {
    std::string id;
    std::string text;
};

struct IngestOptions {
    int max_retries = 2;
    int parallelism = 4;
};

struct IngestResult {
    std::vector<ExtractionRecord> records; // sorted by passage id
    std::vector<std::pair<std::string, std::string>> failures; // (passage id, error)
    int removed_entities = 0;
    int dropped_propositions = 0;
};

// Two calls per passage: entity extraction, then proposition extraction
// restricted to the extracted entities. Per-passage failures are retried up
// to the budget, then recorded; the build proceeds without them.
inline IngestResult ingest_corpus(const std::vector<CorpusPassage>& passages, LlmClient& client,
                                  const IngestOptions& options = {}) {
    if (passages.empty()) throw DataError("ingest_corpus: no passages");

    struct Slot {
        std::optional<ExtractionRecord> record;
        std::string error;
        bool provider_failure = false;
        int removed = 0;
        int dropped = 0;
    };
    std::vector<Slot> slots(passages.size());

    auto work_one = [&](size_t i) {
        const auto& passage = passages[i];
        int attempts = options.max_retries + 1;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            try {
                auto entities = parse_entity_response(
                    client.complete(render_entity_prompt(passage.text)));
                auto parsed = parse_proposition_response(
                    client.complete(render_proposition_prompt(passage.text, entities)),
                    entities);
                ExtractionRecord rec;
                rec.passage_id = passage.id;
                rec.entities = std::move(entities);
                rec.propositions = std::move(parsed.propositions);
                rec.provenance = {"llm", client.model_name()};
                validate_record(rec);
                slots[i].record = std::move(rec);
                slots[i].removed = parsed.removed_entities;
                slots[i].dropped = parsed.dropped_propositions;
                return;
            } catch (const ProviderError& e) {
                slots[i].error = e.what();
                slots[i].provider_failure = true;
            } catch (const Error& e) {
                slots[i].error = e.what();
            }
        }
    };

    int workers = std::max(1, std::min<int>(options.parallelism,
                                            static_cast<int>(passages.size())));
    if (workers == 1) {
        for (size_t i = 0; i < passages.size(); ++i) work_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= passages.size()) break;
                    work_one(i);
                }
            });
        }
        for (auto& t : threads) t.join();
    }

    IngestResult result;
    bool any_provider_failure = false;
    for (size_t i = 0; i < passages.size(); ++i) {
        if (slots[i].record) {
            result.records.push_back(std::move(*slots[i].record));
            result.removed_entities += slots[i].removed;
            result.dropped_propositions += slots[i].dropped;
        } else {
            result.failures.emplace_back(passages[i].id, slots[i].error);
            any_provider_failure |= slots[i].provider_failure;
        }
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const ExtractionRecord& a, const ExtractionRecord& b) {
                  return a.passage_id < b.passage_id;
              });
    std::sort(result.failures.begin(), result.failures.end());
    if (result.records.empty()) {
        if (any_provider_failure) {
            throw ProviderError("ingest_corpus: all passages failed extraction: " +
                                result.failures.front().second);
        }
        throw DataError("ingest_corpus: all passages failed extraction: " +
                        result.failures.front().second);
    }
    return result;
}

} // namespace proprag

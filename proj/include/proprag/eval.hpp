#pragma once
// Retrieval evaluation: Recall@k over gold passages, token-level answer F1
// with the usual QA normalization (lowercase, strip punctuation, drop
// articles, squeeze whitespace), and a harness that runs a query file
// against an index. Machine reports are timing-free so identical runs
// produce identical bytes; wall-clock only feeds the timeout flag and the
// human summary.

#include "proprag/errors.hpp"
#include "proprag/pipeline.hpp"
#include "proprag/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace proprag {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double recall_at_k(const std::vector<std::string>& ranked,
                          const std::vector<std::string>& gold, int k) {
    if (k < 1) throw DataError("recall_at_k: k must be >= 1");
    if (gold.empty()) throw DataError("recall_at_k: empty gold set");
    std::set<std::string> gold_set(gold.begin(), gold.end());
    size_t total = gold_set.size();
    size_t hits = 0;
    size_t limit = std::min(ranked.size(), static_cast<size_t>(k));
    for (size_t i = 0; i < limit; ++i) {
        if (gold_set.erase(ranked[i])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

inline std::string normalize_answer(const std::string& text) {
    std::string lowered = lowercase_ascii(text);
    std::string stripped;
    stripped.reserve(lowered.size());
    for (char c : lowered) {
        if (!is_ascii_punct(c)) stripped.push_back(c);
    }
    std::string out;
    for (const auto& tok : tokenize(stripped)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

inline double answer_f1(const std::string& predicted, const std::string& gold) {
    auto pred_tokens = tokenize(normalize_answer(predicted));
    auto gold_tokens = tokenize(normalize_answer(gold));
    if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
    if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;
    std::unordered_map<std::string, int> counts;
    for (const auto& t : gold_tokens) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred_tokens) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
    return 2.0 * precision * recall / (precision + recall);
}

inline double answer_f1_max(const std::string& predicted,
                            const std::vector<std::string>& golds) {
    if (golds.empty()) throw DataError("answer_f1_max: no gold answers");
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, answer_f1(predicted, g));
    return best;
}

// ---------------------------------------------------------------------------
// Query cases
// ---------------------------------------------------------------------------

struct QueryCase {
    std::string id;
    std::string question;
    std::vector<std::string> gold_passages;
    std::vector<std::string> gold_answers;
    std::optional<std::string> predicted; // externally produced answer, for F1
};

inline std::vector<QueryCase> load_query_cases(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open query file: " + path);
    std::vector<QueryCase> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw DataError("malformed query at " + path + ":" + std::to_string(line_no));
        }
        QueryCase c;
        c.id = j.at("id").get<std::string>();
        c.question = j.at("question").get<std::string>();
        if (j.contains("gold_passages")) {
            for (const auto& g : j["gold_passages"]) {
                c.gold_passages.push_back(g.get<std::string>());
            }
        }
        if (j.contains("gold_answers")) {
            for (const auto& g : j["gold_answers"]) {
                c.gold_answers.push_back(g.get<std::string>());
            }
        }
        if (j.contains("predicted")) c.predicted = j["predicted"].get<std::string>();
        if (trim(c.question).empty()) {
            throw DataError("empty question at " + path + ":" + std::to_string(line_no));
        }
        out.push_back(std::move(c));
    }
    if (out.empty()) throw DataError("query file has no cases: " + path);
    return out;
}

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::vector<int> recall_ks = {2, 5};
    int parallelism = 4;
    int timeout_ms = 30000; // post-hoc flag, queries are never killed
};

struct QueryOutcome {
    std::string id;
    std::vector<std::string> ranked; // top-k_out passages
    std::map<int, double> recall;    // k -> Recall@k
    std::optional<double> f1;
    double elapsed_ms = 0.0;
    bool timed_out = false;
    std::string error; // empty on success
};

struct EvalReport {
    std::vector<QueryOutcome> outcomes; // input order
    std::map<int, double> mean_recall;  // over cases with gold passages
    std::optional<double> mean_f1;      // over cases with predictions + golds
    int errors = 0;
    int timeouts = 0;
};

inline EvalReport run_eval(const PropositionGraph& graph, const std::vector<QueryCase>& cases,
                           EmbeddingProvider& provider, const RetrievalOptions& retrieval,
                           const EvalOptions& options = {}) {
    if (cases.empty()) throw DataError("run_eval: no query cases");
    for (int k : options.recall_ks) {
        if (k < 1) throw DataError("run_eval: recall k must be >= 1");
    }

    RetrievalOptions per_query = retrieval;
    int max_k = per_query.k_out;
    for (int k : options.recall_ks) max_k = std::max(max_k, k);
    per_query.k_out = max_k;

    EvalReport report;
    report.outcomes.resize(cases.size());

    auto work_one = [&](size_t i) {
        const QueryCase& c = cases[i];
        QueryOutcome& o = report.outcomes[i];
        o.id = c.id;
        auto start = std::chrono::steady_clock::now();
        try {
            auto result = retrieve(graph, c.question, provider, per_query);
            for (const auto& p : result.passages) o.ranked.push_back(p.id);
            if (!c.gold_passages.empty()) {
                for (int k : options.recall_ks) {
                    o.recall[k] = recall_at_k(o.ranked, c.gold_passages, k);
                }
            }
            if (c.predicted && !c.gold_answers.empty()) {
                o.f1 = answer_f1_max(*c.predicted, c.gold_answers);
            }
        } catch (const Error& e) {
            o.error = e.what();
        }
        auto end = std::chrono::steady_clock::now();
        o.elapsed_ms = std::chrono::duration<double, std::milli>(end - start).count();
        o.timed_out = o.elapsed_ms > static_cast<double>(options.timeout_ms);
    };

    int workers = std::max(1, std::min<int>(options.parallelism, static_cast<int>(cases.size())));
    if (workers == 1) {
        for (size_t i = 0; i < cases.size(); ++i) work_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= cases.size()) break;
                    work_one(i);
                }
            });
        }
        for (auto& t : threads) t.join();
    }

    std::map<int, double> recall_sum;
    std::map<int, int> recall_n;
    double f1_sum = 0.0;
    int f1_n = 0;
    for (const auto& o : report.outcomes) {
        if (!o.error.empty()) ++report.errors;
        if (o.timed_out) ++report.timeouts;
        for (const auto& [k, r] : o.recall) {
            recall_sum[k] += r;
            ++recall_n[k];
        }
        if (o.f1) {
            f1_sum += *o.f1;
            ++f1_n;
        }
    }
    for (const auto& [k, s] : recall_sum) report.mean_recall[k] = s / recall_n[k];
    if (f1_n > 0) report.mean_f1 = f1_sum / f1_n;
    return report;
}

// Timing-free machine report: one JSON line per query plus a summary line.
inline std::string report_to_jsonl(const EvalReport& report) {
    std::string out;
    for (const auto& o : report.outcomes) {
        json j{{"id", o.id}, {"ranked", o.ranked}};
        if (!o.recall.empty()) {
            json r = json::object();
            for (const auto& [k, v] : o.recall) r[std::to_string(k)] = v;
            j["recall"] = std::move(r);
        }
        if (o.f1) j["f1"] = *o.f1;
        if (!o.error.empty()) j["error"] = o.error;
        out += j.dump();
        out += '\n';
    }
    json summary{{"summary", true},
                 {"queries", report.outcomes.size()},
                 {"errors", report.errors}};
    if (!report.mean_recall.empty()) {
        json r = json::object();
        for (const auto& [k, v] : report.mean_recall) r[std::to_string(k)] = v;
        summary["mean_recall"] = std::move(r);
    }
    if (report.mean_f1) summary["mean_f1"] = *report.mean_f1;
    out += summary.dump();
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Parameter sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    int max_hops;
    int beam_width;
    std::map<int, double> mean_recall;
    int errors = 0;
};

struct SweepReport {
    std::vector<SweepRow> rows; // (max_hops asc, beam_width asc)
};

inline SweepReport run_sweep(const PropositionGraph& graph, const std::vector<QueryCase>& cases,
                             EmbeddingProvider& provider, const RetrievalOptions& base,
                             std::vector<int> hop_values, std::vector<int> width_values,
                             const EvalOptions& options = {}) {
    if (hop_values.empty()) hop_values = {base.beam.max_hops};
    if (width_values.empty()) width_values = {base.beam.beam_width};
    std::sort(hop_values.begin(), hop_values.end());
    std::sort(width_values.begin(), width_values.end());
    SweepReport report;
    for (int hops : hop_values) {
        for (int width : width_values) {
            RetrievalOptions opt = base;
            opt.beam.max_hops = hops;
            opt.beam.beam_width = width;
            auto eval = run_eval(graph, cases, provider, opt, options);
            report.rows.push_back({hops, width, eval.mean_recall, eval.errors});
        }
    }
    return report;
}

inline std::string sweep_to_jsonl(const SweepReport& report) {
    std::string out;
    for (const auto& row : report.rows) {
        json r = json::object();
        for (const auto& [k, v] : row.mean_recall) r[std::to_string(k)] = v;
        json j{{"max_hops", row.max_hops},
               {"beam_width", row.beam_width},
               {"mean_recall", std::move(r)},
               {"errors", row.errors}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace proprag

// proprag — proposition-graph retrieval over a text corpus.
//
//   extract   run LLM knowledge extraction over a corpus -> records file
//   index     build a graph index from a corpus + extraction records
//   query     retrieve passages for a question (optionally explained)
//   eval      score a query file against an index (Recall@k, answer F1)
//   stats     print index size figures
//
// Exit codes: 0 success, 1 usage error, 2 data/config error, 3 provider
// (embedding or LLM endpoint) error.

#include "proprag/proprag.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace proprag;

// Retrieval knobs shared by query and eval. Flag values override the config
// file only when explicitly given.
struct RetrievalFlags {
    int n_prop = 0;
    int n_entity = 0;
    int subgraph_passages = 0;
    int beam_width = 0;
    int max_hops = 0;
    int rescore_pool = 0;
    int jump_count = 0;
    bool no_graph_guidance = false;
    int explore_entities = 0;
    int explore_props = 0;
    int exploit_entities = 0;
    int exploit_paths = 0;
    double passage_reset = 0.0;
    std::string seed_mode;
    double damping_explore = 0.0;
    double damping_exploit = 0.0;
    double ppr_tolerance = 0.0;
    int ppr_max_iterations = 0;
    int k_out = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--n-prop", n_prop, "Propositions ranked against the query in stage one");
        cmd->add_option("--n-entity", n_entity, "Entity seed cap for the first walk");
        cmd->add_option("--subgraph-passages", subgraph_passages,
                        "Top passages kept for the working subgraph");
        cmd->add_option("--beam-width", beam_width, "Beam width for path search");
        cmd->add_option("--max-hops", max_hops, "Maximum path length in propositions");
        cmd->add_option("--rescore-pool", rescore_pool,
                        "Expansions exactly rescored per round");
        cmd->add_option("--jump-count", jump_count, "Fixed jump targets for path search");
        cmd->add_flag("--no-graph-guidance", no_graph_guidance,
                      "Expand paths to every proposition instead of entity bridges");
        cmd->add_option("--explore-entities", explore_entities,
                        "Entity seeds taken from the initial proposition ranking");
        cmd->add_option("--explore-props", explore_props,
                        "Propositions feeding the exploration seeds");
        cmd->add_option("--exploit-entities", exploit_entities,
                        "Entity seeds taken from path scores");
        cmd->add_option("--exploit-paths", exploit_paths,
                        "Paths contributing to entity scores");
        cmd->add_option("--passage-reset", passage_reset,
                        "Reset mass spread across retained passages");
        cmd->add_option("--seed-mode", seed_mode,
                        "both | exploration_only | exploitation_only");
        cmd->add_option("--damping-explore", damping_explore, "Stage-one walk damping");
        cmd->add_option("--damping-exploit", damping_exploit, "Stage-two walk damping");
        cmd->add_option("--ppr-tolerance", ppr_tolerance, "Walk convergence tolerance");
        cmd->add_option("--ppr-max-iterations", ppr_max_iterations, "Walk iteration cap");
        cmd->add_option("-k,--k", k_out, "Passages returned per query");
    }

    void apply(const CLI::App* cmd, RetrievalOptions& r) const {
        if (cmd->count("--n-prop")) r.n_prop = n_prop;
        if (cmd->count("--n-entity")) r.n_entity = n_entity;
        if (cmd->count("--subgraph-passages")) r.subgraph_passages = subgraph_passages;
        if (cmd->count("--beam-width")) r.beam.beam_width = beam_width;
        if (cmd->count("--max-hops")) r.beam.max_hops = max_hops;
        if (cmd->count("--rescore-pool")) r.beam.rescore_pool = rescore_pool;
        if (cmd->count("--jump-count")) r.beam.jump_count = jump_count;
        if (cmd->count("--no-graph-guidance")) r.beam.graph_guidance = false;
        if (cmd->count("--explore-entities")) r.explore_entities = explore_entities;
        if (cmd->count("--explore-props")) r.explore_props = explore_props;
        if (cmd->count("--exploit-entities")) r.exploit_entities = exploit_entities;
        if (cmd->count("--exploit-paths")) r.exploit_paths = exploit_paths;
        if (cmd->count("--passage-reset")) r.passage_reset = passage_reset;
        if (cmd->count("--seed-mode")) r.seed_mode = parse_seed_mode(seed_mode);
        if (cmd->count("--damping-explore")) r.damping_explore = damping_explore;
        if (cmd->count("--damping-exploit")) r.damping_exploit = damping_exploit;
        if (cmd->count("--ppr-tolerance")) r.ppr_tolerance = ppr_tolerance;
        if (cmd->count("--ppr-max-iterations")) r.ppr_max_iterations = ppr_max_iterations;
        if (cmd->count("--k")) r.k_out = k_out;
    }
};

RunConfig base_config(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return load_run_config(config_path);
}

std::string clip(const std::string& text, size_t limit = 120) {
    std::string flat = collapse_whitespace(text);
    if (flat.size() <= limit) return flat;
    return flat.substr(0, limit) + "...";
}

json scored_pairs(const std::vector<std::pair<std::string, double>>& items) {
    json out = json::array();
    for (const auto& [id, s] : items) out.push_back(json::array({id, s}));
    return out;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string corpus;
    std::string out;
    std::string model = "gpt-4o-mini";
    int parallelism = 4;
    int max_retries = 2;
    int timeout_ms = 60000;
    bool strict = false;
};

int run_extract(const ExtractArgs& args) {
    auto corpus = load_corpus(args.corpus, args.strict, &std::cerr);
    LlmConfig llm;
    llm.model = args.model;
    llm.timeout_ms = args.timeout_ms;
    llm.max_retries = args.max_retries;
    auto client = make_llm_client(llm);
    IngestOptions opts;
    opts.max_retries = args.max_retries;
    opts.parallelism = args.parallelism;
    auto result = ingest_corpus(corpus, *client, opts);
    save_extraction_records(result.records, args.out);
    size_t props = 0;
    for (const auto& r : result.records) props += r.propositions.size();
    std::cout << "extracted " << result.records.size() << " passages, " << props
              << " propositions -> " << args.out << "\n";
    if (result.removed_entities || result.dropped_propositions) {
        std::cout << "filtered: " << result.removed_entities << " off-list entity mentions, "
                  << result.dropped_propositions << " unusable propositions\n";
    }
    for (const auto& [id, err] : result.failures) {
        std::cerr << "failed " << id << ": " << err << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// index
// ---------------------------------------------------------------------------

struct IndexArgs {
    std::string corpus;
    std::string records;
    std::string out;
    std::string config_path;
    bool strict = false;
    double tau_syn = 0.0;     // 0 = not set
    std::string provider;     // empty = not set
    int dimension = 0;        // 0 = not set
};

int run_index(const IndexArgs& args) {
    RunConfig cfg = base_config(args.config_path);
    if (args.tau_syn > 0.0) cfg.tau_syn = args.tau_syn;
    if (!args.provider.empty()) cfg.provider.kind = args.provider;
    if (args.dimension > 0) cfg.provider.dimension = args.dimension;

    auto corpus = load_corpus(args.corpus, args.strict, &std::cerr);
    auto records = load_extraction_records(args.records);
    auto provider = make_embedding_provider(cfg.provider);
    auto assembled = assemble_index(corpus, records, *provider, cfg.tau_syn);

    IndexMetadata meta;
    meta.provider = provider->fingerprint();
    meta.corpus_hash = hash_corpus(corpus);
    auto manifest = save_index(assembled.graph, args.out, meta);

    std::cout << "indexed " << manifest.passage_count << " passages, "
              << manifest.proposition_count << " propositions, " << manifest.entity_count
              << " entities -> " << args.out << "\n";
    std::cout << "edges: " << manifest.clique_edges << " clique, " << manifest.containment_edges
              << " containment, " << manifest.synonymy_edges << " synonymy\n";
    if (!assembled.stats.uncovered_passages.empty()) {
        std::cerr << "warning: " << assembled.stats.uncovered_passages.size()
                  << " corpus passages have no extraction record and were skipped\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// query
// ---------------------------------------------------------------------------

struct QueryArgs {
    std::string index;
    std::string question;
    std::string batch;
    std::string config_path;
    bool explain = false;
    bool dump_scores = false;
    bool show_text = false;
};

void print_paths(const PropositionGraph& g, const BeamResult& beam) {
    std::cout << "reasoning paths:\n";
    int rank = 0;
    for (const auto& path : beam.paths) {
        ++rank;
        std::printf("path %d  score %.6f\n", rank, path.score);
        for (size_t i = 0; i < path.proposition_ids.size(); ++i) {
            const auto& pid = path.proposition_ids[i];
            auto idx = g.find_proposition(pid);
            std::cout << "  [" << pid << "] "
                      << (idx ? clip(g.proposition(*idx).text) : std::string("?")) << "\n";
            if (i + 1 < path.proposition_ids.size()) {
                const auto& conn = path.connections[i];
                switch (conn.kind) {
                    case ConnectionKind::exact:
                        std::cout << "      via entity link: \"" << conn.entity_a << "\"\n";
                        break;
                    case ConnectionKind::synonymous:
                        std::cout << "      via synonym link: \"" << conn.entity_a << "\" -> \""
                                  << conn.entity_b << "\"\n";
                        break;
                    case ConnectionKind::jump:
                        std::cout << "      (jump)\n";
                        break;
                }
            }
        }
    }
}

json dump_diagnostics(const RetrievalResult& r) {
    json seeds1 = json::object();
    for (const auto& [id, w] : r.stage1.seeds.entries()) seeds1[id] = w;
    json seeds2 = json::object();
    for (const auto& [id, w] : r.stage2.seeds.entries()) seeds2[id] = w;
    json entity_scores = json::object();
    for (const auto& [id, s] : r.stage2.entity_scores) entity_scores[id] = s;
    json paths = json::array();
    for (const auto& p : r.stage2.beam.paths) {
        json conns = json::array();
        for (const auto& c : p.connections) {
            conns.push_back({{"kind", connection_kind_name(c.kind)},
                             {"entity_a", c.entity_a},
                             {"entity_b", c.entity_b}});
        }
        paths.push_back({{"propositions", p.proposition_ids},
                         {"connections", std::move(conns)},
                         {"score", p.score}});
    }
    json ranking = json::array();
    for (const auto& p : r.stage2.ranking) ranking.push_back(json::array({p.id, p.score}));
    return json{
        {"stage1",
         {{"iterations", r.stage1.ppr.iterations},
          {"converged", r.stage1.ppr.converged},
          {"seeds", std::move(seeds1)},
          {"top_propositions", scored_pairs(r.stage1.top_propositions)},
          {"top_passages", r.stage1.top_passages}}},
        {"stage2",
         {{"iterations", r.stage2.ppr.iterations},
          {"converged", r.stage2.ppr.converged},
          {"seeds", std::move(seeds2)},
          {"entity_scores", std::move(entity_scores)},
          {"jump_points", r.stage2.beam.jump_points},
          {"paths", std::move(paths)},
          {"ranking", std::move(ranking)}}}};
}

int run_query(const QueryArgs& args, const RetrievalFlags& flags, const CLI::App* cmd) {
    RunConfig cfg = base_config(args.config_path);
    flags.apply(cmd, cfg.retrieval);

    auto loaded = load_index(args.index);
    auto provider = provider_from_fingerprint(loaded.manifest.provider, cfg.provider);

    if (!args.batch.empty()) {
        if (!args.question.empty()) {
            throw DataError("give either a question or --batch, not both");
        }
        std::ifstream in(args.batch);
        if (!in) throw DataError("cannot open batch file: " + args.batch);
        std::string line;
        while (std::getline(in, line)) {
            std::string q = trim(line);
            if (q.empty()) continue;
            json out{{"question", q}};
            try {
                auto result = retrieve(loaded.graph, q, *provider, cfg.retrieval);
                json passages = json::array();
                for (const auto& p : result.passages) {
                    passages.push_back(json::array({p.id, p.score}));
                }
                out["passages"] = std::move(passages);
            } catch (const Error& e) {
                out["error"] = e.what();
            }
            std::cout << out.dump() << "\n";
        }
        return 0;
    }

    if (args.question.empty()) throw DataError("no question given (or use --batch)");
    auto result = retrieve(loaded.graph, args.question, *provider, cfg.retrieval);

    int rank = 0;
    for (const auto& p : result.passages) {
        std::printf("%2d  %-24s  %.6f\n", ++rank, p.id.c_str(), p.score);
        if (args.show_text) {
            auto idx = loaded.graph.find_passage(p.id);
            if (idx) std::cout << "      " << clip(loaded.graph.passage(*idx).text) << "\n";
        }
    }
    if (args.explain) print_paths(loaded.graph, result.stage2.beam);
    if (args.dump_scores) std::cout << dump_diagnostics(result).dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string index;
    std::string queries;
    std::string report;
    std::string config_path;
    std::vector<int> recall_ks;
    int parallelism = 4;
    int timeout_ms = 30000;
    std::vector<int> sweep_hops;
    std::vector<int> sweep_widths;
};

int run_eval_cmd(const EvalArgs& args, const RetrievalFlags& flags, const CLI::App* cmd) {
    RunConfig cfg = base_config(args.config_path);
    flags.apply(cmd, cfg.retrieval);

    auto loaded = load_index(args.index);
    auto provider = provider_from_fingerprint(loaded.manifest.provider, cfg.provider);
    auto cases = load_query_cases(args.queries);

    EvalOptions opts;
    if (!args.recall_ks.empty()) opts.recall_ks = args.recall_ks;
    opts.parallelism = args.parallelism;
    opts.timeout_ms = args.timeout_ms;

    std::string report_bytes;
    if (!args.sweep_hops.empty() || !args.sweep_widths.empty()) {
        auto sweep = run_sweep(loaded.graph, cases, *provider, cfg.retrieval, args.sweep_hops,
                               args.sweep_widths, opts);
        std::printf("%-10s %-12s %s\n", "max_hops", "beam_width", "mean recall");
        for (const auto& row : sweep.rows) {
            std::string recalls;
            for (const auto& [k, v] : row.mean_recall) {
                char buf[48];
                std::snprintf(buf, sizeof(buf), "@%d %.4f  ", k, v);
                recalls += buf;
            }
            std::printf("%-10d %-12d %s\n", row.max_hops, row.beam_width, recalls.c_str());
        }
        report_bytes = sweep_to_jsonl(sweep);
    } else {
        auto report = run_eval(loaded.graph, cases, *provider, cfg.retrieval, opts);
        std::cout << "queries: " << report.outcomes.size() << "   errors: " << report.errors
                  << "   timeouts: " << report.timeouts << "\n";
        for (const auto& [k, v] : report.mean_recall) {
            std::printf("Recall@%-2d  %.4f\n", k, v);
        }
        if (report.mean_f1) {
            int n = 0;
            for (const auto& o : report.outcomes) {
                if (o.f1) ++n;
            }
            std::printf("Answer F1  %.4f  (%d answered cases)\n", *report.mean_f1, n);
        }
        for (const auto& o : report.outcomes) {
            if (!o.error.empty()) std::cerr << "error " << o.id << ": " << o.error << "\n";
        }
        report_bytes = report_to_jsonl(report);
    }
    if (!args.report.empty()) {
        std::ofstream out(args.report, std::ios::binary);
        if (!out) throw DataError("cannot write report: " + args.report);
        out << report_bytes;
        std::cout << "report -> " << args.report << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int run_stats(const std::string& index_dir) {
    auto loaded = load_index(index_dir);
    const auto& m = loaded.manifest;
    std::printf("# Propositions    %zu\n", m.proposition_count);
    std::printf("# Passage Nodes   %zu\n", m.passage_count);
    std::printf("# Entity Nodes    %zu\n", m.entity_count);
    std::printf("# Total Edges     %zu\n",
                m.clique_edges + m.containment_edges + m.synonymy_edges);
    std::printf("Edges by kind     clique %zu / containment %zu / synonymy %zu\n",
                m.clique_edges, m.containment_edges, m.synonymy_edges);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"proposition-graph retrieval"};
    app.require_subcommand(1);

    ExtractArgs extract_args;
    auto* extract_cmd =
        app.add_subcommand("extract", "Run LLM knowledge extraction over a corpus");
    extract_cmd->add_option("--corpus", extract_args.corpus, "Corpus jsonl file")
        ->required()
        ->check(CLI::ExistingFile);
    extract_cmd->add_option("--out", extract_args.out, "Extraction records output (jsonl)")
        ->required();
    extract_cmd->add_option("--model", extract_args.model, "Model name sent to the endpoint");
    extract_cmd->add_option("--parallelism", extract_args.parallelism, "Concurrent passages");
    extract_cmd->add_option("--max-retries", extract_args.max_retries, "Retries per passage");
    extract_cmd->add_option("--timeout-ms", extract_args.timeout_ms, "Per-call timeout");
    extract_cmd->add_flag("--strict", extract_args.strict,
                          "Fail on malformed corpus lines instead of skipping");

    IndexArgs index_args;
    auto* index_cmd = app.add_subcommand("index", "Build a graph index");
    index_cmd->add_option("--corpus", index_args.corpus, "Corpus jsonl file")
        ->required()
        ->check(CLI::ExistingFile);
    index_cmd->add_option("--records", index_args.records, "Extraction records jsonl")
        ->required()
        ->check(CLI::ExistingFile);
    index_cmd->add_option("--out", index_args.out, "Index directory")->required();
    index_cmd->add_option("--config", index_args.config_path, "Run config JSON")
        ->check(CLI::ExistingFile);
    index_cmd->add_option("--tau-syn", index_args.tau_syn, "Synonymy similarity threshold");
    index_cmd->add_option("--provider", index_args.provider, "Embedding provider: mock | remote");
    index_cmd->add_option("--dimension", index_args.dimension, "Embedding dimension");
    index_cmd->add_flag("--strict", index_args.strict,
                        "Fail on malformed corpus lines instead of skipping");

    QueryArgs query_args;
    RetrievalFlags query_flags;
    auto* query_cmd = app.add_subcommand("query", "Retrieve passages for a question");
    query_cmd->add_option("--index", query_args.index, "Index directory")->required();
    query_cmd->add_option("question", query_args.question, "The question to answer");
    query_cmd->add_option("--batch", query_args.batch, "File with one question per line")
        ->check(CLI::ExistingFile);
    query_cmd->add_option("--config", query_args.config_path, "Run config JSON")
        ->check(CLI::ExistingFile);
    query_cmd->add_flag("--explain", query_args.explain, "Print the reasoning paths");
    query_cmd->add_flag("--dump-scores", query_args.dump_scores,
                        "Print stage diagnostics as JSON");
    query_cmd->add_flag("--show-text", query_args.show_text, "Print passage text snippets");
    query_flags.attach(query_cmd);

    EvalArgs eval_args;
    RetrievalFlags eval_flags;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate retrieval against a query file");
    eval_cmd->add_option("--index", eval_args.index, "Index directory")->required();
    eval_cmd->add_option("--queries", eval_args.queries, "Query cases jsonl")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", eval_args.report, "Write a machine report (jsonl)");
    eval_cmd->add_option("--config", eval_args.config_path, "Run config JSON")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--recall-k", eval_args.recall_ks, "Recall cutoffs")
        ->delimiter(',');
    eval_cmd->add_option("--parallelism", eval_args.parallelism, "Concurrent queries");
    eval_cmd->add_option("--timeout-ms", eval_args.timeout_ms,
                         "Per-query latency budget (flagged, not killed)");
    eval_cmd->add_option("--sweep-hops", eval_args.sweep_hops, "Sweep over max hop counts")
        ->delimiter(',');
    eval_cmd->add_option("--sweep-width", eval_args.sweep_widths, "Sweep over beam widths")
        ->delimiter(',');
    eval_flags.attach(eval_cmd);

    std::string stats_index;
    auto* stats_cmd = app.add_subcommand("stats", "Print index size figures");
    stats_cmd->add_option("--index", stats_index, "Index directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (extract_cmd->parsed()) return run_extract(extract_args);
        if (index_cmd->parsed()) return run_index(index_args);
        if (query_cmd->parsed()) return run_query(query_args, query_flags, query_cmd);
        if (eval_cmd->parsed()) return run_eval_cmd(eval_args, eval_flags, eval_cmd);
        if (stats_cmd->parsed()) return run_stats(stats_index);
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

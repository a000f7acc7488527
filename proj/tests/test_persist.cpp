// Index persistence: canonical bytes, content hashing, load-time validation.

#include <catch2/catch_amalgamated.hpp>

#include "support/env.hpp"
#include "support/oracles.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace proprag;
using namespace proprag::test;
using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;

fs::path make_temp_dir() {
    static std::atomic<int> counter{0};
    fs::path p = fs::temp_directory_path() /
                 ("proprag_persist_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter.fetch_add(1)));
    fs::create_directories(p);
    return p;
}

void write_bytes(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

uint32_t read_u32(const std::string& in, size_t pos) {
    return static_cast<uint32_t>(static_cast<unsigned char>(in[pos])) |
           static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 1])) << 8 |
           static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 2])) << 16 |
           static_cast<uint32_t>(static_cast<unsigned char>(in[pos + 3])) << 24;
}

PropositionGraph test_graph() {
    RandomWorldOptions o;
    o.seed = 9;
    o.passages = 6;
    return build_world(random_world(o), 0.8, 64).graph;
}

IndexMetadata test_meta() {
    return {"mock/64", "fnv1a64:0123456789abcdef", "2026-01-01T00:00:00Z"};
}

// Rewrites the manifest's content hash to match (possibly tampered) artifacts,
// so load-time checks beyond the hash gate become reachable.
void reseal(const fs::path& dir) {
    std::string jsonl = slurp((dir / "graph.jsonl").string());
    std::string bin = slurp((dir / "embeddings.bin").string());
    auto mj = nlohmann::json::parse(slurp((dir / "manifest.json").string()));
    mj["content_hash"] = content_hash(jsonl, bin);
    write_bytes(dir / "manifest.json", mj.dump(2) + "\n");
}

struct SavedIndex {
    fs::path dir;
    IndexManifest manifest;
};

SavedIndex save_test_index() {
    SavedIndex out;
    out.dir = make_temp_dir();
    out.manifest = save_index(test_graph(), out.dir.string(), test_meta());
    return out;
}

} // namespace

TEST_CASE("saving the same graph twice is byte-identical", "[persist]") {
    PropositionGraph g = test_graph();
    fs::path d1 = make_temp_dir();
    fs::path d2 = make_temp_dir();
    save_index(g, d1.string(), test_meta());
    save_index(g, d2.string(), test_meta());
    for (const char* name : {"graph.jsonl", "embeddings.bin", "manifest.json"}) {
        CHECK(slurp((d1 / name).string()) == slurp((d2 / name).string()));
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("save then load reproduces the graph exactly", "[persist]") {
    PropositionGraph g = test_graph();
    fs::path dir = make_temp_dir();
    IndexManifest manifest = save_index(g, dir.string(), test_meta());

    LoadedIndex loaded = load_index(dir.string());
    const PropositionGraph& h = loaded.graph;

    REQUIRE(h.entity_count() == g.entity_count());
    REQUIRE(h.passage_count() == g.passage_count());
    REQUIRE(h.proposition_count() == g.proposition_count());
    REQUIRE(h.edge_count() == g.edge_count());
    CHECK(h.dimension() == g.dimension());
    CHECK(h.tau_syn() == g.tau_syn());

    for (size_t i = 0; i < g.entity_count(); ++i) {
        CHECK(h.entity(static_cast<uint32_t>(i)).id == g.entity(static_cast<uint32_t>(i)).id);
        CHECK(h.entity(static_cast<uint32_t>(i)).embedding ==
              g.entity(static_cast<uint32_t>(i)).embedding);
        CHECK(h.entity(static_cast<uint32_t>(i)).source_passages ==
              g.entity(static_cast<uint32_t>(i)).source_passages);
    }
    for (size_t i = 0; i < g.passage_count(); ++i) {
        CHECK(h.passage(static_cast<uint32_t>(i)).text ==
              g.passage(static_cast<uint32_t>(i)).text);
        CHECK(h.passage(static_cast<uint32_t>(i)).embedding ==
              g.passage(static_cast<uint32_t>(i)).embedding);
        CHECK(h.passage(static_cast<uint32_t>(i)).proposition_ids ==
              g.passage(static_cast<uint32_t>(i)).proposition_ids);
    }
    for (size_t i = 0; i < g.proposition_count(); ++i) {
        const auto& a = g.proposition(static_cast<uint32_t>(i));
        const auto& b = h.proposition(static_cast<uint32_t>(i));
        CHECK(a.id == b.id);
        CHECK(a.text == b.text);
        CHECK(a.entity_ids == b.entity_ids);
        CHECK(a.passage_id == b.passage_id);
        CHECK(a.embedding == b.embedding);
    }
    for (size_t i = 0; i < g.edge_count(); ++i) {
        CHECK(h.edges()[i].kind == g.edges()[i].kind);
        CHECK(h.edges()[i].a == g.edges()[i].a);
        CHECK(h.edges()[i].b == g.edges()[i].b);
        CHECK(h.edges()[i].weight == g.edges()[i].weight);
        CHECK(h.edges()[i].clique_props == g.edges()[i].clique_props);
    }

    CHECK(loaded.manifest.content_hash == manifest.content_hash);
    CHECK(loaded.manifest.provider == "mock/64");
    CHECK(loaded.manifest.built_at == "2026-01-01T00:00:00Z");

    // Saving the loaded graph again reproduces the original bytes.
    fs::path again = make_temp_dir();
    save_index(h, again.string(), test_meta());
    for (const char* name : {"graph.jsonl", "embeddings.bin", "manifest.json"}) {
        CHECK(slurp((again / name).string()) == slurp((dir / name).string()));
    }
    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST_CASE("corrupted artifacts fail the content hash gate", "[persist]") {
    SavedIndex idx = save_test_index();

    SECTION("flipped byte in graph.jsonl") {
        std::string jsonl = slurp((idx.dir / "graph.jsonl").string());
        jsonl[jsonl.size() / 2] ^= 0x20;
        write_bytes(idx.dir / "graph.jsonl", jsonl);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("hash mismatch"));
    }
    SECTION("flipped byte in embeddings.bin") {
        std::string bin = slurp((idx.dir / "embeddings.bin").string());
        bin[bin.size() - 1] ^= 0x01;
        write_bytes(idx.dir / "embeddings.bin", bin);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("hash mismatch"));
    }
    fs::remove_all(idx.dir);
}

TEST_CASE("load validates manifest and artifact shape", "[persist]") {
    SavedIndex idx = save_test_index();
    auto manifest_json = [&]() {
        return nlohmann::json::parse(slurp((idx.dir / "manifest.json").string()));
    };

    SECTION("missing artifact") {
        fs::remove(idx.dir / "embeddings.bin");
        CHECK_THROWS_AS(load_index(idx.dir.string()), DataError);
    }
    SECTION("manifest not JSON") {
        write_bytes(idx.dir / "manifest.json", "not json at all\n");
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("not valid JSON"));
    }
    SECTION("unsupported manifest version") {
        auto mj = manifest_json();
        mj["version"] = 2;
        write_bytes(idx.dir / "manifest.json", mj.dump(2) + "\n");
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("unsupported version"));
    }
    SECTION("record counts disagree with manifest") {
        auto mj = manifest_json();
        mj["counts"]["entities"] = mj["counts"]["entities"].get<int>() + 1;
        write_bytes(idx.dir / "manifest.json", mj.dump(2) + "\n");
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("record counts disagree"));
    }
    SECTION("dimension disagrees with embedding header") {
        auto mj = manifest_json();
        mj["dimension"] = mj["dimension"].get<int>() + 1;
        write_bytes(idx.dir / "manifest.json", mj.dump(2) + "\n");
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("header disagrees"));
    }
    SECTION("bad magic") {
        std::string bin = slurp((idx.dir / "embeddings.bin").string());
        bin[0] = 'X';
        write_bytes(idx.dir / "embeddings.bin", bin);
        reseal(idx.dir);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("bad magic"));
    }
    SECTION("row count tampered in header") {
        std::string bin = slurp((idx.dir / "embeddings.bin").string());
        uint32_t rows = read_u32(bin, 8);
        bin[8] = static_cast<char>((rows + 1) & 0xff);
        write_bytes(idx.dir / "embeddings.bin", bin);
        reseal(idx.dir);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("header disagrees"));
    }
    SECTION("truncated embedding payload") {
        std::string bin = slurp((idx.dir / "embeddings.bin").string());
        bin.resize(bin.size() - 4);
        write_bytes(idx.dir / "embeddings.bin", bin);
        reseal(idx.dir);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("truncated"));
    }
    SECTION("malformed graph record") {
        std::string jsonl = slurp((idx.dir / "graph.jsonl").string());
        jsonl.replace(0, 1, "{nope ");
        write_bytes(idx.dir / "graph.jsonl", jsonl);
        reseal(idx.dir);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("malformed record"));
    }
    SECTION("unsupported record version") {
        std::string jsonl = slurp((idx.dir / "graph.jsonl").string());
        size_t eol = jsonl.find('\n');
        auto first = nlohmann::json::parse(jsonl.substr(0, eol));
        first["v"] = 2;
        jsonl = first.dump() + jsonl.substr(eol);
        write_bytes(idx.dir / "graph.jsonl", jsonl);
        reseal(idx.dir);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("unsupported version"));
    }
    SECTION("unknown record kind") {
        std::string jsonl = slurp((idx.dir / "graph.jsonl").string());
        jsonl += "{\"kind\":\"widget\",\"v\":1}\n";
        write_bytes(idx.dir / "graph.jsonl", jsonl);
        reseal(idx.dir);
        CHECK_THROWS_WITH(load_index(idx.dir.string()),
                          ContainsSubstring("unknown record kind"));
    }
    fs::remove_all(idx.dir);
}

TEST_CASE("embeddings serialization uses the documented layout", "[persist]") {
    PropositionGraph g = test_graph();
    std::string bin = serialize_embeddings(g);
    REQUIRE(bin.size() >= 16);
    CHECK(bin.compare(0, 4, "PRPG") == 0);
    uint32_t dim = read_u32(bin, 4);
    uint32_t rows = read_u32(bin, 8);
    CHECK(dim == static_cast<uint32_t>(g.dimension()));
    CHECK(rows == g.entity_count() + g.passage_count() + g.proposition_count());
    CHECK(read_u32(bin, 12) == 0);
    CHECK(bin.size() == 16 + static_cast<size_t>(rows) * dim * 4);

    // First row is the first entity, little-endian floats in order.
    const Embedding& first = g.entity(0).embedding;
    for (size_t i = 0; i < 4; ++i) {
        uint32_t raw = read_u32(bin, 16 + i * 4);
        float f;
        static_assert(sizeof(f) == sizeof(raw));
        std::memcpy(&f, &raw, sizeof(f));
        CHECK(f == first[i]);
    }
}

TEST_CASE("content hash chains the two artifacts", "[persist]") {
    std::string jsonl = "{\"kind\":\"entity\"}\n";
    std::string bin = "PRPGxxxx";
    uint64_t expected = fnv1a64(bin, fnv1a64(jsonl));
    CHECK(content_hash(jsonl, bin) == "fnv1a64:" + to_hex(expected));
    // Order matters.
    CHECK(content_hash(jsonl, bin) != content_hash(bin, jsonl));
}

TEST_CASE("corpus hash separates ids from text", "[persist]") {
    std::vector<CorpusPassage> a = {{"ab", "c"}};
    std::vector<CorpusPassage> b = {{"a", "bc"}};
    CHECK(hash_corpus(a) != hash_corpus(b));

    std::vector<CorpusPassage> two = {{"p1", "first"}, {"p2", "second"}};
    std::vector<CorpusPassage> swapped = {{"p2", "second"}, {"p1", "first"}};
    CHECK(hash_corpus(two) != hash_corpus(swapped));

    uint64_t h = kFnvOffset;
    for (const auto& p : two) {
        h = fnv1a64(p.id, h);
        h = fnv1a64(std::string_view("\0", 1), h);
        h = fnv1a64(p.text, h);
        h = fnv1a64(std::string_view("\0", 1), h);
    }
    CHECK(hash_corpus(two) == "fnv1a64:" + to_hex(h));
}

TEST_CASE("manifest JSON round trip", "[persist]") {
    IndexManifest m;
    m.dimension = 64;
    m.tau_syn = 0.85;
    m.entity_count = 10;
    m.passage_count = 4;
    m.proposition_count = 12;
    m.clique_edges = 7;
    m.containment_edges = 15;
    m.synonymy_edges = 2;
    m.content_hash = "fnv1a64:00ff";
    m.corpus_hash = "fnv1a64:11aa";
    m.provider = "mock/64";
    m.built_at = "2026-02-02T02:02:02Z";

    nlohmann::json j = manifest_to_json(m);
    CHECK(j["counts"]["edges"]["total"] == 24);
    IndexManifest r = manifest_from_json(j);
    CHECK(r.dimension == m.dimension);
    CHECK(r.tau_syn == m.tau_syn);
    CHECK(r.entity_count == m.entity_count);
    CHECK(r.passage_count == m.passage_count);
    CHECK(r.proposition_count == m.proposition_count);
    CHECK(r.clique_edges == m.clique_edges);
    CHECK(r.containment_edges == m.containment_edges);
    CHECK(r.synonymy_edges == m.synonymy_edges);
    CHECK(r.content_hash == m.content_hash);
    CHECK(r.corpus_hash == m.corpus_hash);
    CHECK(r.provider == m.provider);
    CHECK(r.built_at == m.built_at);
}

TEST_CASE("build timestamp can be pinned through the environment", "[persist]") {
    PropositionGraph g = test_graph();
    fs::path dir = make_temp_dir();
    {
        EnvGuard guard("PROPRAG_BUILD_TIME", "1999-12-31T23:59:59Z");
        IndexMetadata meta;
        meta.provider = "mock/64";
        meta.corpus_hash = "fnv1a64:0";
        IndexManifest m = save_index(g, dir.string(), meta);
        CHECK(m.built_at == "1999-12-31T23:59:59Z");
    }
    {
        // An explicit metadata timestamp wins over the pin.
        EnvGuard guard("PROPRAG_BUILD_TIME", "1999-12-31T23:59:59Z");
        IndexManifest m = save_index(g, dir.string(), test_meta());
        CHECK(m.built_at == "2026-01-01T00:00:00Z");
    }
    {
        EnvGuard guard("PROPRAG_BUILD_TIME"); // unset
        CHECK_FALSE(utc_timestamp().empty());
        CHECK(utc_timestamp().size() == 20); // YYYY-MM-DDTHH:MM:SSZ
    }
    fs::remove_all(dir);
}

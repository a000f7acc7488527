// Personalized PageRank: closed forms, conservation, dense-oracle equivalence.

#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace proprag;
using namespace proprag::test;

namespace {

constexpr int kDim = 8;

Embedding basis(int at) {
    Embedding v(kDim, 0.0f);
    v[static_cast<size_t>(at)] = 1.0f;
    return v;
}

// One passage containing a single one-entity proposition: the only edge is
// the containment a--p1.
PropositionGraph path_graph() {
    std::map<std::string, Embedding> ents = {{"a", basis(0)}};
    return PropositionGraph::build(
        {{"p1::0000", "a alone", {"a"}, "p1", basis(5)}},
        {{"p1", "Text.", basis(6)}}, ents, 0.8);
}

// Triangle a--b (clique), a--p1 and b--p1 (containment), all weights 1.
PropositionGraph triangle_graph() {
    std::map<std::string, Embedding> ents = {{"a", basis(0)}, {"b", basis(1)}};
    return PropositionGraph::build(
        {{"p1::0000", "a meets b", {"a", "b"}, "p1", basis(5)}},
        {{"p1", "Text.", basis(6)}}, ents, 0.8);
}

SeedDistribution seed_on(const std::string& id) {
    return SeedDistribution::from_weights({{id, 1.0}});
}

double sum_scores(const PPRScores& s) {
    double total = 0.0;
    for (const auto& [_, v] : s.scores) total += v;
    return total;
}

} // namespace

TEST_CASE("seed distributions normalize nonnegative weights", "[ppr]") {
    auto s = SeedDistribution::from_weights({{"a", 1.0}, {"b", 3.0}});
    REQUIRE(s.entries().size() == 2);
    CHECK(s.entries().at("a") == 0.25);
    CHECK(s.entries().at("b") == 0.75);

    auto dropped = SeedDistribution::from_weights({{"a", 0.0}, {"b", 2.0}});
    REQUIRE(dropped.entries().size() == 1);
    CHECK(dropped.entries().at("b") == 1.0);

    CHECK_THROWS_AS(SeedDistribution::from_weights({{"a", -0.1}, {"b", 1.0}}),
                    DataError);
    CHECK_THROWS_AS(SeedDistribution::from_weights({{"a", 0.0}}), DataError);
    CHECK_THROWS_AS(SeedDistribution::from_weights({}), DataError);
}

TEST_CASE("two-node chain matches the closed form", "[ppr]") {
    // a and p1 exchange all mass: a = (1-d) + d*p, p = d*a
    // => a = 1/(1+d), p = d/(1+d).
    PropositionGraph g = path_graph();
    GraphView view(g);
    for (double d : {0.75, 0.45}) {
        PPRScores s = run_ppr(view, seed_on("a"), d);
        REQUIRE(s.converged);
        CHECK(std::abs(s.scores.at("a") - 1.0 / (1.0 + d)) < 1e-6);
        CHECK(std::abs(s.scores.at("p1") - d / (1.0 + d)) < 1e-6);
        CHECK(std::abs(sum_scores(s) - 1.0) < 1e-6);
    }
}

TEST_CASE("triangle matches the closed form at both dampings", "[ppr]") {
    // Symmetric triangle seeded on a: a = (2-d)/(2+d), b = p = d*a/(2-d).
    PropositionGraph g = triangle_graph();
    GraphView view(g);

    PPRScores hi = run_ppr(view, seed_on("a"), 0.75);
    REQUIRE(hi.converged);
    CHECK(std::abs(hi.scores.at("a") - 5.0 / 11.0) < 1e-6);
    CHECK(std::abs(hi.scores.at("b") - 3.0 / 11.0) < 1e-6);
    CHECK(std::abs(hi.scores.at("p1") - 3.0 / 11.0) < 1e-6);

    PPRScores lo = run_ppr(view, seed_on("a"), 0.45);
    REQUIRE(lo.converged);
    CHECK(std::abs(lo.scores.at("a") - 31.0 / 49.0) < 1e-6);
    CHECK(std::abs(lo.scores.at("b") - 9.0 / 49.0) < 1e-6);
    CHECK(std::abs(lo.scores.at("p1") - 9.0 / 49.0) < 1e-6);

    // Lower damping keeps more mass at the seed.
    CHECK(lo.scores.at("a") > hi.scores.at("a"));
}

TEST_CASE("dangling seeds keep their mass", "[ppr]") {
    // p2 has no propositions, so it has no edges: its mass recirculates
    // through the dangling term straight back to the seed.
    std::map<std::string, Embedding> ents = {{"a", basis(0)}};
    PropositionGraph g = PropositionGraph::build(
        {{"p1::0000", "a alone", {"a"}, "p1", basis(5)}},
        {{"p1", "Text one.", basis(6)}, {"p2", "Text two.", basis(7)}}, ents, 0.8);
    GraphView view(g);

    PPRScores s = run_ppr(view, seed_on("p2"), 0.75);
    CHECK(s.converged);
    CHECK(s.iterations == 1);
    CHECK(s.scores.at("p2") == 1.0);
    CHECK(s.scores.at("a") == 0.0);
    CHECK(s.scores.at("p1") == 0.0);
}

TEST_CASE("scores sum to one on random worlds", "[ppr]") {
    for (uint32_t seed : {2u, 13u, 29u}) {
        RandomWorldOptions o;
        o.seed = seed;
        auto index = build_world(random_world(o));
        GraphView view(index.graph);
        std::mt19937 rng(seed * 7919u);
        for (double d : {0.75, 0.45}) {
            PPRScores s = run_ppr(view, random_seeds(index.graph, rng), d);
            CHECK(s.converged);
            CHECK(std::abs(sum_scores(s) - 1.0) < 1e-6);
            CHECK(s.scores.size() == view.nodes().size());
        }
    }
}

TEST_CASE("sparse solver equals the dense reference", "[ppr]") {
    for (uint32_t seed : {1u, 5u, 17u, 33u, 61u, 97u}) {
        RandomWorldOptions o;
        o.seed = seed;
        auto index = build_world(random_world(o));
        const PropositionGraph& g = index.graph;
        GraphView view(g);
        std::mt19937 rng(seed ^ 0xc0ffeeU);
        SeedDistribution seeds = random_seeds(g, rng);
        for (double d : {0.75, 0.45}) {
            PPRScores got = run_ppr(view, seeds, d);
            DensePPRResult want = dense_ppr(view, seeds, d);
            CHECK(got.iterations == want.iterations);
            CHECK(got.converged == want.converged);
            REQUIRE(got.scores.size() == want.scores.size());
            for (const auto& [id, score] : want.scores) {
                CHECK(std::abs(got.scores.at(id) - score) < 1e-12);
            }
        }
    }
}

TEST_CASE("subgraph views restrict the walk", "[ppr]") {
    for (uint32_t seed : {3u, 21u}) {
        RandomWorldOptions o;
        o.seed = seed;
        auto index = build_world(random_world(o));
        const PropositionGraph& g = index.graph;

        std::vector<std::string> keep;
        for (size_t i = 0; i < 3 && i < g.passage_count(); ++i) {
            keep.push_back(g.passage(static_cast<uint32_t>(i)).id);
        }
        Subgraph sub = induce_subgraph(g, keep);
        GraphView view(sub);
        REQUIRE(!view.nodes().empty());

        std::map<std::string, double> weights;
        std::mt19937 rng(seed + 5);
        for (int i = 0; i < 3; ++i) {
            uint32_t node = view.nodes()[roll(rng, static_cast<uint32_t>(view.nodes().size()))];
            weights[g.node_id(node)] = 1.0 + roll(rng, 5);
        }
        SeedDistribution seeds = SeedDistribution::from_weights(weights);

        PPRScores got = run_ppr(view, seeds, 0.75);
        DensePPRResult want = dense_ppr(view, seeds, 0.75);
        REQUIRE(got.scores.size() == view.nodes().size());
        for (const auto& [id, score] : want.scores) {
            CHECK(std::abs(got.scores.at(id) - score) < 1e-12);
        }
        CHECK(std::abs(sum_scores(got) - 1.0) < 1e-6);

        // Nodes outside the subgraph never appear in the result.
        for (const auto& [id, _] : got.scores) {
            auto idx = g.find_node(id);
            REQUIRE(idx.has_value());
            CHECK(view.contains(*idx));
        }
    }
}

TEST_CASE("non-convergence is reported honestly", "[ppr]") {
    PropositionGraph g = triangle_graph();
    GraphView view(g);
    PPRScores s = run_ppr(view, seed_on("a"), 0.75, 1e-8, 2);
    CHECK_FALSE(s.converged);
    CHECK(s.iterations == 2);
    // The truncated vector is still a probability distribution.
    CHECK(std::abs(sum_scores(s) - 1.0) < 1e-9);
}

TEST_CASE("run_ppr validates its arguments", "[ppr]") {
    PropositionGraph g = triangle_graph();
    GraphView view(g);
    SeedDistribution seeds = seed_on("a");

    CHECK_THROWS_AS(run_ppr(view, seeds, 0.0), DataError);
    CHECK_THROWS_AS(run_ppr(view, seeds, 1.0), DataError);
    CHECK_THROWS_AS(run_ppr(view, seeds, -0.5), DataError);
    CHECK_THROWS_AS(run_ppr(view, seeds, 0.75, 0.0), DataError);
    CHECK_THROWS_AS(run_ppr(view, seeds, 0.75, -1e-9), DataError);
    CHECK_THROWS_AS(run_ppr(view, seed_on("ghost"), 0.75), DataError);

    Subgraph empty = induce_subgraph(g, {});
    GraphView empty_view(empty);
    CHECK_THROWS_AS(run_ppr(empty_view, seeds, 0.75), DataError);

    // Seed on a node the subgraph dropped.
    std::map<std::string, Embedding> ents = {{"a", basis(0)}, {"b", basis(1)}};
    PropositionGraph two = PropositionGraph::build(
        {{"p1::0000", "a here", {"a"}, "p1", basis(5)},
         {"p2::0000", "b there", {"b"}, "p2", basis(5)}},
        {{"p1", "One.", basis(6)}, {"p2", "Two.", basis(7)}}, ents, 0.8);
    Subgraph only_p1 = induce_subgraph(two, {"p1"});
    GraphView p1_view(only_p1);
    CHECK_THROWS_AS(run_ppr(p1_view, seed_on("b"), 0.75), DataError);
    CHECK_NOTHROW(run_ppr(p1_view, seed_on("a"), 0.75));
}

TEST_CASE("top_passages ranks passages only, ties by id", "[ppr]") {
    std::map<std::string, Embedding> ents = {{"a", basis(0)}};
    PropositionGraph g = PropositionGraph::build(
        {{"pa::0000", "a one", {"a"}, "pa", basis(5)},
         {"pb::0000", "a two", {"a"}, "pb", basis(5)},
         {"pc::0000", "a three", {"a"}, "pc", basis(5)}},
        {{"pa", "A.", basis(6)}, {"pb", "B.", basis(6)}, {"pc", "C.", basis(6)}},
        ents, 0.8);
    GraphView view(g);

    PPRScores s;
    s.scores = {{"a", 0.9}, {"pa", 0.1}, {"pb", 0.4}, {"pc", 0.1}};
    auto ranked = top_passages(s, view, 10);
    REQUIRE(ranked.size() == 3); // the entity never ranks
    CHECK(ranked[0].first == "pb");
    CHECK(ranked[1].first == "pa"); // tie with pc broken by id
    CHECK(ranked[2].first == "pc");

    auto top2 = top_passages(s, view, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0].first == "pb");
    CHECK(top2[1].first == "pa");

    // Passages missing from the score map count as zero.
    PPRScores partial;
    partial.scores = {{"pc", 0.2}};
    auto filled = top_passages(partial, view, 3);
    REQUIRE(filled.size() == 3);
    CHECK(filled[0].first == "pc");
    CHECK(filled[1] == std::make_pair(std::string("pa"), 0.0));

    CHECK_THROWS_AS(top_passages(s, view, 0), DataError);
}

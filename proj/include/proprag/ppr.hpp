#pragma once
// Personalized PageRank over a graph view.
//
// Fixed point of  x = (1-d)*s + d*W^T x  with W the row-normalized weighted
// adjacency restricted to the view. "Damping" d is the continue probability:
// high d walks further from the seeds, low d stays close. Dangling nodes
// hand their mass back to the seed distribution, which keeps the
// personalization semantics and makes the scores a probability vector.

#include "proprag/errors.hpp"
#include "proprag/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace proprag {

class SeedDistribution {
public:
    // Normalizes nonnegative weights to sum 1. At least one weight must be
    // positive; negative weights are rejected.
    static SeedDistribution from_weights(const std::map<std::string, double>& weights) {
        double sum = 0.0;
        for (const auto& [id, w] : weights) {
            if (w < 0.0) throw DataError("seed weight negative for node " + id);
            sum += w;
        }
        if (sum <= 0.0) throw DataError("seed distribution has no positive weight");
        SeedDistribution s;
        for (const auto& [id, w] : weights) {
            if (w > 0.0) s.entries_[id] = w / sum;
        }
        return s;
    }

    const std::map<std::string, double>& entries() const { return entries_; }

private:
    std::map<std::string, double> entries_;
};

struct PPRScores {
    std::map<std::string, double> scores; // every node of the view
    int iterations = 0;
    bool converged = true;
};

inline PPRScores run_ppr(const GraphView& view, const SeedDistribution& seeds, double damping,
                         double tolerance = 1e-8, int max_iterations = 200) {
    if (!(damping > 0.0 && damping < 1.0)) {
        throw DataError("run_ppr: damping must be in (0,1)");
    }
    if (!(tolerance > 0.0)) throw DataError("run_ppr: tolerance must be positive");

    const auto& nodes = view.nodes();
    const size_t n = nodes.size();
    if (n == 0) throw DataError("run_ppr: empty graph view");

    // parent index -> local index
    std::vector<int64_t> local(view.graph().node_count(), -1);
    for (size_t i = 0; i < n; ++i) local[nodes[i]] = static_cast<int64_t>(i);

    std::vector<double> seed(n, 0.0);
    for (const auto& [id, w] : seeds.entries()) {
        auto idx = view.graph().find_node(id);
        if (!idx || local[*idx] < 0) {
            throw DataError("run_ppr: seed node not in view: " + id);
        }
        seed[static_cast<size_t>(local[*idx])] = w;
    }

    // Row sums of the view-restricted weighted adjacency.
    std::vector<double> row_sum(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        view.for_each_neighbor(nodes[i],
                               [&](const AdjacencyEntry& a) { row_sum[i] += a.weight; });
    }

    std::vector<double> x = seed;
    std::vector<double> next(n, 0.0);
    int iter = 0;
    bool converged = false;
    for (; iter < max_iterations; ++iter) {
        double dangling = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (row_sum[i] <= 0.0) dangling += x[i];
        }
        for (size_t i = 0; i < n; ++i) {
            next[i] = (1.0 - damping) * seed[i] + damping * dangling * seed[i];
        }
        for (size_t i = 0; i < n; ++i) {
            if (row_sum[i] <= 0.0 || x[i] == 0.0) continue;
            double out = damping * x[i] / row_sum[i];
            view.for_each_neighbor(nodes[i], [&](const AdjacencyEntry& a) {
                next[static_cast<size_t>(local[a.neighbor])] += out * a.weight;
            });
        }
        double delta = 0.0;
        for (size_t i = 0; i < n; ++i) delta += std::abs(next[i] - x[i]);
        x.swap(next);
        if (delta < tolerance) {
            ++iter;
            converged = true;
            break;
        }
    }

    PPRScores out;
    out.iterations = iter;
    out.converged = converged;
    for (size_t i = 0; i < n; ++i) {
        out.scores[view.graph().node_id(nodes[i])] = x[i];
    }
    return out;
}

// Passage-only ranking: descending score, ties by ascending passage id.
inline std::vector<std::pair<std::string, double>> top_passages(const PPRScores& scores,
                                                                const GraphView& view,
                                                                size_t k) {
    if (k < 1) throw DataError("top_passages: k must be >= 1");
    std::vector<std::pair<std::string, double>> out;
    for (uint32_t node : view.nodes()) {
        if (!view.graph().is_passage_node(node)) continue;
        const std::string& id = view.graph().node_id(node);
        auto it = scores.scores.find(id);
        out.emplace_back(id, it == scores.scores.end() ? 0.0 : it->second);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

} // namespace proprag

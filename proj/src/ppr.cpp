#include "haystackcraft/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "haystackcraft/error.hpp"

namespace hc {

void PprConfig::validate() const {
    if (num_seeds == 0) throw Error(ErrorCode::InvalidArgument, "ppr: num_seeds must be >= 1");
    if (!(damping >= 0.0 && damping < 1.0)) throw Error(ErrorCode::InvalidArgument, "ppr: damping must lie in [0, 1)");
    if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "ppr: tolerance must be > 0");
    if (max_iterations == 0) throw Error(ErrorCode::InvalidArgument, "ppr: max_iterations must be >= 1");
}

PprConfig default_ppr_config(std::string_view base_strategy) {
    PprConfig c;
    if (base_strategy == "bm25") {
        c.num_seeds = 10;
        c.damping = 0.5;
    } else if (base_strategy == "dense") {
        c.num_seeds = 5;
        c.damping = 0.5;
    } else if (base_strategy == "hybrid") {
        c.num_seeds = 5;
        c.damping = 0.85;
    } else {
        throw Error(ErrorCode::InvalidArgument, "ppr: no defaults for base retriever '" + std::string(base_strategy) + "'");
    }
    return c;
}

double PprVector::sum() const {
    return std::accumulate(mass.begin(), mass.end(), 0.0);
}

PprVector personalized_pagerank(const HyperlinkGraph& graph, std::span<const NodeId> seeds, const PprConfig& config) {
    config.validate();
    const std::size_t n = graph.node_count();
    if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "ppr: empty seed set");

    std::vector<NodeId> seed_set(seeds.begin(), seeds.end());
    std::sort(seed_set.begin(), seed_set.end());
    seed_set.erase(std::unique(seed_set.begin(), seed_set.end()), seed_set.end());
    if (seed_set.back() >= n) throw Error(ErrorCode::InvalidArgument, "ppr: seed outside the graph");

    std::vector<double> teleport(n, 0.0);
    const double share = 1.0 / static_cast<double>(seed_set.size());
    for (auto s : seed_set) teleport[s] = share;

    std::vector<double> inv_degree(n, 0.0);
    std::vector<NodeId> dangling;
    for (NodeId u = 0; u < n; ++u) {
        auto deg = graph.out_degree(u);
        if (deg == 0)
            dangling.push_back(u);
        else
            inv_degree[u] = 1.0 / static_cast<double>(deg);
    }

    const double d = config.damping;
    PprVector result;
    result.mass = teleport;
    std::vector<double> next(n, 0.0);
    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        double dangling_mass = 0.0;
        for (auto u : dangling) dangling_mass += result.mass[u];
        double delta = 0.0;
        for (NodeId v = 0; v < n; ++v) {
            double pulled = 0.0;
            for (auto u : graph.in_neighbors(v)) pulled += result.mass[u] * inv_degree[u];
            next[v] = (1.0 - d) * teleport[v] + d * (pulled + dangling_mass * teleport[v]);
            delta += std::abs(next[v] - result.mass[v]);
        }
        result.mass.swap(next);
        result.iterations = it + 1;
        if (delta < config.tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

RankedList rerank_ppr(const RankedList& base, const HyperlinkGraph& graph, const PprConfig& config) {
    config.validate();
    if (base.empty()) throw Error(ErrorCode::InvalidArgument, "ppr rerank: base ranking is empty");

    const auto& entries = base.entries();
    std::vector<NodeId> seeds;
    for (std::size_t i = 0; i < entries.size() && seeds.size() < config.num_seeds; ++i) {
        auto node = graph.find(entries[i].doc_id);
        if (!node) throw Error(ErrorCode::Validation, "ppr rerank: '" + entries[i].doc_id + "' is not a graph node");
        seeds.push_back(*node);
    }
    auto ppr = personalized_pagerank(graph, seeds, config);

    constexpr auto unranked = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> base_rank(graph.node_count(), unranked);
    for (const auto& e : entries) {
        if (auto node = graph.find(e.doc_id)) base_rank[*node] = e.rank;
    }

    std::vector<NodeId> reached;
    for (NodeId v = 0; v < graph.node_count(); ++v)
        if (ppr.mass[v] > 0.0) reached.push_back(v);
    // NodeId order is doc_id order, so the last key is the doc_id tie-break.
    std::sort(reached.begin(), reached.end(), [&](NodeId a, NodeId b) {
        if (ppr.mass[a] != ppr.mass[b]) return ppr.mass[a] > ppr.mass[b];
        if (base_rank[a] != base_rank[b]) return base_rank[a] < base_rank[b];
        return a < b;
    });

    std::vector<RankedEntry> out;
    out.reserve(reached.size() + entries.size());
    std::vector<bool> listed(graph.node_count(), false);
    for (auto v : reached) {
        out.push_back({graph.id_of(v), ppr.mass[v], out.size() + 1});
        listed[v] = true;
    }
    for (const auto& e : entries) {
        auto node = graph.find(e.doc_id);
        if (node && listed[*node]) continue;
        out.push_back({e.doc_id, 0.0, out.size() + 1});
    }
    return RankedList(base.query_id(), base.strategy() + "+ppr", std::move(out));
}

}  // namespace hc

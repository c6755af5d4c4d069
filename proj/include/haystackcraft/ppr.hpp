#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "haystackcraft/corpus.hpp"
#include "haystackcraft/retrieval.hpp"

namespace hc {

struct PprConfig {
    std::size_t num_seeds = 10;
    /// Probability of following an out-link; 1 - damping teleports to the seeds.
    double damping = 0.5;
    double tolerance = 1e-8;
    std::size_t max_iterations = 100;
    bool symmetrize = false;

    void validate() const;
};

/// Tuned per base retriever: bm25 (10 seeds, 0.5), dense (5, 0.5), hybrid (5, 0.85).
PprConfig default_ppr_config(std::string_view base_strategy);

/// Stationary mass per graph node, indexed by NodeId.
struct PprVector {
    std::vector<double> mass;
    std::size_t iterations = 0;
    bool converged = false;

    double sum() const;
};

/// Power iteration of p <- (1 - d) s + d P^T p with s uniform over `seeds`.
/// Mass sitting on nodes without out-links is sent back through s, so the
/// vector keeps summing to one. `config.symmetrize` is ignored here; pass a
/// symmetrized graph instead.
PprVector personalized_pagerank(const HyperlinkGraph& graph, std::span<const NodeId> seeds, const PprConfig& config);

/// Seeds PPR with the top `num_seeds` documents of `base`, then ranks every
/// document with positive mass (ties: base rank, then doc_id), followed by the
/// remaining base documents in base order with score 0.
RankedList rerank_ppr(const RankedList& base, const HyperlinkGraph& graph, const PprConfig& config);

}  // namespace hc

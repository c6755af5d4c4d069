#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "haystackcraft/corpus.hpp"
#include "haystackcraft/ppr.hpp"
#include "haystackcraft/retrieval.hpp"

namespace hc {

enum class BaseRetriever { Bm25, Dense, Hybrid };

/// A retriever tag such as "bm25", "dense", "hybrid" or "hybrid+ppr".
struct RetrieverSpec {
    BaseRetriever base = BaseRetriever::Bm25;
    bool ppr = false;

    static RetrieverSpec parse(std::string_view tag);
    std::string base_tag() const;
    std::string tag() const { return base_tag() + (ppr ? "+ppr" : ""); }

    bool operator==(const RetrieverSpec&) const = default;
};

/// Supplies query vectors for the dense retriever.
class QueryEncoder {
public:
    virtual ~QueryEncoder() = default;
    virtual std::vector<float> encode(const std::string& query_id, const std::string& text) const = 0;
};

/// Looks vectors up by query id in a precomputed store.
class PrecomputedQueryEncoder final : public QueryEncoder {
public:
    explicit PrecomputedQueryEncoder(EmbeddingStore store) : store_(std::move(store)) {}
    std::vector<float> encode(const std::string& query_id, const std::string& text) const override;

private:
    EmbeddingStore store_;
};

/// POST {"texts":[...]} to an embedding endpoint, read {"vectors":[[...]]}.
class HttpQueryEncoder final : public QueryEncoder {
public:
    explicit HttpQueryEncoder(std::string endpoint);
    std::vector<float> encode(const std::string& query_id, const std::string& text) const override;

private:
    std::string endpoint_;
};

/// Tries each encoder in turn; the first that does not throw wins.
class ChainedQueryEncoder final : public QueryEncoder {
public:
    explicit ChainedQueryEncoder(std::vector<const QueryEncoder*> chain) : chain_(std::move(chain)) {}
    std::vector<float> encode(const std::string& query_id, const std::string& text) const override;

private:
    std::vector<const QueryEncoder*> chain_;
};

struct RetrievalSettings {
    Bm25Params bm25;
    int rrf_k = 60;
    /// Length of each base ranking (and of the fused hybrid list).
    std::size_t depth = 1000;
    PprConfig ppr_bm25 = default_ppr_config("bm25");
    PprConfig ppr_dense = default_ppr_config("dense");
    PprConfig ppr_hybrid = default_ppr_config("hybrid");

    const PprConfig& ppr_for(BaseRetriever base) const;
};

/// Runs a retriever spec against loaded indexes. Dense and hybrid specs need
/// both an embedding store and a query encoder.
class Retriever {
public:
    Retriever(const Corpus& corpus, const SparseIndex* sparse, const EmbeddingStore* dense,
              const QueryEncoder* encoder, RetrievalSettings settings);

    RankedList rank(const RetrieverSpec& spec, const std::string& query_id, const std::string& query) const;
    RankedList rank_base(BaseRetriever base, const std::string& query_id, const std::string& query) const;

    const RetrievalSettings& settings() const { return settings_; }
    const Corpus& corpus() const { return corpus_; }

private:
    const Corpus& corpus_;
    const SparseIndex* sparse_;
    const EmbeddingStore* dense_;
    const QueryEncoder* encoder_;
    RetrievalSettings settings_;
    std::optional<HyperlinkGraph> symmetric_;
};

}  // namespace hc

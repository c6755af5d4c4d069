#include "haystackcraft/pipeline.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "haystackcraft/error.hpp"
#include "http_util.hpp"

namespace hc {

RetrieverSpec RetrieverSpec::parse(std::string_view tag) {
    RetrieverSpec spec;
    std::string_view base = tag;
    if (base.ends_with("+ppr")) {
        spec.ppr = true;
        base.remove_suffix(4);
    }
    if (base == "bm25")
        spec.base = BaseRetriever::Bm25;
    else if (base == "dense")
        spec.base = BaseRetriever::Dense;
    else if (base == "hybrid")
        spec.base = BaseRetriever::Hybrid;
    else
        throw Error(ErrorCode::InvalidArgument, "unknown retriever '" + std::string(tag) + "'");
    return spec;
}

std::string RetrieverSpec::base_tag() const {
    switch (base) {
        case BaseRetriever::Bm25: return "bm25";
        case BaseRetriever::Dense: return "dense";
        case BaseRetriever::Hybrid: return "hybrid";
    }
    return "bm25";
}

std::vector<float> PrecomputedQueryEncoder::encode(const std::string& query_id, const std::string&) const {
    auto row = store_.find(query_id);
    if (!row)
        throw Error(ErrorCode::InvalidArgument, "no precomputed embedding for query '" + query_id +
                                                    "'; configure embedding.endpoint for refined queries");
    auto v = store_.row(*row);
    return {v.begin(), v.end()};
}

HttpQueryEncoder::HttpQueryEncoder(std::string endpoint) : endpoint_(std::move(endpoint)) {
    detail::split_url(endpoint_);
}

std::vector<float> HttpQueryEncoder::encode(const std::string&, const std::string& text) const {
    auto [base, path] = detail::split_url(endpoint_);
    if (path == "/") path = "/embed";
    httplib::Client cli(base);
    nlohmann::json body = {{"texts", nlohmann::json::array({text})}};
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::Transport, "embedding endpoint: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(ErrorCode::Transport, "embedding endpoint returned HTTP " + std::to_string(res->status));
    try {
        return nlohmann::json::parse(res->body).at("vectors").at(0).get<std::vector<float>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Transport, std::string("malformed embedding response: ") + e.what());
    }
}

std::vector<float> ChainedQueryEncoder::encode(const std::string& query_id, const std::string& text) const {
    if (chain_.empty()) throw Error(ErrorCode::InvalidArgument, "no query encoder configured");
    for (std::size_t i = 0; i + 1 < chain_.size(); ++i) {
        try {
            return chain_[i]->encode(query_id, text);
        } catch (const Error&) {
        }
    }
    return chain_.back()->encode(query_id, text);
}

const PprConfig& RetrievalSettings::ppr_for(BaseRetriever base) const {
    switch (base) {
        case BaseRetriever::Bm25: return ppr_bm25;
        case BaseRetriever::Dense: return ppr_dense;
        case BaseRetriever::Hybrid: return ppr_hybrid;
    }
    return ppr_bm25;
}

Retriever::Retriever(const Corpus& corpus, const SparseIndex* sparse, const EmbeddingStore* dense,
                     const QueryEncoder* encoder, RetrievalSettings settings)
    : corpus_(corpus), sparse_(sparse), dense_(dense), encoder_(encoder), settings_(settings) {
    if (settings_.depth == 0) throw Error(ErrorCode::InvalidArgument, "retrieval depth must be >= 1");
    if (settings_.rrf_k < 1) throw Error(ErrorCode::InvalidArgument, "rrf_k must be >= 1");
    for (auto base : {BaseRetriever::Bm25, BaseRetriever::Dense, BaseRetriever::Hybrid}) settings_.ppr_for(base).validate();
    if (settings_.ppr_bm25.symmetrize || settings_.ppr_dense.symmetrize || settings_.ppr_hybrid.symmetrize)
        symmetric_ = corpus_.graph().symmetrized();
}

RankedList Retriever::rank_base(BaseRetriever base, const std::string& query_id, const std::string& query) const {
    auto bm25 = [&] {
        if (!sparse_) throw Error(ErrorCode::InvalidArgument, "bm25 retrieval needs a sparse index");
        return score_bm25(*sparse_, query, settings_.depth, settings_.bm25, query_id);
    };
    auto dense = [&] {
        if (!dense_ || !encoder_)
            throw Error(ErrorCode::InvalidArgument, "dense retrieval needs document embeddings and a query encoder");
        auto v = encoder_->encode(query_id, query);
        return score_dense(*dense_, v, settings_.depth, query_id);
    };
    switch (base) {
        case BaseRetriever::Bm25: return bm25();
        case BaseRetriever::Dense: return dense();
        case BaseRetriever::Hybrid: {
            std::vector<RankedList> lists{bm25(), dense()};
            return fuse_rrf(lists, settings_.rrf_k, "hybrid", settings_.depth);
        }
    }
    return {};
}

RankedList Retriever::rank(const RetrieverSpec& spec, const std::string& query_id, const std::string& query) const {
    auto base = rank_base(spec.base, query_id, query);
    if (!spec.ppr || base.empty()) {
        if (spec.ppr) return RankedList(base.query_id(), base.strategy() + "+ppr", {});
        return base;
    }
    const auto& config = settings_.ppr_for(spec.base);
    return rerank_ppr(base, config.symmetrize ? *symmetric_ : corpus_.graph(), config);
}

}  // namespace hc

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "haystackcraft/corpus.hpp"

namespace hc {

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;

    bool operator==(const RankedEntry&) const = default;
};

/// Scored, strictly ordered documents for one query. Construction validates
/// that ranks run 1..n, scores never increase and no document repeats.
class RankedList {
public:
    RankedList() = default;
    RankedList(std::string query_id, std::string strategy, std::vector<RankedEntry> entries);

    /// Sorts by score descending with doc_id ascending as tie-break, keeps the
    /// first `top_n` (0 keeps all) and assigns ranks.
    static RankedList from_scores(std::string query_id, std::string strategy,
                                  std::vector<std::pair<std::string, double>> scored, std::size_t top_n);

    const std::string& query_id() const { return query_id_; }
    const std::string& strategy() const { return strategy_; }
    const std::vector<RankedEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// doc_id -> rank (1-based).
    std::unordered_map<std::string, std::size_t> rank_index() const;

    bool operator==(const RankedList&) const = default;

private:
    std::string query_id_;
    std::string strategy_;
    std::vector<RankedEntry> entries_;
};

/// Lowercases ASCII and splits on anything that is not an ASCII letter or
/// digit. Bytes >= 0x80 count as term characters. No stemming, no stopwords.
std::vector<std::string> analyze(std::string_view text);

struct Posting {
    NodeId doc = 0;
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

class SparseIndex {
public:
    static SparseIndex build(const Corpus& corpus);

    std::size_t doc_count() const { return doc_ids_.size(); }
    double average_length() const { return avg_length_; }
    std::uint32_t doc_length(NodeId d) const { return doc_lengths_.at(d); }
    const std::string& doc_id(NodeId d) const { return doc_ids_.at(d); }
    std::size_t term_count() const { return terms_.size(); }

    /// Postings sorted by document; empty span for unknown terms.
    std::span<const Posting> postings(std::string_view term) const;

    void save(const std::string& path) const;
    static SparseIndex load(const std::string& path);

    bool operator==(const SparseIndex& o) const {
        return doc_ids_ == o.doc_ids_ && doc_lengths_ == o.doc_lengths_ && terms_ == o.terms_ &&
               offsets_ == o.offsets_ && postings_ == o.postings_;
    }

private:
    void finalize();

    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_length_ = 0.0;
    std::vector<std::string> terms_;  // sorted
    std::vector<std::size_t> offsets_{0};
    std::vector<Posting> postings_;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 with IDF ln(1 + (N - df + 0.5) / (df + 0.5)). Repeated query
/// terms contribute once per occurrence. Documents with score 0 are omitted.
/// Throws Error(EmptyQuery) when the query analyzes to no terms.
RankedList score_bm25(const SparseIndex& index, std::string_view query, std::size_t top_n,
                      const Bm25Params& params = {}, std::string query_id = {});

/// Unit-normalized document vectors of one fixed dimension.
class EmbeddingStore {
public:
    EmbeddingStore() = default;

    /// Normalizes every row; zero rows and ragged rows are rejected.
    static EmbeddingStore from_rows(std::vector<std::string> ids, const std::vector<std::vector<float>>& rows);

    /// Reads the "HCEMB1" vector file and its sidecar id list.
    static EmbeddingStore load(const std::string& vectors_path, const std::string& ids_path);

    std::size_t size() const { return ids_.size(); }
    std::size_t dimension() const { return dim_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::optional<std::size_t> find(std::string_view id) const;

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::size_t dim_ = 0;
    std::vector<float> data_;
};

/// Writes vectors in the "HCEMB1" layout plus the id sidecar.
void write_embeddings(const std::string& vectors_path, const std::string& ids_path,
                      const std::vector<std::string>& ids, const std::vector<std::vector<float>>& rows);

/// Cosine similarity against every stored vector.
RankedList score_dense(const EmbeddingStore& store, std::span<const float> query, std::size_t top_n,
                       std::string query_id = {});

/// Reciprocal rank fusion: score(d) = sum over lists of 1 / (rrf_k + rank).
RankedList fuse_rrf(std::span<const RankedList> lists, int rrf_k, std::string strategy = "hybrid",
                    std::size_t top_n = 0);

}  // namespace hc

#include "haystackcraft/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include "binary_io.hpp"
#include "haystackcraft/error.hpp"

namespace hc {

namespace {

constexpr std::string_view kSparseMagic = "HCBM25";
constexpr std::uint32_t kSparseVersion = 1;
constexpr std::string_view kEmbeddingMagic = "HCEMB1";

bool score_order(const std::pair<std::string, double>& a, const std::pair<std::string, double>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
}

}  // namespace

// ---------------------------------------------------------------------------
// RankedList

RankedList::RankedList(std::string query_id, std::string strategy, std::vector<RankedEntry> entries)
    : query_id_(std::move(query_id)), strategy_(std::move(strategy)), entries_(std::move(entries)) {
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.rank != i + 1)
            throw Error(ErrorCode::Validation, "ranked list '" + strategy_ + "': ranks must be contiguous from 1");
        if (i > 0 && e.score > entries_[i - 1].score)
            throw Error(ErrorCode::Validation, "ranked list '" + strategy_ + "': scores must be non-increasing");
        if (!seen.insert(e.doc_id).second)
            throw Error(ErrorCode::Validation, "ranked list '" + strategy_ + "': duplicate document '" + e.doc_id + "'");
    }
}

RankedList RankedList::from_scores(std::string query_id, std::string strategy,
                                   std::vector<std::pair<std::string, double>> scored, std::size_t top_n) {
    std::size_t keep = top_n == 0 ? scored.size() : std::min(top_n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), score_order);
    std::vector<RankedEntry> entries;
    entries.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) entries.push_back({std::move(scored[i].first), scored[i].second, i + 1});
    return RankedList(std::move(query_id), std::move(strategy), std::move(entries));
}

std::unordered_map<std::string, std::size_t> RankedList::rank_index() const {
    std::unordered_map<std::string, std::size_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.emplace(e.doc_id, e.rank);
    return out;
}

// ---------------------------------------------------------------------------
// Sparse index and BM25

std::vector<std::string> analyze(std::string_view text) {
    std::vector<std::string> terms;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c >= 0x80 || std::isalnum(c)) {
            current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        } else if (!current.empty()) {
            terms.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) terms.push_back(std::move(current));
    return terms;
}

SparseIndex SparseIndex::build(const Corpus& corpus) {
    SparseIndex index;
    std::map<std::string, std::vector<Posting>> inverted;
    const auto& docs = corpus.documents();
    index.doc_ids_.reserve(docs.size());
    index.doc_lengths_.reserve(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        index.doc_ids_.push_back(docs[d].id);
        auto terms = analyze(docs[d].body);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        std::map<std::string, std::uint32_t> tf;
        for (auto& t : terms) ++tf[std::move(t)];
        // Documents are visited in id order, so each postings list stays sorted.
        for (auto& [term, count] : tf) inverted[term].push_back({static_cast<NodeId>(d), count});
    }
    for (auto& [term, list] : inverted) {
        index.terms_.push_back(term);
        index.postings_.insert(index.postings_.end(), list.begin(), list.end());
        index.offsets_.push_back(index.postings_.size());
    }
    index.finalize();
    return index;
}

void SparseIndex::finalize() {
    double total = 0.0;
    for (auto len : doc_lengths_) total += len;
    avg_length_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

std::span<const Posting> SparseIndex::postings(std::string_view term) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
    if (it == terms_.end() || *it != term) return {};
    auto t = static_cast<std::size_t>(it - terms_.begin());
    return {postings_.data() + offsets_[t], offsets_[t + 1] - offsets_[t]};
}

void SparseIndex::save(const std::string& path) const {
    detail::BinaryWriter w(path);
    w.magic(kSparseMagic);
    w.put<std::uint32_t>(kSparseVersion);
    w.put<std::uint64_t>(doc_ids_.size());
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        w.put_string(doc_ids_[d]);
        w.put<std::uint32_t>(doc_lengths_[d]);
    }
    w.put<std::uint64_t>(terms_.size());
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        w.put_string(terms_[t]);
        w.put<std::uint64_t>(offsets_[t + 1] - offsets_[t]);
        for (std::size_t i = offsets_[t]; i < offsets_[t + 1]; ++i) {
            w.put<std::uint32_t>(postings_[i].doc);
            w.put<std::uint32_t>(postings_[i].tf);
        }
    }
    w.finish();
}

SparseIndex SparseIndex::load(const std::string& path) {
    detail::BinaryReader r(path);
    r.expect_magic(kSparseMagic);
    auto version = r.get<std::uint32_t>();
    if (version != kSparseVersion)
        throw Error(ErrorCode::Parse, "'" + path + "': unsupported index version " + std::to_string(version));
    SparseIndex index;
    auto n = r.get<std::uint64_t>();
    for (std::uint64_t d = 0; d < n; ++d) {
        index.doc_ids_.push_back(r.get_string());
        index.doc_lengths_.push_back(r.get<std::uint32_t>());
    }
    auto terms = r.get<std::uint64_t>();
    for (std::uint64_t t = 0; t < terms; ++t) {
        index.terms_.push_back(r.get_string());
        auto m = r.get<std::uint64_t>();
        for (std::uint64_t i = 0; i < m; ++i) {
            Posting p;
            p.doc = r.get<std::uint32_t>();
            p.tf = r.get<std::uint32_t>();
            if (p.doc >= n) throw Error(ErrorCode::Parse, "'" + path + "': corrupt posting");
            index.postings_.push_back(p);
        }
        index.offsets_.push_back(index.postings_.size());
    }
    index.finalize();
    return index;
}

RankedList score_bm25(const SparseIndex& index, std::string_view query, std::size_t top_n,
                      const Bm25Params& params, std::string query_id) {
    if (top_n == 0) throw Error(ErrorCode::InvalidArgument, "bm25: top_n must be >= 1");
    auto terms = analyze(query);
    if (terms.empty()) throw Error(ErrorCode::EmptyQuery, "empty query");

    const double n_docs = static_cast<double>(index.doc_count());
    const double avgdl = index.average_length();
    std::vector<double> scores(index.doc_count(), 0.0);
    std::vector<NodeId> touched;
    for (const auto& term : terms) {
        auto postings = index.postings(term);
        if (postings.empty()) continue;
        const double df = static_cast<double>(postings.size());
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& p : postings) {
            const double tf = p.tf;
            const double norm = 1.0 - params.b + params.b * index.doc_length(p.doc) / avgdl;
            if (scores[p.doc] == 0.0) touched.push_back(p.doc);
            scores[p.doc] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
    }
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(touched.size());
    for (auto d : touched)
        if (scores[d] > 0.0) scored.emplace_back(index.doc_id(d), scores[d]);
    return RankedList::from_scores(std::move(query_id), "bm25", std::move(scored), top_n);
}

// ---------------------------------------------------------------------------
// Dense

EmbeddingStore EmbeddingStore::from_rows(std::vector<std::string> ids, const std::vector<std::vector<float>>& rows) {
    if (ids.size() != rows.size())
        throw Error(ErrorCode::Validation, "embeddings: " + std::to_string(rows.size()) + " rows but " +
                                               std::to_string(ids.size()) + " ids");
    EmbeddingStore store;
    store.dim_ = rows.empty() ? 0 : rows.front().size();
    store.data_.reserve(rows.size() * store.dim_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != store.dim_)
            throw Error(ErrorCode::Validation, "embeddings: row " + std::to_string(i) + " has dimension " +
                                                   std::to_string(rows[i].size()) + ", expected " + std::to_string(store.dim_));
        double norm = 0.0;
        for (float x : rows[i]) norm += static_cast<double>(x) * x;
        norm = std::sqrt(norm);
        if (norm == 0.0 || !std::isfinite(norm))
            throw Error(ErrorCode::Validation, "embeddings: row for '" + ids[i] + "' cannot be normalized");
        for (float x : rows[i]) store.data_.push_back(static_cast<float>(x / norm));
        if (!store.by_id_.emplace(ids[i], i).second)
            throw Error(ErrorCode::Validation, "embeddings: duplicate id '" + ids[i] + "'");
    }
    store.ids_ = std::move(ids);
    return store;
}

EmbeddingStore EmbeddingStore::load(const std::string& vectors_path, const std::string& ids_path) {
    detail::BinaryReader r(vectors_path);
    r.expect_magic(kEmbeddingMagic);
    auto count = r.get<std::uint32_t>();
    auto dim = r.get<std::uint32_t>();
    std::vector<std::vector<float>> rows(count, std::vector<float>(dim));
    for (auto& row : rows) r.read_raw(row.data(), row.size() * sizeof(float));

    std::ifstream in(ids_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open embedding ids file '" + ids_path + "'");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    if (ids.size() != count)
        throw Error(ErrorCode::Validation, "embeddings: '" + vectors_path + "' has " + std::to_string(count) +
                                               " rows but '" + ids_path + "' lists " + std::to_string(ids.size()) + " ids");
    auto store = from_rows(std::move(ids), rows);
    store.dim_ = dim;
    return store;
}

std::optional<std::size_t> EmbeddingStore::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

void write_embeddings(const std::string& vectors_path, const std::string& ids_path,
                      const std::vector<std::string>& ids, const std::vector<std::vector<float>>& rows) {
    if (ids.size() != rows.size()) throw Error(ErrorCode::InvalidArgument, "embeddings: id/row count mismatch");
    const std::uint32_t dim = rows.empty() ? 0 : static_cast<std::uint32_t>(rows.front().size());
    detail::BinaryWriter w(vectors_path);
    w.magic(kEmbeddingMagic);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(rows.size()));
    w.put<std::uint32_t>(dim);
    for (const auto& row : rows) {
        if (row.size() != dim) throw Error(ErrorCode::InvalidArgument, "embeddings: ragged rows");
        for (float x : row) w.put<float>(x);
    }
    w.finish();
    std::ofstream out(ids_path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + ids_path + "' for writing");
    for (const auto& id : ids) out << id << '\n';
}

RankedList score_dense(const EmbeddingStore& store, std::span<const float> query, std::size_t top_n,
                       std::string query_id) {
    if (top_n == 0) throw Error(ErrorCode::InvalidArgument, "dense: top_n must be >= 1");
    if (query.size() != store.dimension())
        throw Error(ErrorCode::InvalidArgument, "dense: query dimension " + std::to_string(query.size()) +
                                                    " does not match store dimension " + std::to_string(store.dimension()));
    double qnorm = 0.0;
    for (float x : query) qnorm += static_cast<double>(x) * x;
    qnorm = std::sqrt(qnorm);
    if (qnorm == 0.0) throw Error(ErrorCode::InvalidArgument, "dense: zero query vector");

    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto row = store.row(i);
        double dot = 0.0;
        for (std::size_t k = 0; k < row.size(); ++k) dot += static_cast<double>(row[k]) * query[k];
        scored.emplace_back(store.ids()[i], dot / qnorm);
    }
    return RankedList::from_scores(std::move(query_id), "dense", std::move(scored), top_n);
}

// ---------------------------------------------------------------------------
// RRF

RankedList fuse_rrf(std::span<const RankedList> lists, int rrf_k, std::string strategy, std::size_t top_n) {
    if (lists.size() < 2) throw Error(ErrorCode::InvalidArgument, "rrf: need at least two ranked lists");
    if (rrf_k < 1) throw Error(ErrorCode::InvalidArgument, "rrf: k must be >= 1");
    std::unordered_map<std::string, double> fused;
    std::vector<std::string> order;
    for (const auto& list : lists) {
        std::unordered_set<std::string_view> seen;
        for (const auto& e : list.entries()) {
            if (!seen.insert(e.doc_id).second)
                throw Error(ErrorCode::Validation, "rrf: duplicate document '" + e.doc_id + "' in one input list");
            auto [it, inserted] = fused.emplace(e.doc_id, 0.0);
            if (inserted) order.push_back(e.doc_id);
            it->second += 1.0 / (static_cast<double>(rrf_k) + static_cast<double>(e.rank));
        }
    }
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(order.size());
    for (auto& id : order) scored.emplace_back(id, fused[id]);
    return RankedList::from_scores(lists.front().query_id(), std::move(strategy), std::move(scored), top_n);
}

}  // namespace hc

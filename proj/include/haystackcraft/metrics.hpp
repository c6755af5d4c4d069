#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "haystackcraft/corpus.hpp"
#include "haystackcraft/retrieval.hpp"

namespace hc {

/// Fraction of `needles` present in the first `n` entries.
double recall_at_n(const RankedList& ranked, std::span<const std::string> needles, std::size_t n);

/// Binary-gain NDCG with 1 / log2(i + 1) discounting; the ideal ranking puts
/// min(|needles|, n) needles first.
double ndcg_at_n(const RankedList& ranked, std::span<const std::string> needles, std::size_t n);

/// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_answer(std::string_view text);

struct F1Score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Token-bag F1 of the normalized prediction against the gold answer and each
/// alias; the best-scoring candidate wins.
F1Score answer_f1(std::string_view prediction, std::string_view gold, std::span<const std::string> aliases = {});

inline const std::vector<std::size_t> kDefaultCutoffs{10, 20, 40, 80, 160};

struct CutoffScores {
    double recall = 0.0;
    double ndcg = 0.0;
};

struct RetrievalReport {
    std::string strategy;
    std::size_t samples = 0;
    std::map<std::size_t, CutoffScores> by_cutoff;  // ascending N
    std::map<int, RetrievalReport> by_hop;
};

/// Mean Recall@N / NDCG@N over samples, overall and per hop count.
/// `rankings[i]` must belong to `samples[i]`.
RetrievalReport evaluate_retrieval(std::span<const QASample> samples, std::span<const RankedList> rankings,
                                   std::span<const std::size_t> cutoffs = kDefaultCutoffs);

}  // namespace hc

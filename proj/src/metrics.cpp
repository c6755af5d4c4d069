#include "haystackcraft/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "haystackcraft/error.hpp"

namespace hc {

double recall_at_n(const RankedList& ranked, std::span<const std::string> needles, std::size_t n) {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "recall@n: n must be >= 1");
    if (needles.empty()) throw Error(ErrorCode::InvalidArgument, "recall@n: empty needle set");
    std::unordered_set<std::string_view> wanted(needles.begin(), needles.end());
    std::size_t hits = 0;
    const auto& entries = ranked.entries();
    for (std::size_t i = 0; i < std::min(n, entries.size()); ++i) hits += wanted.contains(entries[i].doc_id) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(wanted.size());
}

double ndcg_at_n(const RankedList& ranked, std::span<const std::string> needles, std::size_t n) {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "ndcg@n: n must be >= 1");
    if (needles.empty()) throw Error(ErrorCode::InvalidArgument, "ndcg@n: empty needle set");
    std::unordered_set<std::string_view> wanted(needles.begin(), needles.end());
    const auto& entries = ranked.entries();
    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(n, entries.size()); ++i)
        if (wanted.contains(entries[i].doc_id)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(wanted.size(), n); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

std::string normalize_answer(std::string_view text) {
    std::string stripped;
    stripped.reserve(text.size());
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::ispunct(c)) continue;
        stripped.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
    std::istringstream words(stripped);
    std::string word;
    std::string out;
    while (words >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(std::move(w));
    return out;
}

F1Score token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) {
        double same = pred == gold ? 1.0 : 0.0;
        return {same, same, same};
    }
    std::unordered_map<std::string, long> bag;
    for (const auto& g : gold) ++bag[g];
    long common = 0;
    for (const auto& p : pred) {
        auto it = bag.find(p);
        if (it != bag.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return {};
    F1Score s;
    s.precision = static_cast<double>(common) / static_cast<double>(pred.size());
    s.recall = static_cast<double>(common) / static_cast<double>(gold.size());
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

}  // namespace

F1Score answer_f1(std::string_view prediction, std::string_view gold, std::span<const std::string> aliases) {
    auto pred = split_words(normalize_answer(prediction));
    F1Score best = token_f1(pred, split_words(normalize_answer(gold)));
    for (const auto& alias : aliases) {
        auto s = token_f1(pred, split_words(normalize_answer(alias)));
        if (s.f1 > best.f1) best = s;
    }
    return best;
}

RetrievalReport evaluate_retrieval(std::span<const QASample> samples, std::span<const RankedList> rankings,
                                   std::span<const std::size_t> cutoffs) {
    if (samples.size() != rankings.size())
        throw Error(ErrorCode::InvalidArgument, "evaluate_retrieval: one ranking per sample required");
    std::vector<std::size_t> ns(cutoffs.begin(), cutoffs.end());
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

    RetrievalReport report;
    if (!rankings.empty()) report.strategy = rankings.front().strategy();
    auto add = [&](RetrievalReport& r, const QASample& s, const RankedList& ranked) {
        ++r.samples;
        for (auto n : ns) {
            r.by_cutoff[n].recall += recall_at_n(ranked, s.needles, n);
            r.by_cutoff[n].ndcg += ndcg_at_n(ranked, s.needles, n);
        }
    };
    for (std::size_t i = 0; i < samples.size(); ++i) {
        add(report, samples[i], rankings[i]);
        auto& hop = report.by_hop[samples[i].hops];
        hop.strategy = report.strategy;
        add(hop, samples[i], rankings[i]);
    }
    auto finish = [](RetrievalReport& r) {
        for (auto& [n, s] : r.by_cutoff) {
            s.recall /= static_cast<double>(r.samples);
            s.ndcg /= static_cast<double>(r.samples);
        }
    };
    finish(report);
    for (auto& [h, r] : report.by_hop) finish(r);
    return report;
}

}  // namespace hc

#include "haystackcraft/haystack.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <unordered_set>

#include "haystackcraft/error.hpp"

namespace hc {

namespace {

// std::uniform_int_distribution differs between standard libraries; this
// keeps permutations identical everywhere for a given seed.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t range) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % range;
}

}  // namespace

std::size_t Haystack::total_tokens() const {
    std::size_t total = 0;
    for (const auto& m : members) total += m.tokens;
    return total;
}

std::string OrderingPolicy::tag() const {
    return kind == Kind::RetrieverRanked ? "ranked" : "random:" + std::to_string(seed);
}

std::size_t needle_tokens(const QASample& sample, const Corpus& corpus) {
    std::size_t total = 0;
    for (const auto& id : sample.needles) total += corpus.at(id).token_count;
    return total;
}

Haystack assemble_haystack(const QASample& sample, const RankedList& ranked, const Corpus& corpus,
                           const Tokenizer& tokenizer, std::size_t budget) {
    if (tokenizer.name() != corpus.tokenizer_name())
        throw Error(ErrorCode::Validation, "tokenizer '" + tokenizer.name() + "' does not match the corpus token counts ('" +
                                               corpus.tokenizer_name() + "')");
    Haystack h;
    h.query_id = sample.id;
    h.budget = budget;

    std::unordered_set<std::string_view> needles;
    std::size_t used = 0;
    for (const auto& id : sample.needles) {
        const auto& doc = corpus.at(id);
        needles.insert(doc.id);
        h.members.push_back({doc.id, doc.body, doc.token_count, true, false});
        used += doc.token_count;
    }
    if (used > budget)
        throw Error(ErrorCode::Validation, "budget too small for needle set of sample '" + sample.id + "' (" +
                                               std::to_string(used) + " > " + std::to_string(budget) + " tokens)");

    // Returns false once the haystack is closed.
    auto offer = [&](const Document& doc) {
        if (needles.contains(doc.id)) return true;
        if (used + doc.token_count <= budget) {
            h.members.push_back({doc.id, doc.body, doc.token_count, false, false});
            used += doc.token_count;
            return used < budget;
        }
        const std::size_t residual = budget - used;
        if (residual > 0) {
            auto cut = tokenizer.truncate(doc.body, residual);
            auto tokens = tokenizer.count(cut);
            if (tokens > 0) {
                h.members.push_back({doc.id, std::move(cut), tokens, false, true});
                used += tokens;
            }
        }
        return false;
    };

    std::unordered_set<std::string_view> offered;
    for (const auto& e : ranked.entries()) {
        offered.insert(e.doc_id);
        if (!offer(corpus.at(e.doc_id))) return h;
    }
    for (const auto& doc : corpus.documents()) {
        if (offered.contains(doc.id)) continue;
        if (!offer(doc)) return h;
    }
    return h;
}

std::vector<std::size_t> order_haystack(const Haystack& haystack, const RankedList& ranked, const OrderingPolicy& policy) {
    std::vector<std::size_t> order(haystack.members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    if (policy.kind == OrderingPolicy::Kind::Random) {
        std::mt19937_64 rng(policy.seed);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
        return order;
    }

    auto ranks = ranked.rank_index();
    constexpr auto unranked = std::numeric_limits<std::size_t>::max();
    auto rank_of = [&](std::size_t i) {
        auto it = ranks.find(haystack.members[i].doc_id);
        return it == ranks.end() ? unranked : it->second;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto ra = rank_of(a);
        auto rb = rank_of(b);
        if (ra != rb) return ra < rb;
        return haystack.members[a].doc_id < haystack.members[b].doc_id;
    });
    return order;
}

}  // namespace hc

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "haystackcraft/corpus.hpp"
#include "haystackcraft/retrieval.hpp"
#include "haystackcraft/tokenizer.hpp"

namespace hc {

struct HaystackMember {
    std::string doc_id;
    std::string text;
    std::size_t tokens = 0;
    bool is_needle = false;
    bool was_truncated = false;

    bool operator==(const HaystackMember&) const = default;
};

/// Needles first, then admitted distractors in admission order. Ordering for
/// presentation is a separate step.
struct Haystack {
    std::string query_id;
    std::size_t budget = 0;
    std::vector<HaystackMember> members;

    std::size_t total_tokens() const;
};

struct OrderingPolicy {
    enum class Kind { RetrieverRanked, Random };

    Kind kind = Kind::RetrieverRanked;
    std::uint64_t seed = 0;

    static OrderingPolicy ranked() { return {}; }
    static OrderingPolicy random(std::uint64_t seed) { return {Kind::Random, seed}; }

    /// "ranked" or "random:<seed>".
    std::string tag() const;
};

/// Forces every needle in, then fills with distractors in `ranked` order
/// (needles skipped), then with unranked corpus documents in doc_id order.
/// The first distractor that does not fit whole is truncated to the residual
/// budget and closes the haystack. Throws Error(Validation) if the needles
/// alone exceed `budget`.
Haystack assemble_haystack(const QASample& sample, const RankedList& ranked, const Corpus& corpus,
                           const Tokenizer& tokenizer, std::size_t budget);

/// Total cached token count of the sample's needles.
std::size_t needle_tokens(const QASample& sample, const Corpus& corpus);

/// Returns member indices in presentation order. Ranked: by rank in `ranked`,
/// members absent from it last in doc_id order. Random: seeded Fisher-Yates.
std::vector<std::size_t> order_haystack(const Haystack& haystack, const RankedList& ranked, const OrderingPolicy& policy);

enum class PromptTemplate { Static, DynamicIntermediate, DynamicFinal, Variable };

std::string_view template_name(PromptTemplate t);

struct RenderedMember {
    std::string_view title;
    std::string_view text;
};

/// "Title: <title>\n<text>" per member, joined by a blank line.
std::string render_haystack(std::span<const RenderedMember> members);

/// Instantiates the prompt template. `analyses` joined by blank lines, or
/// "(none)" when empty. A DynamicFinal prompt with no analyses renders the
/// Static template, so a single enforced round is exactly a static run.
std::string render_prompt(std::span<const RenderedMember> members, std::string_view question, PromptTemplate tmpl,
                          std::span<const std::string> analyses = {});

/// Convenience: resolves titles through the corpus in the given order.
std::string render_prompt(const Haystack& haystack, std::span<const std::size_t> order, const Corpus& corpus,
                          std::string_view question, PromptTemplate tmpl, std::span<const std::string> analyses = {});

}  // namespace hc

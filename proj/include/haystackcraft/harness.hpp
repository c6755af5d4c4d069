#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "haystackcraft/corpus.hpp"
#include "haystackcraft/haystack.hpp"
#include "haystackcraft/metrics.hpp"
#include "haystackcraft/model_client.hpp"
#include "haystackcraft/pipeline.hpp"
#include "haystackcraft/tokenizer.hpp"

namespace hc {

/// Text following the last case-insensitive "the correct answer is", with
/// wrapping quotes/parentheses and a terminal period removed.
std::optional<std::string> extract_answer(std::string_view response);

struct IntermediateAnalysis {
    std::string summary;
    std::string refined_question;
};

/// Finds a line-anchored "Summary:" and the last line-anchored
/// "Refined Question:" after it. Missing markers or an empty refined question
/// yield nullopt.
std::optional<IntermediateAnalysis> parse_intermediate(std::string_view response);

/// How much context a sample gets.
enum class ContextMode {
    Haystack,     // needles + distractors up to the budget
    NeedlesOnly,  // budget shrunk to the needle total ("0" column)
    None,         // no documents at all (contamination probe)
};

std::string_view context_mode_name(ContextMode m);

struct EvalSettings {
    std::size_t budget = 8192;
    ContextMode context = ContextMode::Haystack;
    OrderingPolicy ordering;
    /// Missing answer marker scores 0 instead of scoring the raw response.
    bool strict_answer = false;
    /// Final-round prompts ask the original question instead of the latest.
    bool final_uses_original = false;
};

struct DynamicMode {
    enum class Kind { Enforced, Variable };

    Kind kind = Kind::Enforced;
    std::size_t rounds = 2;  // enforced: exact count; variable: cap

    static DynamicMode enforced(std::size_t rounds) { return {Kind::Enforced, rounds}; }
    static DynamicMode variable(std::size_t max_rounds = 3) { return {Kind::Variable, max_rounds}; }

    std::string tag() const;
};

struct EvalResult {
    std::string sample_id;
    std::string retriever;
    std::size_t budget = 0;
    std::string context = "haystack";
    std::string ordering = "ranked";
    std::string mode = "static";
    int hops = 1;
    std::size_t rounds_used = 0;
    std::string predicted;
    bool answer_extracted = false;
    F1Score f1;
    std::optional<std::string> error;

    bool errored() const { return error.has_value(); }
};

struct TraceRecord {
    std::size_t round = 1;
    std::string template_name;
    std::string query;
    std::string haystack_digest;
    std::string prompt_hash;
    std::string response;
    std::optional<std::string> summary;
    std::optional<std::string> refined_question;
    bool parse_fallback = false;
    bool final = false;
};

struct DynamicTrace {
    std::string sample_id;
    std::string retriever;
    std::size_t budget = 0;
    std::string ordering;
    std::string mode;
    std::vector<TraceRecord> records;
    std::string termination;  // answered | rounds_exhausted | parse_fallback
    std::optional<std::string> error;
};

/// Everything a sample evaluation reads. The tokenizer must be the one the
/// corpus token counts were produced with.
struct EvalContext {
    const Corpus& corpus;
    const Tokenizer& tokenizer;
    const Retriever& retriever;
    ModelClient& client;
};

/// Builds, orders and renders the haystack of one round and returns the
/// prompt along with the presented member ids.
struct RoundInput {
    std::string prompt;
    std::vector<std::string> member_ids;
    std::string haystack_digest;
};

RoundInput prepare_round(const QASample& sample, const RetrieverSpec& spec, const EvalSettings& settings,
                         const EvalContext& ctx, const std::string& query_id, const std::string& query,
                         const std::string& prompt_question, PromptTemplate tmpl, std::span<const std::string> analyses);

/// Effective token budget for the sample under `settings`.
std::size_t effective_budget(const QASample& sample, const EvalSettings& settings, const Corpus& corpus);

/// Single-round evaluation. Errors raised while evaluating mark the result
/// errored instead of propagating.
EvalResult run_static(const QASample& sample, const RetrieverSpec& spec, const EvalSettings& settings,
                      const EvalContext& ctx);

/// Multi-round evaluation; needles stay those of the original sample in every
/// round while ranking follows the latest query.
std::pair<EvalResult, DynamicTrace> run_dynamic(const QASample& sample, const RetrieverSpec& spec,
                                                const EvalSettings& settings, const EvalContext& ctx,
                                                const DynamicMode& mode);

struct EvalJob {
    const QASample* sample = nullptr;
    RetrieverSpec spec;
    EvalSettings settings;
    std::optional<DynamicMode> mode;  // nullopt: static
};

struct EvalOutcome {
    EvalResult result;
    std::optional<DynamicTrace> trace;
};

/// Evaluates jobs with at most `concurrency` in flight. `sink` is called from
/// one thread at a time, in job order, as soon as each prefix completes.
void run_jobs(std::span<const EvalJob> jobs, const EvalContext& ctx, std::size_t concurrency,
              const std::function<void(std::size_t, const EvalOutcome&)>& sink);

/// 16 hex digits of FNV-1a 64.
std::string fnv1a_hex(std::string_view data);

}  // namespace hc

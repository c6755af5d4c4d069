#include "haystackcraft/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "haystackcraft/error.hpp"

namespace hc {

namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    auto issp = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && issp(s.front())) s.remove_prefix(1);
    while (!s.empty() && issp(s.back())) s.remove_suffix(1);
    return s;
}

bool strip_prefix_any(std::string_view& s, std::initializer_list<std::string_view> options) {
    for (auto o : options) {
        if (s.starts_with(o)) {
            s.remove_prefix(o.size());
            return true;
        }
    }
    return false;
}

bool strip_suffix_any(std::string_view& s, std::initializer_list<std::string_view> options) {
    for (auto o : options) {
        if (s.ends_with(o)) {
            s.remove_suffix(o.size());
            return true;
        }
    }
    return false;
}

// Position just past `marker` when `line` starts with it (ignoring leading
// whitespace and markdown emphasis), else npos.
std::size_t match_marker(std::string_view line, std::string_view marker) {
    std::size_t i = 0;
    while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) || line[i] == '*' || line[i] == '#')) ++i;
    if (lower_ascii(line.substr(i, marker.size())) != marker) return std::string_view::npos;
    i += marker.size();
    while (i < line.size() && line[i] == '*') ++i;
    return i;
}

std::string query_id_for(const QASample& sample, const std::string& query, std::size_t round) {
    return query == sample.question ? sample.id : sample.id + "@r" + std::to_string(round);
}

EvalResult base_result(const QASample& sample, const RetrieverSpec& spec, const EvalSettings& settings) {
    EvalResult r;
    r.sample_id = sample.id;
    r.retriever = spec.tag();
    r.budget = settings.context == ContextMode::Haystack ? settings.budget : 0;
    r.context = std::string(context_mode_name(settings.context));
    r.ordering = settings.ordering.tag();
    r.hops = sample.hops;
    return r;
}

void score(EvalResult& r, const QASample& sample, const std::string& response, const EvalSettings& settings) {
    auto answer = extract_answer(response);
    r.answer_extracted = answer.has_value();
    r.predicted = answer.value_or(response);
    if (answer || !settings.strict_answer) r.f1 = answer_f1(r.predicted, sample.answer, sample.aliases);
}

}  // namespace

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::optional<std::string> extract_answer(std::string_view response) {
    static constexpr std::string_view marker = "the correct answer is";
    auto pos = lower_ascii(response).rfind(marker);
    if (pos == std::string::npos) return std::nullopt;
    std::string_view tail = response.substr(pos + marker.size());
    if (auto nl = tail.find('\n'); nl != std::string_view::npos) tail = tail.substr(0, nl);
    tail = trim(tail);
    if (tail.starts_with(":")) tail = trim(tail.substr(1));
    bool changed = true;
    while (changed && !tail.empty()) {
        changed = strip_suffix_any(tail, {".", "\"", "'", ")", "\xE2\x80\x9D", "\xE2\x80\x99", "*"});
        changed |= strip_prefix_any(tail, {"\"", "'", "(", "\xE2\x80\x9C", "\xE2\x80\x98", "*"});
        tail = trim(tail);
    }
    if (tail.empty()) return std::nullopt;
    return std::string(tail);
}

std::optional<IntermediateAnalysis> parse_intermediate(std::string_view response) {
    std::vector<std::pair<std::size_t, std::string_view>> lines;  // (offset, line)
    for (std::size_t start = 0; start <= response.size();) {
        auto nl = response.find('\n', start);
        auto end = nl == std::string_view::npos ? response.size() : nl;
        lines.emplace_back(start, response.substr(start, end - start));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    std::optional<std::size_t> summary_line;
    std::size_t summary_body = 0;
    for (std::size_t i = 0; i < lines.size() && !summary_line; ++i) {
        if (auto at = match_marker(lines[i].second, "summary:"); at != std::string_view::npos) {
            summary_line = i;
            summary_body = lines[i].first + at;
        }
    }
    if (!summary_line) return std::nullopt;
    std::optional<std::size_t> refined_line;
    std::size_t refined_body = 0;
    for (std::size_t i = *summary_line + 1; i < lines.size(); ++i) {
        if (auto at = match_marker(lines[i].second, "refined question:"); at != std::string_view::npos) {
            refined_line = i;
            refined_body = lines[i].first + at;
        }
    }
    if (!refined_line) return std::nullopt;
    IntermediateAnalysis out;
    out.summary = std::string(trim(response.substr(summary_body, lines[*refined_line].first - summary_body)));
    out.refined_question = std::string(trim(response.substr(refined_body)));
    if (out.refined_question.empty()) return std::nullopt;
    return out;
}

std::string_view context_mode_name(ContextMode m) {
    switch (m) {
        case ContextMode::Haystack: return "haystack";
        case ContextMode::NeedlesOnly: return "needles-only";
        case ContextMode::None: return "none";
    }
    return "haystack";
}

std::string DynamicMode::tag() const {
    return (kind == Kind::Enforced ? "enforced:" : "variable:") + std::to_string(rounds);
}

std::size_t effective_budget(const QASample& sample, const EvalSettings& settings, const Corpus& corpus) {
    switch (settings.context) {
        case ContextMode::Haystack: return settings.budget;
        case ContextMode::NeedlesOnly: return needle_tokens(sample, corpus);
        case ContextMode::None: return 0;
    }
    return settings.budget;
}

RoundInput prepare_round(const QASample& sample, const RetrieverSpec& spec, const EvalSettings& settings,
                         const EvalContext& ctx, const std::string& query_id, const std::string& query,
                         const std::string& prompt_question, PromptTemplate tmpl, std::span<const std::string> analyses) {
    RoundInput in;
    if (settings.context == ContextMode::None) {
        in.prompt = render_prompt(std::span<const RenderedMember>{}, prompt_question, tmpl, analyses);
        in.haystack_digest = fnv1a_hex("");
        return in;
    }
    // Needles-only haystacks never admit a distractor, so no ranking is needed.
    RankedList ranked = settings.context == ContextMode::NeedlesOnly ? RankedList(query_id, spec.tag(), {})
                                                                     : ctx.retriever.rank(spec, query_id, query);
    auto haystack = assemble_haystack(sample, ranked, ctx.corpus, ctx.tokenizer,
                                      effective_budget(sample, settings, ctx.corpus));
    auto order = order_haystack(haystack, ranked, settings.ordering);
    in.prompt = render_prompt(haystack, order, ctx.corpus, prompt_question, tmpl, analyses);
    std::string digest_input;
    for (auto i : order) {
        const auto& m = haystack.members[i];
        in.member_ids.push_back(m.doc_id);
        digest_input += m.doc_id;
        digest_input += m.was_truncated ? ":t:" + std::to_string(m.tokens) : ":f";
        digest_input += '\n';
    }
    in.haystack_digest = fnv1a_hex(digest_input);
    return in;
}

EvalResult run_static(const QASample& sample, const RetrieverSpec& spec, const EvalSettings& settings,
                      const EvalContext& ctx) {
    auto result = base_result(sample, spec, settings);
    try {
        auto in = prepare_round(sample, spec, settings, ctx, sample.id, sample.question, sample.question,
                                PromptTemplate::Static, {});
        ModelRequest req{sample.id, 1, PromptTemplate::Static, sample.question, std::move(in.prompt), std::move(in.member_ids)};
        auto response = ctx.client.complete(req);
        result.rounds_used = 1;
        score(result, sample, response, settings);
    } catch (const std::exception& e) {
        result.error = e.what();
    }
    return result;
}

std::pair<EvalResult, DynamicTrace> run_dynamic(const QASample& sample, const RetrieverSpec& spec,
                                                const EvalSettings& settings, const EvalContext& ctx,
                                                const DynamicMode& mode) {
    auto result = base_result(sample, spec, settings);
    result.mode = mode.tag();
    DynamicTrace trace;
    trace.sample_id = sample.id;
    trace.retriever = result.retriever;
    trace.budget = result.budget;
    trace.ordering = result.ordering;
    trace.mode = result.mode;

    if (mode.rounds < 1) {
        result.error = trace.error = "dynamic mode needs at least one round";
        return {result, trace};
    }

    std::string query = sample.question;
    std::vector<std::string> analyses;
    try {
        for (std::size_t round = 1; round <= mode.rounds; ++round) {
            const bool last = round == mode.rounds;
            PromptTemplate tmpl = last ? PromptTemplate::DynamicFinal
                                       : (mode.kind == DynamicMode::Kind::Enforced ? PromptTemplate::DynamicIntermediate
                                                                                   : PromptTemplate::Variable);
            if (tmpl == PromptTemplate::DynamicFinal && analyses.empty()) tmpl = PromptTemplate::Static;
            const bool answer_round = tmpl == PromptTemplate::DynamicFinal || tmpl == PromptTemplate::Static;
            const std::string& prompt_question = answer_round && settings.final_uses_original ? sample.question : query;

            auto in = prepare_round(sample, spec, settings, ctx, query_id_for(sample, query, round), query,
                                    prompt_question, tmpl, analyses);
            TraceRecord rec;
            rec.round = round;
            rec.template_name = std::string(template_name(tmpl));
            rec.query = query;
            rec.haystack_digest = in.haystack_digest;
            rec.prompt_hash = fnv1a_hex(in.prompt);

            ModelRequest req{sample.id, round, tmpl, prompt_question, std::move(in.prompt), std::move(in.member_ids)};
            rec.response = ctx.client.complete(req);
            result.rounds_used = round;

            if (answer_round || (tmpl == PromptTemplate::Variable && extract_answer(rec.response))) {
                rec.final = true;
                rec.parse_fallback = !extract_answer(rec.response).has_value();
                score(result, sample, rec.response, settings);
                if (rec.parse_fallback)
                    trace.termination = "parse_fallback";
                else if (mode.kind == DynamicMode::Kind::Variable && last)
                    trace.termination = "rounds_exhausted";
                else
                    trace.termination = "answered";
                trace.records.push_back(std::move(rec));
                break;
            }

            if (auto parsed = parse_intermediate(rec.response)) {
                rec.summary = parsed->summary;
                rec.refined_question = parsed->refined_question;
                analyses.push_back(std::move(parsed->summary));
                query = std::move(parsed->refined_question);
            } else {
                rec.parse_fallback = true;
                analyses.push_back(rec.response);
            }
            trace.records.push_back(std::move(rec));
        }
    } catch (const std::exception& e) {
        result.error = e.what();
        trace.error = e.what();
    }
    return {result, trace};
}

void run_jobs(std::span<const EvalJob> jobs, const EvalContext& ctx, std::size_t concurrency,
              const std::function<void(std::size_t, const EvalOutcome&)>& sink) {
    auto evaluate = [&](const EvalJob& job) {
        EvalOutcome out;
        if (job.mode) {
            auto [result, trace] = run_dynamic(*job.sample, job.spec, job.settings, ctx, *job.mode);
            out.result = std::move(result);
            out.trace = std::move(trace);
        } else {
            out.result = run_static(*job.sample, job.spec, job.settings, ctx);
        }
        return out;
    };

    const std::size_t workers = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(jobs.size(), 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) sink(i, evaluate(jobs[i]));
        return;
    }

    std::vector<std::optional<EvalOutcome>> slots(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::size_t emitted = 0;
    std::exception_ptr sink_failure;

    auto worker = [&] {
        for (;;) {
            auto i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            auto outcome = evaluate(jobs[i]);
            std::lock_guard lock(mutex);
            slots[i] = std::move(outcome);
            while (!sink_failure && emitted < slots.size() && slots[emitted]) {
                try {
                    sink(emitted, *slots[emitted]);
                } catch (...) {
                    sink_failure = std::current_exception();
                    next = jobs.size();
                }
                slots[emitted].reset();
                ++emitted;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (sink_failure) std::rethrow_exception(sink_failure);
}

}  // namespace hc

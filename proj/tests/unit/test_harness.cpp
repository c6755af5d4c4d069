#include <doctest.h>

#include <mutex>

#include "haystackcraft/error.hpp"
#include "haystackcraft/harness.hpp"
#include "test_support.hpp"

using namespace hc;
using Scripts = std::map<std::string, std::vector<std::string>>;

namespace {

class Recorder final : public ModelClient {
public:
    explicit Recorder(ModelClient& inner) : inner_(inner) {}
    std::string complete(const ModelRequest& r) override {
        std::lock_guard lock(mutex_);
        seen.push_back(r);
        return inner_.complete(r);
    }
    std::vector<ModelRequest> seen;

private:
    ModelClient& inner_;
    std::mutex mutex_;
};

struct World {
    Corpus corpus = load_corpus(hctest::fixture("mini_corpus.jsonl"), ReferenceTokenizer{});
    QASet qa = load_qa_samples(hctest::fixture("mini_qa.jsonl"), corpus);
    SparseIndex sparse = SparseIndex::build(corpus);
    ReferenceTokenizer tok;
    Retriever retriever{corpus, &sparse, nullptr, nullptr, {}};

    EvalContext ctx(ModelClient& client) { return {corpus, tok, retriever, client}; }
    const QASample& sample(const std::string& id) { return *qa.find(id); }
};

EvalSettings at_budget(std::size_t b) {
    EvalSettings s;
    s.budget = b;
    return s;
}

const RetrieverSpec kBm25 = RetrieverSpec::parse("bm25");

}  // namespace

TEST_CASE("answer extraction") {
    CHECK(extract_answer("The correct answer is \"North Sea\".") == "North Sea");
    CHECK(extract_answer("the correct answer is (4 March 1890)") == "4 March 1890");
    CHECK(extract_answer("**The correct answer is: Taunton**") == "Taunton");
    CHECK(extract_answer("The correct answer is Frome. Wait, the correct answer is Somerset.") == "Somerset");
    CHECK(extract_answer("The correct answer is Somerset\nbecause Frome lies there.") == "Somerset");
    CHECK(extract_answer("I think it is Somerset.") == std::nullopt);
    CHECK(extract_answer("The correct answer is .") == std::nullopt);
    CHECK(extract_answer("") == std::nullopt);
}

TEST_CASE("intermediate response parsing") {
    auto a = parse_intermediate("Summary: the bridge\nspans the firth\nRefined Question: Which sea?");
    REQUIRE(a);
    CHECK(a->summary == "the bridge\nspans the firth");
    CHECK(a->refined_question == "Which sea?");

    auto md = parse_intermediate("**Summary:** x\n\n**Refined Question:** y\n");
    REQUIRE(md);
    CHECK(md->summary == "x");
    CHECK(md->refined_question == "y");

    auto twice = parse_intermediate("summary: s\nrefined question: first\nrefined question: second");
    REQUIRE(twice);
    CHECK(twice->refined_question == "second");
    CHECK(twice->summary == "s\nrefined question: first");

    CHECK_FALSE(parse_intermediate("Summary: only a summary"));
    CHECK_FALSE(parse_intermediate("My Summary: x\nRefined Question: y"));
    CHECK_FALSE(parse_intermediate("Refined Question: y\nSummary: x"));
    CHECK_FALSE(parse_intermediate("Summary: x\nRefined Question:   "));
}

TEST_CASE("static run scores the extracted answer") {
    World w;
    ScriptedClient script(Scripts{{"q2", {"Reasoning...\nThe correct answer is the North Sea."}}});
    Recorder rec(script);
    auto r = run_static(w.sample("q2"), kBm25, at_budget(64), w.ctx(rec));
    CHECK_FALSE(r.errored());
    CHECK(r.predicted == "the North Sea");
    CHECK(r.answer_extracted);
    CHECK(r.f1.f1 == 1.0);
    CHECK(r.rounds_used == 1);
    CHECK(r.mode == "static");
    CHECK(r.hops == 2);
    REQUIRE(rec.seen.size() == 1);
    CHECK(rec.seen[0].kind == PromptTemplate::Static);
    for (const auto& n : w.sample("q2").needles)
        CHECK(std::find(rec.seen[0].member_ids.begin(), rec.seen[0].member_ids.end(), n) != rec.seen[0].member_ids.end());
}

TEST_CASE("missing answer marker scores the raw response unless strict") {
    World w;
    ScriptedClient script(Scripts{{"*", {"North Sea"}}});
    auto loose = run_static(w.sample("q2"), kBm25, at_budget(64), w.ctx(script));
    CHECK_FALSE(loose.answer_extracted);
    CHECK(loose.f1.f1 == 1.0);
    auto strict_settings = at_budget(64);
    strict_settings.strict_answer = true;
    auto strict = run_static(w.sample("q2"), kBm25, strict_settings, w.ctx(script));
    CHECK(strict.predicted == "North Sea");
    CHECK(strict.f1.f1 == 0.0);
}

TEST_CASE("errors mark the result instead of escaping") {
    World w;
    ScriptedClient empty(Scripts{});
    auto r = run_static(w.sample("q1"), kBm25, at_budget(64), w.ctx(empty));
    CHECK(r.errored());
    CHECK(r.f1.f1 == 0.0);

    ScriptedClient ok(Scripts{{"*", {"The correct answer is x."}}});
    auto tight = run_static(w.sample("q4"), kBm25, at_budget(5), w.ctx(ok));
    REQUIRE(tight.errored());
    CHECK(tight.error->find("budget too small") != std::string::npos);
}

TEST_CASE("enforced two rounds: hand-walked trace") {
    World w;
    const auto& s = w.sample("q2");
    ScriptedClient script(Scripts{{"q2",
                            {"Summary: The bridge crosses the Firth of Forth.\nRefined Question: Which sea does the Firth of Forth flow into?",
                             "The correct answer is North Sea."}}});
    Recorder rec(script);
    auto [r, trace] = run_dynamic(s, kBm25, at_budget(64), w.ctx(rec), DynamicMode::enforced(2));
    CHECK_FALSE(r.errored());
    CHECK(r.mode == "enforced:2");
    CHECK(r.rounds_used == 2);
    CHECK(r.f1.f1 == 1.0);
    CHECK(trace.termination == "answered");
    REQUIRE(trace.records.size() == 2);

    CHECK(trace.records[0].template_name == "dynamic-intermediate");
    CHECK(trace.records[0].query == s.question);
    CHECK(trace.records[0].summary == "The bridge crosses the Firth of Forth.");
    CHECK(trace.records[1].template_name == "dynamic-final");
    CHECK(trace.records[1].query == "Which sea does the Firth of Forth flow into?");
    CHECK(trace.records[1].final);

    // Round two ranks with the refined query and asks it, with the summary as analysis.
    std::vector<std::string> analyses{"The bridge crosses the Firth of Forth."};
    auto in = prepare_round(s, kBm25, at_budget(64), w.ctx(rec), "q2@r2", "Which sea does the Firth of Forth flow into?",
                            "Which sea does the Firth of Forth flow into?", PromptTemplate::DynamicFinal, analyses);
    REQUIRE(rec.seen.size() == 2);
    CHECK(rec.seen[1].prompt == in.prompt);
    CHECK(rec.seen[1].member_ids == in.member_ids);
    CHECK(trace.records[1].haystack_digest == in.haystack_digest);
    CHECK(trace.records[1].prompt_hash == fnv1a_hex(in.prompt));

    SUBCASE("final round can ask the original question") {
        ScriptedClient again(Scripts{{"q2", {"Summary: s\nRefined Question: other?", "The correct answer is North Sea."}}});
        Recorder rec2(again);
        auto settings = at_budget(64);
        settings.final_uses_original = true;
        run_dynamic(s, kBm25, settings, w.ctx(rec2), DynamicMode::enforced(2));
        REQUIRE(rec2.seen.size() == 2);
        CHECK(rec2.seen[1].question == s.question);
    }
}

TEST_CASE("enforced three rounds with an unparseable middle round") {
    World w;
    const auto& s = w.sample("q3");
    ScriptedClient script(Scripts{{"q3",
                            {"Summary: Fowler worked with Baker.\nRefined Question: Where was Benjamin Baker born?",
                             "Baker was born in Frome.",
                             "The correct answer is Somerset, England."}}});
    Recorder rec(script);
    auto [r, trace] = run_dynamic(s, kBm25, at_budget(128), w.ctx(rec), DynamicMode::enforced(3));
    CHECK(r.rounds_used == 3);
    CHECK(r.f1.f1 == 1.0);
    REQUIRE(trace.records.size() == 3);
    CHECK(trace.records[1].parse_fallback);
    CHECK(trace.records[1].query == "Where was Benjamin Baker born?");
    // The unparsed response becomes the analysis; the query stays put.
    CHECK(trace.records[2].query == "Where was Benjamin Baker born?");
    CHECK(rec.seen[2].prompt.find("Previous Analyses: Fowler worked with Baker.\n\nBaker was born in Frome.\n\n") !=
          std::string::npos);
    CHECK(trace.termination == "answered");
}

TEST_CASE("a single enforced round is exactly a static run") {
    World w;
    NeedleOracleClient oracle(w.qa, 3);
    Recorder a(oracle), b(oracle);
    for (const auto& s : w.qa.samples) {
        auto st = run_static(s, kBm25, at_budget(128), w.ctx(a));
        auto [dy, trace] = run_dynamic(s, kBm25, at_budget(128), w.ctx(b), DynamicMode::enforced(1));
        CHECK(st.f1.f1 == dy.f1.f1);
        CHECK(st.predicted == dy.predicted);
        CHECK(trace.records.size() == 1);
        CHECK(trace.records[0].template_name == "static");
    }
    REQUIRE(a.seen.size() == b.seen.size());
    for (std::size_t i = 0; i < a.seen.size(); ++i) CHECK(a.seen[i].prompt == b.seen[i].prompt);
}

TEST_CASE("variable mode stops at the first answer") {
    World w;
    const auto& s = w.sample("q2");
    ScriptedClient script(Scripts{{"q2", {"Summary: s\nRefined Question: Where does the Firth of Forth flow?",
                                   "The correct answer is North Sea.", "unused"}}});
    Recorder rec(script);
    auto [r, trace] = run_dynamic(s, kBm25, at_budget(64), w.ctx(rec), DynamicMode::variable(3));
    CHECK(r.rounds_used == 2);
    CHECK(r.f1.f1 == 1.0);
    CHECK(trace.termination == "answered");
    CHECK(rec.seen[0].kind == PromptTemplate::Variable);
    CHECK(rec.seen[1].kind == PromptTemplate::Variable);
}

TEST_CASE("variable mode exhausting its rounds") {
    World w;
    const auto& s = w.sample("q2");
    ScriptedClient script(Scripts{{"q2", {"Summary: a\nRefined Question: b?", "Summary: c\nRefined Question: d?",
                                   "The correct answer is North Sea."}}});
    Recorder rec(script);
    auto [r, trace] = run_dynamic(s, kBm25, at_budget(64), w.ctx(rec), DynamicMode::variable(3));
    CHECK(r.rounds_used == 3);
    CHECK(trace.termination == "rounds_exhausted");
    CHECK(rec.seen[2].kind == PromptTemplate::DynamicFinal);

    ScriptedClient mute(Scripts{{"q2", {"Summary: a\nRefined Question: b?", "no idea"}}});
    auto [r2, trace2] = run_dynamic(s, kBm25, at_budget(64), w.ctx(mute), DynamicMode::variable(2));
    CHECK(trace2.termination == "parse_fallback");
    CHECK_FALSE(r2.answer_extracted);
}

TEST_CASE("oracle client answers only when needles lead the haystack") {
    World w;
    auto settings = at_budget(0);
    settings.context = ContextMode::NeedlesOnly;
    NeedleOracleClient sees(w.qa, 4);
    NeedleOracleClient blind(w.qa, 0);
    for (const auto& s : w.qa.samples) {
        auto r = run_static(s, kBm25, settings, w.ctx(sees));
        CHECK(r.f1.f1 == 1.0);
        CHECK(r.context == "needles-only");
        CHECK(r.budget == 0);
        CHECK(run_static(s, kBm25, settings, w.ctx(blind)).f1.f1 == 0.0);
    }
    auto [r, trace] = run_dynamic(w.sample("q3"), kBm25, settings, w.ctx(blind), DynamicMode::enforced(2));
    CHECK(trace.records[1].query == w.sample("q3").question + NeedleOracleClient::kDriftSuffix);
    CHECK(r.predicted == "unknown");
}

TEST_CASE("no-context runs show no documents") {
    World w;
    auto settings = at_budget(0);
    settings.context = ContextMode::None;
    NeedleOracleClient oracle(w.qa, 10);
    Recorder rec(oracle);
    auto r = run_static(w.sample("q1"), kBm25, settings, w.ctx(rec));
    CHECK(r.context == "none");
    CHECK(r.f1.f1 == 0.0);
    CHECK(rec.seen[0].member_ids.empty());
    CHECK(rec.seen[0].prompt.find("Title:") == std::string::npos);
}

TEST_CASE("job runner emits results in job order") {
    World w;
    NeedleOracleClient oracle(w.qa, 2);
    std::vector<EvalJob> jobs;
    for (std::size_t budget : {64, 128, 256})
        for (const auto& s : w.qa.samples) {
            jobs.push_back({&s, kBm25, at_budget(budget), std::nullopt});
            jobs.push_back({&s, RetrieverSpec::parse("bm25+ppr"), at_budget(budget), DynamicMode::enforced(2)});
        }
    auto collect = [&](std::size_t concurrency) {
        std::vector<std::size_t> idx;
        std::vector<std::string> lines;
        run_jobs(jobs, w.ctx(oracle), concurrency, [&](std::size_t i, const EvalOutcome& o) {
            idx.push_back(i);
            lines.push_back(o.result.sample_id + o.result.retriever + std::to_string(o.result.budget) + o.result.predicted +
                            (o.trace ? o.trace->termination : ""));
        });
        for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
        return lines;
    };
    auto serial = collect(1);
    CHECK(serial.size() == jobs.size());
    CHECK(collect(4) == serial);
}

TEST_CASE("fnv1a digest") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

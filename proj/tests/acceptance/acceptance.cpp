// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "haystackcraft/error.hpp"
#include "haystackcraft/harness.hpp"
#include "haystackcraft/metrics.hpp"
#include "haystackcraft/pipeline.hpp"
#include "haystackcraft/ppr.hpp"
#include "haystackcraft/retrieval.hpp"
#include "haystackcraft/workspace.hpp"
#include "test_support.hpp"

using namespace hc;
using Scripts = std::map<std::string, std::vector<std::string>>;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the first few failure messages of a criterion.
struct Checker {
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::vector<std::string> messages;

    void operator()(bool ok, const std::string& what) {
        ++checks;
        if (ok) return;
        ++failures;
        if (messages.size() < 3) messages.push_back(what);
    }
    Outcome outcome(std::string summary) const {
        if (failures == 0) return {true, std::move(summary)};
        std::string d = std::to_string(failures) + "/" + std::to_string(checks) + " checks failed";
        for (const auto& m : messages) d += "; " + m;
        return {false, d};
    }
};

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. BM25

Outcome bm25_oracle() {
    Checker check;
    std::mt19937_64 rng(101);
    double worst = 0.0;
    const double k1 = 1.2, b = 0.75;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t vocab = 1 + rng() % 8;
        const std::size_t ndocs = 1 + rng() % 50;
        std::vector<RawDocument> recs;
        std::vector<std::vector<std::string>> terms(ndocs);
        for (std::size_t d = 0; d < ndocs; ++d) {
            std::string body;
            for (std::size_t w = 0, n = 1 + rng() % 12; w < n; ++w) {
                terms[d].push_back("t" + std::to_string(rng() % vocab));
                body += (w ? " " : "") + terms[d].back();
            }
            char id[8];
            std::snprintf(id, sizeof id, "d%02zu", d);
            recs.push_back({id, "", body, {}, false});
        }
        auto corpus = build_corpus(recs, ReferenceTokenizer{});
        auto index = SparseIndex::build(corpus);

        std::vector<std::string> query;
        for (std::size_t n = 1 + rng() % 4; n > 0; --n) query.push_back("t" + std::to_string(rng() % (vocab + 1)));
        std::string query_text;
        for (const auto& t : query) query_text += t + " ";

        // Formula oracle straight over the raw term lists.
        double avgdl = 0;
        for (const auto& t : terms) avgdl += static_cast<double>(t.size());
        avgdl /= static_cast<double>(ndocs);
        std::vector<std::pair<std::string, double>> want;
        for (std::size_t d = 0; d < ndocs; ++d) {
            double s = 0;
            for (const auto& qt : query) {
                std::size_t df = 0;
                for (const auto& t : terms) df += std::count(t.begin(), t.end(), qt) > 0 ? 1 : 0;
                double tf = static_cast<double>(std::count(terms[d].begin(), terms[d].end(), qt));
                if (tf == 0) continue;
                double idf = std::log(1.0 + (static_cast<double>(ndocs) - static_cast<double>(df) + 0.5) /
                                                (static_cast<double>(df) + 0.5));
                s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * static_cast<double>(terms[d].size()) / avgdl));
            }
            if (s > 0) want.emplace_back(recs[d].id, s);
        }
        std::sort(want.begin(), want.end(), [](const auto& x, const auto& y) {
            return x.second != y.second ? x.second > y.second : x.first < y.first;
        });

        auto got = score_bm25(index, query_text, ndocs);
        if (got.size() != want.size()) {
            check(false, "trial " + std::to_string(trial) + ": list length " + std::to_string(got.size()) + " vs " +
                             std::to_string(want.size()));
            continue;
        }
        for (std::size_t i = 0; i < want.size(); ++i) {
            const auto& e = got.entries()[i];
            double diff = std::abs(e.score - want[i].second);
            worst = std::max(worst, diff);
            // Near-ties may legitimately swap under rounding; compare ids only when scores are apart.
            bool same_doc = e.doc_id == want[i].first;
            if (!same_doc && i + 1 < want.size() && std::abs(want[i].second - want[i + 1].second) < 1e-12) same_doc = true;
            check(same_doc, "trial " + std::to_string(trial) + " rank " + std::to_string(i + 1) + ": " + e.doc_id +
                                " vs " + want[i].first);
            check(diff <= 1e-9, "trial " + std::to_string(trial) + ": score diff " + fmt(diff));
        }
    }
    return check.outcome("100 corpora, max score difference " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 2. PPR

std::vector<double> ppr_dense_solve(std::size_t n, const std::vector<std::vector<NodeId>>& adj,
                                    const std::vector<NodeId>& seeds, double d) {
    std::vector<double> s(n, 0.0);
    std::set<NodeId> uniq(seeds.begin(), seeds.end());
    for (auto v : uniq) s[v] = 1.0 / static_cast<double>(uniq.size());
    std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) A[i][i] = 1.0;
    for (std::size_t u = 0; u < n; ++u) {
        std::set<NodeId> out;
        for (auto v : adj[u])
            if (v != u) out.insert(v);
        // Column u of P^T: dangling nodes jump back to the seeds.
        for (std::size_t i = 0; i < n; ++i) {
            double p = out.empty() ? s[i] : (out.contains(static_cast<NodeId>(i)) ? 1.0 / static_cast<double>(out.size()) : 0.0);
            A[i][u] -= d * p;
        }
    }
    for (std::size_t i = 0; i < n; ++i) A[i][n] = (1.0 - d) * s[i];
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        std::swap(A[c], A[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k <= n; ++k) A[r][k] -= f * A[c][k];
        }
    }
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = A[i][n] / A[i][i];
    return p;
}

Outcome ppr_oracle() {
    Checker check;
    std::mt19937_64 rng(202);
    double worst = 0.0, worst_sum = 0.0;
    std::size_t dangling_graphs = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 20;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) ids.push_back("v" + std::to_string(10 + i));
        std::vector<std::vector<NodeId>> adj(n);
        bool dangling = false;
        for (std::size_t u = 0; u < n; ++u) {
            if (rng() % 3 == 0) {
                dangling = true;
                continue;
            }
            for (std::size_t k = 1 + rng() % 4; k > 0; --k) adj[u].push_back(static_cast<NodeId>(rng() % n));
        }
        dangling_graphs += dangling ? 1 : 0;
        auto graph = HyperlinkGraph::from_adjacency(ids, adj);
        std::vector<NodeId> seeds;
        for (std::size_t k = 1 + rng() % 3; k > 0; --k) seeds.push_back(static_cast<NodeId>(rng() % n));
        for (double d : {0.0, 0.5, 0.85}) {
            PprConfig c;
            c.damping = d;
            auto got = personalized_pagerank(graph, seeds, c);
            auto want = ppr_dense_solve(n, adj, seeds, d);
            double linf = 0.0;
            for (std::size_t i = 0; i < n; ++i) linf = std::max(linf, std::abs(got.mass[i] - want[i]));
            double sum_err = std::abs(got.sum() - 1.0);
            worst = std::max(worst, linf);
            worst_sum = std::max(worst_sum, sum_err);
            check(linf <= 1e-6, "trial " + std::to_string(trial) + " d=" + fmt(d) + ": L-inf " + fmt(linf));
            check(sum_err <= 1e-9, "trial " + std::to_string(trial) + ": mass sum off by " + fmt(sum_err));
        }
    }
    check(dangling_graphs > 0, "no graph had a dangling node");
    return check.outcome("50 graphs x 3 damping values (" + std::to_string(dangling_graphs) + " with dangling nodes), max L-inf " +
                         fmt(worst) + ", max sum error " + fmt(worst_sum));
}

// ---------------------------------------------------------------------------
// 3. RRF

RankedList list_of(const std::vector<std::string>& ids, const std::string& strategy) {
    std::vector<RankedEntry> e;
    for (std::size_t i = 0; i < ids.size(); ++i) e.push_back({ids[i], 1000.0 - static_cast<double>(i), i + 1});
    return RankedList("q", strategy, e);
}

Outcome rrf_check() {
    Checker check;
    std::vector<RankedList> pair{list_of({"x", "y"}, "bm25"), list_of({"x", "z"}, "dense")};
    auto fixed = fuse_rrf(pair, 60);
    double fixed_err = std::abs(fixed.entries()[0].score - 2.0 / 61.0);
    check(fixed.entries()[0].doc_id == "x", "fixed case: x not first");
    check(fixed_err <= 1e-12, "fixed case off by " + fmt(fixed_err));

    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<RankedList> lists;
        std::map<std::string, double> want;
        const int k = 1 + static_cast<int>(rng() % 100);
        for (std::size_t l = 0, nl = 2 + rng() % 3; l < nl; ++l) {
            std::vector<std::string> pool;
            for (int i = 0; i < 30; ++i) pool.push_back("d" + std::to_string(i));
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(rng() % 30);
            for (std::size_t r = 0; r < pool.size(); ++r) want[pool[r]] += 1.0 / (k + static_cast<double>(r + 1));
            lists.push_back(list_of(pool, "l" + std::to_string(l)));
        }
        auto got = fuse_rrf(lists, k);
        check(got.size() == want.size(), "trial " + std::to_string(trial) + ": size mismatch");
        double prev = INFINITY;
        for (const auto& e : got.entries()) {
            double diff = std::abs(e.score - want[e.doc_id]);
            worst = std::max(worst, diff);
            check(diff <= 1e-12, "trial " + std::to_string(trial) + ": " + e.doc_id + " off by " + fmt(diff));
            check(e.score <= prev, "trial " + std::to_string(trial) + ": not sorted");
            prev = e.score;
        }
    }
    return check.outcome("2/61 case error " + fmt(fixed_err) + "; 200 random fusions, max error " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 4. Metrics

Outcome metric_fixtures() {
    Checker check;
    auto ranked = list_of({"x", "a", "y", "b", "z"}, "bm25");
    std::vector<std::string> needles{"a", "b"};
    double ndcg = ndcg_at_n(ranked, needles, 5);
    check(std::abs(ndcg - 0.6510) <= 1e-4, "NDCG " + fmt(ndcg, "%.6f"));

    check(recall_at_n(ranked, needles, 1) == 0.0, "recall@1");
    check(recall_at_n(ranked, needles, 2) == 0.5, "recall@2");
    check(recall_at_n(ranked, needles, 4) == 1.0, "recall@4");
    check(recall_at_n(ranked, needles, 5) == 1.0, "recall@5");

    check(answer_f1("the Firth of Forth", "Firth of Forth").f1 == 1.0, "Firth of Forth");
    // Prediction has 3 tokens, gold 1, overlap 1: P = 1/3, R = 1, F1 = 2/3 * 3/4.
    auto date = answer_f1("15 November 1889", "1889");
    check(date.f1 == 0.5, "date F1 " + fmt(date.f1));
    check(date.precision == 1.0 / 3.0 && date.recall == 1.0, "date P/R");
    check(answer_f1("Leith", "Firth of Forth").f1 == 0.0, "disjoint answer");
    check(normalize_answer("The  Firth, of Forth!") == "firth of forth", "normalization");
    return check.outcome("NDCG " + fmt(ndcg, "%.4f") + ", recall and F1 fixtures exact");
}

// ---------------------------------------------------------------------------
// 5. Haystack invariants

Outcome haystack_invariants() {
    Checker check;
    std::mt19937_64 rng(505);
    ReferenceTokenizer tok;
    std::size_t truncations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<RawDocument> recs;
        const std::size_t n = 2 + rng() % 40;
        for (std::size_t i = 0; i < n; ++i) {
            std::string body;
            for (std::size_t w = 0, words = 1 + rng() % 60; w < words; ++w) body += (w ? (rng() % 9 ? " " : ", ") : "") + std::string("w") + std::to_string(rng() % 50);
            recs.push_back({"doc" + std::to_string(rng() % 100000) + "_" + std::to_string(i), "", body, {}, false});
        }
        auto corpus = build_corpus(recs, tok);
        std::vector<std::string> ids;
        for (const auto& d : corpus.documents()) ids.push_back(d.id);
        std::shuffle(ids.begin(), ids.end(), rng);
        QASample sample{"s", "q?", "a", {}, {ids.begin(), ids.begin() + static_cast<long>(1 + rng() % std::min<std::size_t>(4, n))}, 1};
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(rng() % ids.size());
        auto ranked = list_of(ids, "bm25");

        const std::size_t need = needle_tokens(sample, corpus);
        std::vector<std::size_t> budgets{need};
        for (int k = 0; k < 3; ++k) budgets.push_back(need + rng() % 400);
        std::sort(budgets.begin(), budgets.end());

        std::vector<std::string> prev_ids;
        for (auto budget : budgets) {
            auto h = assemble_haystack(sample, ranked, corpus, tok, budget);
            const std::string where = "trial " + std::to_string(trial) + " budget " + std::to_string(budget);
            check(h.total_tokens() <= budget, where + ": over budget");
            std::multiset<std::string> present;
            std::size_t truncated = 0;
            std::size_t counted = 0;
            for (const auto& m : h.members) {
                present.insert(m.doc_id);
                truncated += m.was_truncated ? 1 : 0;
                counted += tok.count(m.text);
                check(m.tokens == tok.count(m.text), where + ": stale token count");
            }
            check(counted <= budget, where + ": recounted text over budget");
            for (const auto& id : sample.needles) check(present.count(id) == 1, where + ": needle " + id + " not present once");
            check(truncated <= 1, where + ": " + std::to_string(truncated) + " truncated members");
            truncations += truncated;
            std::set<std::string> now(present.begin(), present.end());
            check(now.size() == present.size(), where + ": duplicate member");
            for (const auto& id : prev_ids) check(now.contains(id), where + ": " + id + " dropped at a larger budget");
            prev_ids.assign(now.begin(), now.end());
        }
    }
    return check.outcome("1000 triples x 4 budgets, " + std::to_string(truncations) + " truncated members seen");
}

// ---------------------------------------------------------------------------
// 6. Prompt goldens

Outcome prompt_goldens() {
    Checker check;
    const std::vector<RenderedMember> members{
        {"Forth Bridge", "The Forth Bridge is a railway bridge opened on 4 March 1890."},
        {"Firth of Forth", "The Firth of Forth is the estuary of the River Forth in Scotland."},
    };
    const std::string question = "Which estuary does the Forth Bridge cross?";
    const std::vector<std::string> two{"The bridge is a railway bridge in Scotland.",
                                       "The Firth of Forth is an estuary in Scotland."};
    const std::vector<std::string> one{two[0]};
    auto golden = [](const char* name) { return hctest::read_file(std::string(HC_GOLDEN_DIR) + "/" + name); };
    check(render_prompt(members, question, PromptTemplate::Static) == golden("static.txt"), "static");
    check(render_prompt(members, question, PromptTemplate::DynamicIntermediate) == golden("dynamic_intermediate.txt"),
          "dynamic intermediate");
    check(render_prompt(members, question, PromptTemplate::DynamicFinal, two) == golden("dynamic_final.txt"), "dynamic final");
    check(render_prompt(members, question, PromptTemplate::Variable, one) == golden("variable.txt"), "variable");
    return check.outcome("4 templates byte-identical to golden files");
}

// ---------------------------------------------------------------------------
// 7. Dynamic state machine

class Recorder final : public ModelClient {
public:
    explicit Recorder(ModelClient& inner) : inner_(inner) {}
    std::string complete(const ModelRequest& r) override {
        seen.push_back(r);
        return inner_.complete(r);
    }
    std::vector<ModelRequest> seen;

private:
    ModelClient& inner_;
};

struct Expected {
    std::vector<std::string> queries;                // query each round ranked with
    std::vector<std::vector<std::string>> analyses;  // analyses shown each round
    std::string termination;
};

Outcome dynamic_state_machine() {
    Checker check;
    auto corpus = load_corpus(hctest::fixture("mini_corpus.jsonl"), ReferenceTokenizer{});
    auto qa = load_qa_samples(hctest::fixture("mini_qa.jsonl"), corpus);
    auto sparse = SparseIndex::build(corpus);
    ReferenceTokenizer tok;
    Retriever retriever(corpus, &sparse, nullptr, nullptr, {});
    const auto spec = RetrieverSpec::parse("bm25");
    EvalSettings settings;
    settings.budget = 128;

    const auto& q2 = *qa.find("q2");
    const auto& q3 = *qa.find("q3");
    const std::string r1 = "Which sea does the Firth of Forth flow into?";
    const std::string s1 = "The bridge crosses the Firth of Forth.";

    struct Case {
        const char* name;
        const QASample* sample;
        DynamicMode mode;
        std::vector<std::string> script;
        Expected want;
    };
    std::vector<Case> cases{
        {"enforced:2", &q2, DynamicMode::enforced(2),
         {"Summary: " + s1 + "\nRefined Question: " + r1, "The correct answer is North Sea."},
         {{q2.question, r1}, {{}, {s1}}, "answered"}},
        {"enforced:3", &q3, DynamicMode::enforced(3),
         {"Summary: Fowler worked with Baker.\nRefined Question: Where was Benjamin Baker born?",
          "Summary: Baker was born in Frome.\nRefined Question: Which county is Frome in?",
          "The correct answer is Somerset."},
         {{q3.question, "Where was Benjamin Baker born?", "Which county is Frome in?"},
          {{}, {"Fowler worked with Baker."}, {"Fowler worked with Baker.", "Baker was born in Frome."}},
          "answered"}},
        {"enforced:3 with a malformed round", &q3, DynamicMode::enforced(3),
         {"Summary: Fowler worked with Baker.\nRefined Question: Where was Benjamin Baker born?", "Baker was born in Frome.",
          "The correct answer is Somerset."},
         {{q3.question, "Where was Benjamin Baker born?", "Where was Benjamin Baker born?"},
          {{}, {"Fowler worked with Baker."}, {"Fowler worked with Baker.", "Baker was born in Frome."}},
          "answered"}},
        {"variable:3 early answer", &q2, DynamicMode::variable(3),
         {"Summary: " + s1 + "\nRefined Question: " + r1, "The correct answer is North Sea."},
         {{q2.question, r1}, {{}, {s1}}, "answered"}},
        {"variable:3 exhausted", &q2, DynamicMode::variable(3),
         {"Summary: a\nRefined Question: b?", "Summary: c\nRefined Question: d?", "The correct answer is North Sea."},
         {{q2.question, "b?", "d?"}, {{}, {"a"}, {"a", "c"}}, "rounds_exhausted"}},
        {"variable:2 no marker", &q2, DynamicMode::variable(2),
         {"Summary: a\nRefined Question: b?", "I am not sure."},
         {{q2.question, "b?"}, {{}, {"a"}}, "parse_fallback"}},
    };

    for (const auto& c : cases) {
        ScriptedClient script(Scripts{{c.sample->id, c.script}});
        Recorder rec(script);
        EvalContext ctx{corpus, tok, retriever, rec};
        auto [result, trace] = run_dynamic(*c.sample, spec, settings, ctx, c.mode);
        const std::string where = c.name;
        check(!result.errored(), where + ": errored: " + result.error.value_or(""));
        check(trace.termination == c.want.termination, where + ": termination " + trace.termination);
        check(trace.records.size() == c.want.queries.size(), where + ": " + std::to_string(trace.records.size()) + " rounds");
        for (std::size_t i = 0; i < std::min(trace.records.size(), c.want.queries.size()); ++i) {
            check(trace.records[i].query == c.want.queries[i], where + ": round " + std::to_string(i + 1) + " query '" +
                                                                   trace.records[i].query + "'");
            // Re-render the round from the expected state and compare prompts byte for byte.
            const auto round = i + 1;
            const bool last = round == c.mode.rounds;
            PromptTemplate tmpl = last ? PromptTemplate::DynamicFinal
                                       : (c.mode.kind == DynamicMode::Kind::Enforced ? PromptTemplate::DynamicIntermediate
                                                                                     : PromptTemplate::Variable);
            if (tmpl == PromptTemplate::DynamicFinal && c.want.analyses[i].empty()) tmpl = PromptTemplate::Static;
            const auto& qtext = c.want.queries[i];
            const std::string qid = qtext == c.sample->question ? c.sample->id : c.sample->id + "@r" + std::to_string(round);
            auto in = prepare_round(*c.sample, spec, settings, ctx, qid, qtext, qtext, tmpl, c.want.analyses[i]);
            check(i < rec.seen.size() && rec.seen[i].prompt == in.prompt,
                  where + ": round " + std::to_string(round) + " prompt differs");
        }
    }

    // A single enforced round is the static run.
    NeedleOracleClient oracle(qa, 3);
    Recorder a(oracle), b(oracle);
    EvalContext ca{corpus, tok, retriever, a}, cb{corpus, tok, retriever, b};
    for (const auto& s : qa.samples) {
        auto st = run_static(s, spec, settings, ca);
        auto [dy, trace] = run_dynamic(s, spec, settings, cb, DynamicMode::enforced(1));
        check(st.predicted == dy.predicted && st.f1.f1 == dy.f1.f1, s.id + ": static and enforced:1 scores differ");
    }
    check(a.seen.size() == b.seen.size(), "request counts differ");
    for (std::size_t i = 0; i < std::min(a.seen.size(), b.seen.size()); ++i)
        check(a.seen[i].prompt == b.seen[i].prompt, "enforced:1 prompt " + std::to_string(i) + " differs from static");
    return check.outcome(std::to_string(cases.size()) + " scripted traces match; enforced:1 prompts identical to static on " +
                         std::to_string(qa.samples.size()) + " samples");
}

// ---------------------------------------------------------------------------
// 8. Miniature end-to-end trend

Outcome miniature_trend() {
    Checker check;
    auto planted = hctest::make_planted(808);
    auto corpus = build_corpus(planted.docs, ReferenceTokenizer{});
    auto qa = validate_qa_samples(planted.samples, corpus);
    auto sparse = SparseIndex::build(corpus);
    ReferenceTokenizer tok;
    Retriever retriever(corpus, &sparse, nullptr, nullptr, {});

    const auto bm25 = RetrieverSpec::parse("bm25");
    const auto ppr = RetrieverSpec::parse("bm25+ppr");
    std::vector<RankedList> base, reranked;
    for (const auto& s : qa.samples) {
        base.push_back(retriever.rank(bm25, s.id, s.question));
        reranked.push_back(retriever.rank(ppr, s.id, s.question));
    }
    std::vector<std::size_t> at20{20};
    double r_bm25 = evaluate_retrieval(qa.samples, base, at20).by_cutoff.at(20).recall;
    double r_ppr = evaluate_retrieval(qa.samples, reranked, at20).by_cutoff.at(20).recall;
    check(r_ppr > r_bm25, "Recall@20 bm25+ppr " + fmt(r_ppr) + " <= bm25 " + fmt(r_bm25));

    const std::size_t threshold = 10;
    NeedleOracleClient oracle(qa, threshold);
    EvalContext ctx{corpus, tok, retriever, oracle};
    std::string trend;
    for (const auto& spec : {bm25, ppr}) {
        std::vector<double> means;
        for (std::size_t budget : {1000, 2000, 4000, 8000}) {
            EvalSettings settings;
            settings.budget = budget;
            double sum = 0;
            for (const auto& s : qa.samples) {
                auto r = run_static(s, spec, settings, ctx);
                check(!r.errored(), s.id + ": " + r.error.value_or(""));
                sum += r.f1.f1;
            }
            means.push_back(sum / static_cast<double>(qa.samples.size()));
        }
        trend += " " + spec.tag() + " F1@{1K,2K,4K,8K} =";
        for (double m : means) trend += " " + fmt(m, "%.3f");
        for (std::size_t i = 1; i < means.size(); ++i)
            check(means[i] <= means[i - 1], spec.tag() + ": F1 rises from " + fmt(means[i - 1]) + " to " + fmt(means[i]));
    }
    return check.outcome("Recall@20 bm25 " + fmt(r_bm25, "%.3f") + " < bm25+ppr " + fmt(r_ppr, "%.3f") + ";" + trend +
                         " (K=" + std::to_string(threshold) + ")");
}

// ---------------------------------------------------------------------------
// 9. Determinism

Outcome manifest_determinism() {
    Checker check;
    hctest::TempDir dir;
    auto planted = hctest::make_planted(909, 300, 12);
    hctest::write_file(dir.file("corpus.jsonl"), hctest::corpus_jsonl(planted.docs));
    hctest::write_file(dir.file("qa.jsonl"), hctest::qa_jsonl(planted.samples));

    RunConfig config;
    config.set_value("paths.corpus", dir.file("corpus.jsonl"));
    config.set_value("paths.qa", dir.file("qa.jsonl"));
    config.set_value("paths.out", dir.file("run"));
    config.set_value("retrieval.retrievers", nlohmann::json::array({"bm25", "bm25+ppr"}));
    config.set_value("haystack.budgets", nlohmann::json::array({600, 1200}));
    config.set_value("haystack.order", "random");
    config.set_value("eval.rounds", nlohmann::json::array({2, 3}));
    config.set_value("eval.concurrency", 4);
    config.set_value("client.kind", "oracle");
    config.set_value("client.oracle_threshold", 6);
    Workspace first(config);
    auto original = first.evaluate(EvalKind::Dynamic);
    const auto manifest = dir.file("manifest.json");
    hctest::write_file(manifest, hctest::read_file(original["manifest"].get<std::string>()));

    std::vector<std::pair<std::string, std::string>> runs;
    for (int i = 0; i < 2; ++i) {
        auto ws = Workspace::from_manifest(manifest);
        auto out = ws.evaluate(EvalKind::Dynamic);
        runs.emplace_back(hctest::read_file(out["results"].get<std::string>()),
                          hctest::read_file(out["traces"].get<std::string>()));
    }
    check(!runs[0].first.empty() && !runs[0].second.empty(), "empty output");
    check(runs[0].first == runs[1].first, "results.jsonl differs between runs");
    check(runs[0].second == runs[1].second, "traces.jsonl differs between runs");
    auto lines = std::count(runs[0].first.begin(), runs[0].first.end(), '\n');
    return check.outcome("2 reruns from one manifest, " + std::to_string(lines) +
                         " results and traces byte-identical (3 seeds, concurrency 4)");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;  // 0: no runtime limit
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "BM25 oracle equivalence", 10, bm25_oracle},
        {2, "PPR oracle equivalence", 10, ppr_oracle},
        {3, "RRF correctness", 0, rrf_check},
        {4, "metric fixtures", 0, metric_fixtures},
        {5, "haystack invariants", 30, haystack_invariants},
        {6, "prompt goldens", 0, prompt_goldens},
        {7, "dynamic state machine", 0, dynamic_state_machine},
        {8, "miniature end-to-end trend", 120, miniature_trend},
        {9, "determinism from manifest", 0, manifest_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit_s > 0 && secs > c.limit_s) {
            o.pass = false;
            o.detail += "; runtime " + fmt(secs, "%.2f") + " s over the " + fmt(c.limit_s, "%.0f") + " s limit";
        }
        std::printf("%s %d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}

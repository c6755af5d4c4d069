#include "haystackcraft/serialize.hpp"

#include "haystackcraft/error.hpp"

namespace hc {

using nlohmann::json;

namespace {

json optional_string(const std::optional<std::string>& s) {
    return s ? json(*s) : json(nullptr);
}

}  // namespace

json to_json(const IngestStats& s) {
    return {
        {"records", s.records},
        {"kept", s.kept},
        {"dropped_empty", s.dropped_empty},
        {"dropped_redirect", s.dropped_redirect},
        {"dropped_duplicate", s.dropped_duplicate},
        {"link_mentions", s.link_mentions},
        {"duplicate_links", s.duplicate_links},
        {"self_links", s.self_links},
        {"dangling_links", s.dangling_links},
    };
}

json to_json(const RankedList& list) {
    json entries = json::array();
    for (const auto& e : list.entries()) entries.push_back({{"rank", e.rank}, {"id", e.doc_id}, {"score", e.score}});
    return {{"query_id", list.query_id()}, {"strategy", list.strategy()}, {"entries", std::move(entries)}};
}

json to_json(const RetrievalReport& report) {
    json cutoffs = json::array();
    for (const auto& [n, s] : report.by_cutoff) cutoffs.push_back({{"n", n}, {"recall", s.recall}, {"ndcg", s.ndcg}});
    json j = {{"strategy", report.strategy}, {"samples", report.samples}, {"cutoffs", std::move(cutoffs)}};
    if (!report.by_hop.empty()) {
        json hops = json::object();
        for (const auto& [hop, sub] : report.by_hop) hops[std::to_string(hop)] = to_json(sub);
        j["by_hop"] = std::move(hops);
    }
    return j;
}

json to_json(const EvalResult& r) {
    return {
        {"sample_id", r.sample_id},
        {"retriever", r.retriever},
        {"budget", r.budget},
        {"context", r.context},
        {"ordering", r.ordering},
        {"mode", r.mode},
        {"hops", r.hops},
        {"rounds_used", r.rounds_used},
        {"predicted", r.predicted},
        {"answer_extracted", r.answer_extracted},
        {"precision", r.f1.precision},
        {"recall", r.f1.recall},
        {"f1", r.f1.f1},
        {"error", optional_string(r.error)},
    };
}

EvalResult eval_result_from_json(const json& j) {
    EvalResult r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.retriever = j.at("retriever").get<std::string>();
    r.budget = j.at("budget").get<std::size_t>();
    r.context = j.value("context", std::string("haystack"));
    r.ordering = j.value("ordering", std::string("ranked"));
    r.mode = j.value("mode", std::string("static"));
    r.hops = j.value("hops", 1);
    r.rounds_used = j.value("rounds_used", std::size_t{0});
    r.predicted = j.value("predicted", std::string{});
    r.answer_extracted = j.value("answer_extracted", false);
    r.f1.precision = j.value("precision", 0.0);
    r.f1.recall = j.value("recall", 0.0);
    r.f1.f1 = j.at("f1").get<double>();
    if (j.contains("error") && !j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    return r;
}

json to_json(const DynamicTrace& t) {
    json records = json::array();
    for (const auto& rec : t.records) {
        records.push_back({
            {"round", rec.round},
            {"template", rec.template_name},
            {"query", rec.query},
            {"haystack_digest", rec.haystack_digest},
            {"prompt_hash", rec.prompt_hash},
            {"response", rec.response},
            {"summary", optional_string(rec.summary)},
            {"refined_question", optional_string(rec.refined_question)},
            {"parse_fallback", rec.parse_fallback},
            {"final", rec.final},
        });
    }
    return {
        {"sample_id", t.sample_id},
        {"retriever", t.retriever},
        {"budget", t.budget},
        {"ordering", t.ordering},
        {"mode", t.mode},
        {"records", std::move(records)},
        {"termination", t.termination.empty() ? json(nullptr) : json(t.termination)},
        {"error", optional_string(t.error)},
    };
}

json to_json(const Report& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json hops = json::object();
        for (const auto& [hop, v] : r.by_hop) hops[std::to_string(hop)] = {{"samples", v.first}, {"mean_f1", v.second}};
        rows.push_back({
            {"retriever", r.retriever},
            {"mode", r.mode},
            {"context", r.context},
            {"budget", r.budget},
            {"ordering", r.ordering},
            {"samples", r.samples},
            {"errored", r.errored},
            {"mean_f1", r.mean_f1 ? json(*r.mean_f1) : json(nullptr)},
            {"by_hop", std::move(hops)},
            {"seeds", r.seeds},
            {"seed_spread", r.seed_spread ? json(*r.seed_spread) : json(nullptr)},
        });
    }
    return {{"rows", std::move(rows)}, {"warnings", report.warnings}};
}

json haystack_record(const Haystack& haystack, std::span<const std::size_t> order, const OrderingPolicy& policy) {
    json members = json::array();
    for (auto i : order) {
        const auto& m = haystack.members.at(i);
        members.push_back({{"id", m.doc_id}, {"is_needle", m.is_needle}, {"truncated", m.was_truncated}, {"tokens", m.tokens}});
    }
    return {{"query_id", haystack.query_id}, {"budget", haystack.budget}, {"members", std::move(members)}, {"order", policy.tag()}};
}

}  // namespace hc

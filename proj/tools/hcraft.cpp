#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "haystackcraft/hc.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Options {
    std::string config;
    std::string manifest;
    std::vector<std::string> overrides;
    std::string out;
    std::string sample;
    std::string query;
    std::string retriever = "bm25";
    std::vector<long long> budgets;
    std::string order;
    std::vector<long long> seeds;
    std::size_t top = 100;
    bool no_distractors = false;
    bool no_context = false;
    bool final_uses_original = false;
    bool strict_answer = false;
    std::string mode;
    std::vector<long long> rounds;
    std::string results;
};

struct Workspace {
    hc_workspace* ws = nullptr;
    ~Workspace() { hc_workspace_destroy(ws); }
};

int fail(const char* what) {
    std::fprintf(stderr, "hcraft: %s: %s\n", what, hc_last_error());
    return kExitFailure;
}

std::string json_list(const std::vector<long long>& values) {
    return nlohmann::json(values).dump();
}

bool apply(hc_workspace* ws, const std::string& key, const std::string& value) {
    if (hc_workspace_set(ws, key.c_str(), value.c_str()) == HC_OK) return true;
    std::fprintf(stderr, "hcraft: --set %s: %s\n", key.c_str(), hc_last_error());
    return false;
}

// Returns an exit code when the workspace could not be prepared.
std::optional<int> open_workspace(const Options& o, const std::string& command, Workspace& w) {
    hc_status st = o.manifest.empty()
                       ? hc_workspace_create(o.config.empty() ? nullptr : o.config.c_str(), &w.ws)
                       : hc_workspace_load_manifest(o.manifest.c_str(), &w.ws);
    if (st != HC_OK) return fail(o.manifest.empty() ? "config" : "manifest");

    for (const auto& kv : o.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "hcraft: --set expects key=value, got '%s'\n", kv.c_str());
            return kExitUsage;
        }
        if (!apply(w.ws, kv.substr(0, eq), kv.substr(eq + 1))) return kExitFailure;
    }
    bool ok = true;
    if (!o.out.empty()) ok = ok && apply(w.ws, "paths.out", nlohmann::json(o.out).dump());

    const bool eval = command == "eval-static" || command == "eval-dynamic";
    if (eval) {
        std::vector<long long> budgets;
        bool zero = false;
        for (auto b : o.budgets) {
            if (b == 0)
                zero = true;
            else
                budgets.push_back(b);
        }
        if (zero && !budgets.empty()) {
            std::fprintf(stderr, "hcraft: --budget 0 cannot be combined with other budgets in one run\n");
            return kExitUsage;
        }
        if (o.no_context)
            ok = ok && apply(w.ws, "haystack.context", "\"none\"");
        else if (o.no_distractors || zero)
            ok = ok && apply(w.ws, "haystack.context", "\"needles-only\"");
        if (!budgets.empty()) ok = ok && apply(w.ws, "haystack.budgets", json_list(budgets));
        if (!o.order.empty()) ok = ok && apply(w.ws, "haystack.order", nlohmann::json(o.order).dump());
        if (!o.seeds.empty()) ok = ok && apply(w.ws, "haystack.seeds", json_list(o.seeds));
        if (o.final_uses_original) ok = ok && apply(w.ws, "eval.final_uses_original", "true");
        if (o.strict_answer) ok = ok && apply(w.ws, "eval.strict_answer", "true");
        if (!o.mode.empty()) ok = ok && apply(w.ws, "eval.mode", nlohmann::json(o.mode).dump());
        if (!o.rounds.empty()) {
            if (o.mode == "variable")
                ok = ok && apply(w.ws, "eval.max_rounds", std::to_string(o.rounds.front()));
            else
                ok = ok && apply(w.ws, "eval.rounds", json_list(o.rounds));
        }
        if (!o.sample.empty()) ok = ok && apply(w.ws, "eval.samples", nlohmann::json(o.sample).dump());
    }
    if (!ok) return kExitFailure;
    return std::nullopt;
}

// Takes `json` by address so callers can pass the out-parameter in the same call expression.
int finish(hc_status st, char** json, const char* command, const std::function<std::string(const nlohmann::json&)>& line) {
    if (st != HC_OK) return fail(command);
    auto j = nlohmann::json::parse(*json);
    hc_string_free(*json);
    std::printf("%s\n", line(j).c_str());
    return kExitOk;
}

std::string num(const nlohmann::json& v) {
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
        return buf;
    }
    return v.dump();
}

int run(const std::string& command, const Options& o, CLI::App& app) {
    if (command == "report") {
        char* json = nullptr;
        char* table = nullptr;
        auto st = hc_report(o.results.c_str(), o.out.empty() ? nullptr : o.out.c_str(), &json, &table);
        if (st != HC_OK) return fail("report");
        auto j = nlohmann::json::parse(json);
        hc_string_free(json);
        std::fputs(table, stdout);
        hc_string_free(table);
        std::printf("report: %zu rows, %zu warnings\n", j["rows"].size(), j["warnings"].size());
        return kExitOk;
    }

    Workspace w;
    if (auto code = open_workspace(o, command, w)) return *code;
    const auto* retriever_opt = app.get_subcommand(command)->get_option_no_throw("--retriever");
    const bool explicit_retriever = retriever_opt && retriever_opt->count() > 0;
    char* json = nullptr;

    if (command == "ingest")
        return finish(hc_ingest(w.ws, &json), &json, "ingest", [](const nlohmann::json& j) {
            const auto& s = j["stats"];
            return "ingest: " + j["documents"].dump() + " documents, " + j["edges"].dump() + " links, dropped " +
                   s["dropped_empty"].dump() + " empty / " + s["dropped_redirect"].dump() + " redirect / " +
                   s["dropped_duplicate"].dump() + " duplicate";
        });
    if (command == "index")
        return finish(hc_index(w.ws, &json), &json, "index", [](const nlohmann::json& j) {
            return "index: " + j["documents"].dump() + " documents, " + j["terms"].dump() + " terms -> " +
                   j["saved"].get<std::string>();
        });
    if (command == "retrieve" || command == "rerank") {
        const char* sample = o.sample.empty() ? nullptr : o.sample.c_str();
        const char* query = o.query.empty() ? nullptr : o.query.c_str();
        auto st = command == "retrieve" ? hc_retrieve(w.ws, sample, query, o.retriever.c_str(), o.top, &json)
                                        : hc_rerank(w.ws, sample, query, o.retriever.c_str(), o.top, &json);
        return finish(st, &json, command.c_str(), [&](const nlohmann::json& j) {
            std::string head = j["entries"].empty() ? "-" : j["entries"][0]["id"].get<std::string>();
            return command + ": " + j["strategy"].get<std::string>() + " " +
                   std::to_string(j["entries"].size()) + " documents, top " + head + " -> " +
                   j["artifact"].get<std::string>();
        });
    }
    if (command == "build-haystack") {
        if (o.budgets.size() != 1 || o.budgets.front() <= 0) {
            std::fprintf(stderr, "hcraft: build-haystack needs one positive --budget\n");
            return kExitUsage;
        }
        const std::string order = o.order.empty() ? "ranked" : o.order;
        const unsigned long long seed = o.seeds.empty() ? 0ULL : static_cast<unsigned long long>(o.seeds.front());
        auto st = hc_build_haystack(w.ws, o.sample.c_str(), o.retriever.c_str(),
                                    static_cast<std::size_t>(o.budgets.front()), order.c_str(), seed, &json);
        if (st != HC_OK) return fail("build-haystack");
        std::printf("%s\n", json);
        hc_string_free(json);
        return kExitOk;
    }
    if (explicit_retriever && !apply(w.ws, "retrieval.retrievers", nlohmann::json(o.retriever).dump()))
        return kExitFailure;
    if (command == "eval-retrieval") {
        auto st = hc_eval_retrieval(w.ws, &json);
        if (st != HC_OK) return fail("eval-retrieval");
        std::printf("%s\n", json);
        hc_string_free(json);
        return kExitOk;
    }
    const auto kind = command == "eval-static" ? HC_EVAL_STATIC : HC_EVAL_DYNAMIC;
    return finish(hc_eval(w.ws, kind, &json), &json, command.c_str(), [&](const nlohmann::json& j) {
        return command + ": " + j["evaluations"].dump() + " evaluations, " + j["errored"].dump() +
               " errored, mean F1 " + (j["mean_f1"].is_null() ? std::string("-") : num(j["mean_f1"])) + " -> " +
               j["results"].get<std::string>();
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hcraft: long-context retrieval evaluation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", hc_version());
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config,-c", o.config, "TOML config file");
        sub->add_option("--manifest", o.manifest, "Re-run from a manifest.json");
        sub->add_option("--set", o.overrides, "Override a config key (key=value)");
        sub->add_option("--out,-o", o.out, "Artifact directory");
    };

    auto* ingest = app.add_subcommand("ingest", "Clean a JSONL corpus and save it");
    common(ingest);
    auto* index = app.add_subcommand("index", "Build the BM25 index");
    common(index);
    for (auto* sub : {app.add_subcommand("retrieve", "Rank documents for a sample or query"),
                      app.add_subcommand("rerank", "Rank with a base retriever and rerank with PPR")}) {
        common(sub);
        auto* s = sub->add_option("--sample", o.sample, "QA sample id");
        sub->add_option("--query", o.query, "Ad-hoc query text")->excludes(s);
        sub->add_option("--retriever", o.retriever, "bm25|dense|hybrid[+ppr]");
        sub->add_option("--top", o.top, "Entries to keep")->check(CLI::PositiveNumber);
    }
    auto* haystack = app.add_subcommand("build-haystack", "Assemble and order one haystack");
    common(haystack);
    haystack->add_option("--sample", o.sample, "QA sample id")->required();
    haystack->add_option("--retriever", o.retriever, "bm25|dense|hybrid[+ppr]");
    haystack->add_option("--budget", o.budgets, "Token budget")->required()->expected(1);
    haystack->add_option("--order", o.order, "ranked|random")->check(CLI::IsMember({"ranked", "random"}));
    haystack->add_option("--seed", o.seeds, "Shuffle seed")->expected(1);

    auto* eval_retrieval = app.add_subcommand("eval-retrieval", "Recall@N and NDCG@N over the QA set");
    common(eval_retrieval);
    eval_retrieval->add_option("--retriever", o.retriever, "bm25|dense|hybrid[+ppr]");

    for (auto* sub : {app.add_subcommand("eval-static", "Single-round haystack evaluation"),
                      app.add_subcommand("eval-dynamic", "Multi-round evaluation")}) {
        common(sub);
        sub->add_option("--retriever", o.retriever, "bm25|dense|hybrid[+ppr]");
        sub->add_option("--budget", o.budgets, "Token budgets; 0 means needles only")->delimiter(',');
        sub->add_option("--order", o.order, "ranked|random")->check(CLI::IsMember({"ranked", "random"}));
        sub->add_option("--seed", o.seeds, "Shuffle seeds")->delimiter(',');
        sub->add_option("--sample", o.sample, "Evaluate only these sample ids (comma separated)");
        sub->add_flag("--no-distractors", o.no_distractors, "Needles only");
        sub->add_flag("--no-context", o.no_context, "No documents at all");
        sub->add_flag("--strict-answer", o.strict_answer, "Score 0 when no answer marker is found");
        if (std::string(sub->get_name()) == "eval-dynamic") {
            sub->add_option("--mode", o.mode, "enforced|variable")->check(CLI::IsMember({"enforced", "variable"}));
            sub->add_option("--rounds", o.rounds, "Rounds (enforced) or cap (variable)")->delimiter(',');
            sub->add_flag("--final-uses-original", o.final_uses_original, "Final round asks the original question");
        }
    }
    auto* report = app.add_subcommand("report", "Aggregate a results.jsonl file");
    report->add_option("results", o.results, "results.jsonl")->required();
    report->add_option("--out,-o", o.out, "Write report.json and report.txt here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    if ((command == "retrieve" || command == "rerank") && o.sample.empty() && o.query.empty()) {
        std::fprintf(stderr, "hcraft: %s needs --sample or --query\n", command.c_str());
        return kExitUsage;
    }
    if (!o.config.empty() && !o.manifest.empty()) {
        std::fprintf(stderr, "hcraft: --config and --manifest are mutually exclusive\n");
        return kExitUsage;
    }
    try {
        return run(command, o, app);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "hcraft: %s\n", e.what());
        return kExitFailure;
    }
}

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "haystackcraft/hc.h"
#include "test_support.hpp"

using hctest::TempDir;

namespace {

// Takes ownership of a library string.
std::string take(char* s) {
    std::string out = s ? s : "";
    hc_string_free(s);
    return out;
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

hc_workspace* mini_workspace(const TempDir& dir) {
    hc_workspace* ws = nullptr;
    REQUIRE(hc_workspace_create(hctest::fixture("mini.toml").c_str(), &ws) == HC_OK);
    REQUIRE(hc_workspace_set(ws, "paths.corpus", quoted(hctest::fixture("mini_corpus.jsonl")).c_str()) == HC_OK);
    REQUIRE(hc_workspace_set(ws, "paths.qa", quoted(hctest::fixture("mini_qa.jsonl")).c_str()) == HC_OK);
    REQUIRE(hc_workspace_set(ws, "paths.out", quoted(dir.file("out")).c_str()) == HC_OK);
    return ws;
}

}  // namespace

TEST_CASE("version and stateless helpers") {
    CHECK(std::string(hc_version()) == "0.1.0");

    size_t n = 0;
    CHECK(hc_count_tokens("reference", "Hello, world!", &n) == HC_OK);
    CHECK(n == 4);
    char* cut = nullptr;
    CHECK(hc_truncate("reference", "one two three", 2, &cut) == HC_OK);
    CHECK(take(cut) == "one two");

    double f1 = -1;
    CHECK(hc_answer_f1("the North Sea", "North Sea", &f1) == HC_OK);
    CHECK(f1 == 1.0);

    CHECK(hc_count_tokens("nonsense", "x", &n) == HC_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(hc_last_error()) > 0);
    CHECK(hc_count_tokens("reference", nullptr, &n) == HC_ERR_INVALID_ARGUMENT);
    hc_string_free(nullptr);
}

TEST_CASE("workspace lifecycle through the C API") {
    TempDir dir;
    hc_workspace* ws = mini_workspace(dir);
    char* json = nullptr;

    REQUIRE(hc_ingest(ws, &json) == HC_OK);
    auto ingest = nlohmann::json::parse(take(json));
    CHECK(ingest["documents"] == 13);

    REQUIRE(hc_index(ws, &json) == HC_OK);
    take(json);

    REQUIRE(hc_retrieve(ws, "q1", nullptr, "bm25", 5, &json) == HC_OK);
    auto ranked = nlohmann::json::parse(take(json));
    CHECK(ranked["entries"][0]["id"] == "forth_bridge");
    CHECK(ranked["entries"].size() == 5);

    REQUIRE(hc_rerank(ws, "q3", nullptr, "bm25", 5, &json) == HC_OK);
    CHECK(nlohmann::json::parse(take(json))["strategy"] == "bm25+ppr");

    REQUIRE(hc_build_haystack(ws, "q2", "bm25", 64, "random", 3, &json) == HC_OK);
    auto hs = nlohmann::json::parse(take(json));
    CHECK(hs["order"] == "random:3");

    REQUIRE(hc_eval(ws, HC_EVAL_STATIC, &json) == HC_OK);
    auto ev = nlohmann::json::parse(take(json));
    CHECK(ev["evaluations"] == 24);

    char* table = nullptr;
    REQUIRE(hc_report(ev["results"].get<std::string>().c_str(), nullptr, &json, &table) == HC_OK);
    CHECK(nlohmann::json::parse(take(json))["rows"].size() == 6);
    CHECK(take(table).find("retriever") != std::string::npos);

    REQUIRE(hc_eval_retrieval(ws, &json) == HC_OK);
    CHECK(nlohmann::json::parse(take(json))["reports"].size() == 2);

    hc_workspace_destroy(ws);
}

TEST_CASE("errors map to status codes") {
    TempDir dir;
    hc_workspace* ws = mini_workspace(dir);
    char* json = nullptr;
    CHECK(hc_workspace_set(ws, "no.such.key", "1") == HC_ERR_INVALID_ARGUMENT);
    CHECK(hc_retrieve(ws, nullptr, "the of", "bm25+rerank", 5, &json) == HC_ERR_INVALID_ARGUMENT);
    CHECK(hc_retrieve(ws, nullptr, "?!", "bm25", 5, &json) == HC_ERR_EMPTY_QUERY);
    CHECK(hc_retrieve(ws, "missing", nullptr, "bm25", 5, &json) == HC_ERR_INVALID_ARGUMENT);
    CHECK(hc_build_haystack(ws, "q4", "bm25", 5, "ranked", 0, &json) == HC_ERR_VALIDATION);
    CHECK(std::string(hc_last_error()).find("budget too small") != std::string::npos);
    CHECK(json == nullptr);
    hc_workspace_destroy(ws);

    hc_workspace* none = nullptr;
    CHECK(hc_workspace_create("/nonexistent.toml", &none) == HC_ERR_IO);
    CHECK(none == nullptr);
    CHECK(hc_workspace_load_manifest("/nonexistent.json", &none) == HC_ERR_IO);
    hctest::write_file(dir.file("bad.toml"), "[paths\n");
    CHECK(hc_workspace_create(dir.file("bad.toml").c_str(), &none) == HC_ERR_PARSE);
    CHECK(hc_ingest(nullptr, &json) == HC_ERR_INVALID_ARGUMENT);
    hc_workspace_destroy(nullptr);
}

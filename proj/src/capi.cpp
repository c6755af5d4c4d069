#include "haystackcraft/hc.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "haystackcraft/error.hpp"
#include "haystackcraft/metrics.hpp"
#include "haystackcraft/tokenizer.hpp"
#include "haystackcraft/workspace.hpp"

struct hc_workspace {
    hc::Workspace impl;
};

namespace {

thread_local std::string g_last_error;

hc_status status_of(hc::ErrorCode code) {
    switch (code) {
        case hc::ErrorCode::InvalidArgument: return HC_ERR_INVALID_ARGUMENT;
        case hc::ErrorCode::Parse: return HC_ERR_PARSE;
        case hc::ErrorCode::Ingest: return HC_ERR_INGEST;
        case hc::ErrorCode::Validation: return HC_ERR_VALIDATION;
        case hc::ErrorCode::Io: return HC_ERR_IO;
        case hc::ErrorCode::Transport: return HC_ERR_TRANSPORT;
        case hc::ErrorCode::EmptyQuery: return HC_ERR_EMPTY_QUERY;
    }
    return HC_ERR_INTERNAL;
}

template <typename F>
hc_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return HC_OK;
    } catch (const hc::Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return HC_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return HC_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    auto* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.data(), s.size() + 1);
    return p;
}

void require(const void* p, const char* what) {
    if (!p) throw hc::Error(hc::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

void emit(const nlohmann::json& j, char** out) {
    *out = dup_string(j.dump());
}

std::string opt(const char* s) { return s ? s : ""; }

}  // namespace

extern "C" {

const char* hc_last_error(void) { return g_last_error.c_str(); }

const char* hc_version(void) { return "0.1.0"; }

void hc_string_free(char* s) { std::free(s); }

hc_status hc_workspace_create(const char* config_path, hc_workspace** out) {
    return guarded([&] {
        require(out, "out");
        auto config = config_path ? hc::RunConfig::load(config_path) : hc::RunConfig{};
        *out = new hc_workspace{hc::Workspace(std::move(config))};
    });
}

hc_status hc_workspace_load_manifest(const char* manifest_path, hc_workspace** out) {
    return guarded([&] {
        require(manifest_path, "manifest_path");
        require(out, "out");
        *out = new hc_workspace{hc::Workspace::from_manifest(manifest_path)};
    });
}

void hc_workspace_destroy(hc_workspace* ws) { delete ws; }

hc_status hc_workspace_set(hc_workspace* ws, const char* key, const char* value) {
    return guarded([&] {
        require(ws, "workspace");
        require(key, "key");
        require(value, "value");
        ws->impl.set(key, value);
    });
}

hc_status hc_ingest(hc_workspace* ws, char** out_json) {
    return guarded([&] {
        require(ws, "workspace");
        require(out_json, "out_json");
        emit(ws->impl.ingest(), out_json);
    });
}

hc_status hc_index(hc_workspace* ws, char** out_json) {
    return guarded([&] {
        require(ws, "workspace");
        require(out_json, "out_json");
        emit(ws->impl.build_index(), out_json);
    });
}

hc_status hc_retrieve(hc_workspace* ws, const char* sample_id, const char* query, const char* retriever, size_t top_n,
                      char** out_json) {
    return guarded([&] {
        require(ws, "workspace");
        require(retriever, "retriever");
        require(out_json, "out_json");
        emit(ws->impl.retrieve(opt(sample_id), opt(query), retriever, top_n), out_json);
    });
}

hc_status hc_rerank(hc_workspace* ws, const char* sample_id, const char* query, const char* base_retriever,
                    size_t top_n, char** out_json) {
    return guarded([&] {
        require(ws, "workspace");
        require(base_retriever, "base_retriever");
        require(out_json, "out_json");
        emit(ws->impl.rerank(opt(sample_id), opt(query), base_retriever, top_n), out_json);
    });
}

hc_status hc_build_haystack(hc_workspace* ws, const char* sample_id, const char* retriever, size_t budget,
                            const char* order, unsigned long long seed, char** out_json) {
    return guarded([&] {
        require(ws, "workspace");
        require(sample_id, "sample_id");
        require(retriever, "retriever");
        require(out_json, "out_json");
        auto o = opt(order);
        hc::OrderingPolicy policy;
        if (o == "random")
            policy = hc::OrderingPolicy::random(seed);
        else if (!o.empty() && o != "ranked")
            throw hc::Error(hc::ErrorCode::InvalidArgument, "order must be ranked or random");
        emit(ws->impl.build_haystack(sample_id, retriever, budget, policy), out_json);
    });
}

hc_status hc_eval_retrieval(hc_workspace* ws, char** out_json) {
    return guarded([&] {
        require(ws, "workspace");
        require(out_json, "out_json");
        emit(ws->impl.eval_retrieval(), out_json);
    });
}

hc_status hc_eval(hc_workspace* ws, hc_eval_kind kind, char** out_json) {
    return guarded([&] {
        require(ws, "workspace");
        require(out_json, "out_json");
        if (kind != HC_EVAL_STATIC && kind != HC_EVAL_DYNAMIC)
            throw hc::Error(hc::ErrorCode::InvalidArgument, "unknown evaluation kind");
        emit(ws->impl.evaluate(kind == HC_EVAL_STATIC ? hc::EvalKind::Static : hc::EvalKind::Dynamic), out_json);
    });
}

hc_status hc_report(const char* results_path, const char* out_dir, char** out_json, char** out_table) {
    return guarded([&] {
        require(results_path, "results_path");
        require(out_json, "out_json");
        std::string table;
        auto j = hc::Workspace::report(results_path, opt(out_dir), &table);
        std::unique_ptr<char, decltype(&std::free)> json(dup_string(j.dump()), &std::free);
        if (out_table) *out_table = dup_string(table);
        *out_json = json.release();
    });
}

hc_status hc_count_tokens(const char* tokenizer, const char* text, size_t* out_count) {
    return guarded([&] {
        require(text, "text");
        require(out_count, "out_count");
        *out_count = hc::make_tokenizer(tokenizer ? tokenizer : "reference")->count(text);
    });
}

hc_status hc_truncate(const char* tokenizer, const char* text, size_t budget, char** out_text) {
    return guarded([&] {
        require(text, "text");
        require(out_text, "out_text");
        *out_text = dup_string(hc::make_tokenizer(tokenizer ? tokenizer : "reference")->truncate(text, budget));
    });
}

hc_status hc_answer_f1(const char* prediction, const char* gold, double* out_f1) {
    return guarded([&] {
        require(prediction, "prediction");
        require(gold, "gold");
        require(out_f1, "out_f1");
        *out_f1 = hc::answer_f1(prediction, gold).f1;
    });
}

}  // extern "C"

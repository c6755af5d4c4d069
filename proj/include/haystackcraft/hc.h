#ifndef HAYSTACKCRAFT_HC_H
#define HAYSTACKCRAFT_HC_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(HC_BUILDING_LIBRARY)
#    define HC_API __declspec(dllexport)
#  else
#    define HC_API __declspec(dllimport)
#  endif
#else
#  define HC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hc_status {
    HC_OK = 0,
    HC_ERR_INVALID_ARGUMENT = 1,
    HC_ERR_PARSE = 2,
    HC_ERR_INGEST = 3,
    HC_ERR_VALIDATION = 4,
    HC_ERR_IO = 5,
    HC_ERR_TRANSPORT = 6,
    HC_ERR_EMPTY_QUERY = 7,
    HC_ERR_INTERNAL = 99
} hc_status;

typedef struct hc_workspace hc_workspace;

typedef enum hc_eval_kind { HC_EVAL_STATIC = 0, HC_EVAL_DYNAMIC = 1 } hc_eval_kind;

/* Message for the last failing call on this thread; never NULL. */
HC_API const char* hc_last_error(void);
HC_API const char* hc_version(void);
/* Frees strings returned through `char** out` parameters. */
HC_API void hc_string_free(char* s);

/* config_path may be NULL for an empty configuration. */
HC_API hc_status hc_workspace_create(const char* config_path, hc_workspace** out);
HC_API hc_status hc_workspace_load_manifest(const char* manifest_path, hc_workspace** out);
HC_API void hc_workspace_destroy(hc_workspace* ws);
/* value uses config-file syntax: 8192, "text", [1, 2], true */
HC_API hc_status hc_workspace_set(hc_workspace* ws, const char* key, const char* value);

/* Every command below writes a JSON summary to *out_json. */
HC_API hc_status hc_ingest(hc_workspace* ws, char** out_json);
HC_API hc_status hc_index(hc_workspace* ws, char** out_json);
/* Exactly one of sample_id / query must be non-NULL. */
HC_API hc_status hc_retrieve(hc_workspace* ws, const char* sample_id, const char* query, const char* retriever,
                             size_t top_n, char** out_json);
HC_API hc_status hc_rerank(hc_workspace* ws, const char* sample_id, const char* query, const char* base_retriever,
                           size_t top_n, char** out_json);
/* order is "ranked" or "random"; seed is ignored for ranked. */
HC_API hc_status hc_build_haystack(hc_workspace* ws, const char* sample_id, const char* retriever, size_t budget,
                                   const char* order, unsigned long long seed, char** out_json);
HC_API hc_status hc_eval_retrieval(hc_workspace* ws, char** out_json);
HC_API hc_status hc_eval(hc_workspace* ws, hc_eval_kind kind, char** out_json);
/* out_dir may be NULL; out_table (optional) receives a plain-text table. */
HC_API hc_status hc_report(const char* results_path, const char* out_dir, char** out_json, char** out_table);

HC_API hc_status hc_count_tokens(const char* tokenizer, const char* text, size_t* out_count);
HC_API hc_status hc_truncate(const char* tokenizer, const char* text, size_t budget, char** out_text);
HC_API hc_status hc_answer_f1(const char* prediction, const char* gold, double* out_f1);

#ifdef __cplusplus
}
#endif

#endif

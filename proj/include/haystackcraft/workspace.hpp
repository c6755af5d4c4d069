#pragma once

#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "haystackcraft/config.hpp"
#include "haystackcraft/corpus.hpp"
#include "haystackcraft/harness.hpp"
#include "haystackcraft/model_client.hpp"
#include "haystackcraft/pipeline.hpp"
#include "haystackcraft/retrieval.hpp"
#include "haystackcraft/tokenizer.hpp"

namespace hc {

enum class EvalKind { Static, Dynamic };

/// Lazily loads corpus, QA samples, indexes and clients described by a
/// RunConfig and runs the toolkit's commands against them. Every command
/// returns a JSON summary and writes its artifacts under `paths.out`.
class Workspace {
public:
    explicit Workspace(RunConfig config);

    /// Rebuilds the workspace recorded in a manifest; evaluations then refuse
    /// to run if the corpus or QA files changed since.
    static Workspace from_manifest(const std::string& path);

    const RunConfig& config() const { return config_; }
    /// Changing settings drops everything loaded so far.
    void set(const std::string& key, std::string_view raw);

    /// Replaces the configured model client (tests, embedding in other hosts).
    void set_client(std::shared_ptr<ModelClient> client) { client_override_ = std::move(client); }

    nlohmann::json ingest();
    nlohmann::json build_index();
    nlohmann::json retrieve(const std::string& sample_id, const std::string& query, const std::string& retriever,
                            std::size_t top_n);
    nlohmann::json rerank(const std::string& sample_id, const std::string& query, const std::string& base_retriever,
                          std::size_t top_n);
    nlohmann::json build_haystack(const std::string& sample_id, const std::string& retriever, std::size_t budget,
                                  const OrderingPolicy& ordering);
    nlohmann::json eval_retrieval();
    nlohmann::json evaluate(EvalKind kind);

    /// Aggregates a results file; writes report.json / report.txt under
    /// `out_dir` when it is non-empty.
    static nlohmann::json report(const std::string& results_path, const std::string& out_dir, std::string* table);

    const Tokenizer& tokenizer();
    const Corpus& corpus();
    const QASet& qa();
    const Retriever& retriever();
    RetrievalSettings retrieval_settings() const;

private:
    std::string out_dir() const;
    std::string index_dir() const;
    std::string write_artifact(const std::string& name, const nlohmann::json& j) const;
    const QASample& sample(const std::string& id);
    std::pair<std::string, std::string> query_for(const std::string& sample_id, const std::string& query);
    ModelClient& client();
    void reset();

    RunConfig config_;
    std::optional<nlohmann::json> manifest_;
    std::shared_ptr<const Tokenizer> tokenizer_;
    std::unique_ptr<Corpus> corpus_;
    std::unique_ptr<QASet> qa_;
    std::unique_ptr<SparseIndex> sparse_;
    std::unique_ptr<EmbeddingStore> dense_;
    std::unique_ptr<QueryEncoder> precomputed_encoder_;
    std::unique_ptr<QueryEncoder> http_encoder_;
    std::unique_ptr<QueryEncoder> encoder_;
    std::unique_ptr<Retriever> retriever_;
    std::shared_ptr<ModelClient> client_;
    std::shared_ptr<ModelClient> client_override_;
};

/// FNV-1a digest of a file's bytes, or "" when it cannot be read.
std::string file_digest(const std::string& path);

}  // namespace hc

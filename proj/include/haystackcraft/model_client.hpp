#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "haystackcraft/corpus.hpp"
#include "haystackcraft/haystack.hpp"

namespace hc {

/// What the harness hands to a model. HTTP clients only look at `prompt`;
/// mocks may use the structured fields to decide deterministically.
struct ModelRequest {
    std::string sample_id;
    std::size_t round = 1;
    PromptTemplate kind = PromptTemplate::Static;
    std::string question;
    std::string prompt;
    std::vector<std::string> member_ids;  // presentation order
};

class ModelClient {
public:
    virtual ~ModelClient() = default;
    /// Throws Error(Transport) when the endpoint cannot produce a response.
    virtual std::string complete(const ModelRequest& request) = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

struct ChatClientConfig {
    std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    std::string api_key;  // sent as a bearer token when non-empty
    RetryPolicy retry;
    std::chrono::seconds timeout{600};
};

/// Chat-completions JSON over HTTP. 429 and 5xx responses (and connection
/// failures) are retried with exponential backoff; other statuses fail at once.
class HttpChatClient final : public ModelClient {
public:
    explicit HttpChatClient(ChatClientConfig config);
    std::string complete(const ModelRequest& request) override;

    /// The request body sent for `prompt`.
    std::string request_body(const std::string& prompt) const;

private:
    ChatClientConfig config_;
};

/// Replays a fixed response sequence per sample id; the key "*" applies to
/// samples without their own script. Running past the end is a transport error.
class ScriptedClient final : public ModelClient {
public:
    explicit ScriptedClient(std::map<std::string, std::vector<std::string>> scripts);

    /// JSON object {"<sample id>": ["response 1", ...], ...}.
    static std::unique_ptr<ScriptedClient> from_file(const std::string& path);

    std::string complete(const ModelRequest& request) override;

private:
    std::map<std::string, std::vector<std::string>> scripts_;
};

/// Answers with the gold answer iff every needle of the sample sits within
/// the first `threshold` presented documents. Otherwise it either gives up
/// (answer templates) or drifts the question (refinement templates).
class NeedleOracleClient final : public ModelClient {
public:
    NeedleOracleClient(const QASet& samples, std::size_t threshold);
    std::string complete(const ModelRequest& request) override;

    static constexpr const char* kDriftSuffix = " (broader context)";
    static constexpr const char* kUnknownAnswer = "unknown";

private:
    bool needles_visible(const QASample& sample, const ModelRequest& request) const;

    const QASet& samples_;
    std::size_t threshold_;
};

}  // namespace hc

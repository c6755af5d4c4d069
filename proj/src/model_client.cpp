#include "haystackcraft/model_client.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "haystackcraft/error.hpp"
#include "http_util.hpp"

namespace hc {

// ---------------------------------------------------------------------------
// HTTP

HttpChatClient::HttpChatClient(ChatClientConfig config) : config_(std::move(config)) {
    if (config_.retry.max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "client: max attempts must be >= 1");
    detail::split_url(config_.endpoint);  // validates early
}

std::string HttpChatClient::request_body(const std::string& prompt) const {
    nlohmann::json body = {
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", config_.temperature},
        {"top_p", config_.top_p},
        {"max_tokens", config_.max_tokens},
    };
    return body.dump();
}

std::string HttpChatClient::complete(const ModelRequest& request) {
    auto [base, path] = detail::split_url(config_.endpoint);
    const auto body = request_body(request.prompt);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::string last_failure;
    auto backoff = config_.retry.initial_backoff;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client cli(base);
        cli.set_connection_timeout(std::chrono::seconds(10));
        cli.set_read_timeout(config_.timeout);
        cli.set_write_timeout(config_.timeout);
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            last_failure = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw Error(ErrorCode::Transport, "model endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                                  res->body.substr(0, 200));
        try {
            auto j = nlohmann::json::parse(res->body);
            const auto& content = j.at("choices").at(0).at("message").at("content");
            return content.is_null() ? std::string{} : content.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Transport, std::string("malformed chat completion: ") + e.what());
        }
    }
    throw Error(ErrorCode::Transport, "model endpoint failed after " + std::to_string(config_.retry.max_attempts) +
                                          " attempts (" + last_failure + ")");
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedClient::ScriptedClient(std::map<std::string, std::vector<std::string>> scripts)
    : scripts_(std::move(scripts)) {}

std::unique_ptr<ScriptedClient> ScriptedClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open script file '" + path + "'");
    try {
        auto j = nlohmann::json::parse(in);
        return std::make_unique<ScriptedClient>(j.get<std::map<std::string, std::vector<std::string>>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "script file '" + path + "': " + e.what());
    }
}

std::string ScriptedClient::complete(const ModelRequest& request) {
    auto it = scripts_.find(request.sample_id);
    if (it == scripts_.end()) it = scripts_.find("*");
    if (it == scripts_.end())
        throw Error(ErrorCode::Transport, "no script for sample '" + request.sample_id + "'");
    if (request.round == 0 || request.round > it->second.size())
        throw Error(ErrorCode::Transport, "script for '" + request.sample_id + "' has no response for round " +
                                              std::to_string(request.round));
    return it->second[request.round - 1];
}

// ---------------------------------------------------------------------------
// Needle oracle

NeedleOracleClient::NeedleOracleClient(const QASet& samples, std::size_t threshold)
    : samples_(samples), threshold_(threshold) {}

bool NeedleOracleClient::needles_visible(const QASample& sample, const ModelRequest& request) const {
    const auto shown = std::min(threshold_, request.member_ids.size());
    return std::all_of(sample.needles.begin(), sample.needles.end(), [&](const std::string& id) {
        return std::find(request.member_ids.begin(), request.member_ids.begin() + static_cast<std::ptrdiff_t>(shown), id) !=
               request.member_ids.begin() + static_cast<std::ptrdiff_t>(shown);
    });
}

std::string NeedleOracleClient::complete(const ModelRequest& request) {
    const auto* sample = samples_.find(request.sample_id);
    if (!sample) throw Error(ErrorCode::Transport, "oracle: unknown sample '" + request.sample_id + "'");
    const bool visible = needles_visible(*sample, request);

    switch (request.kind) {
        case PromptTemplate::Static:
        case PromptTemplate::DynamicFinal:
            return std::string("The correct answer is ") + (visible ? sample->answer : kUnknownAnswer) + ".";
        case PromptTemplate::Variable:
            if (visible) return "The correct answer is " + sample->answer + ".";
            [[fallthrough]];
        case PromptTemplate::DynamicIntermediate:
            if (visible)
                return "Summary: All supporting articles are present.\nRefined Question: " + request.question;
            return "Summary: Some supporting articles are missing.\nRefined Question: " + request.question + kDriftSuffix;
    }
    return {};
}

}  // namespace hc

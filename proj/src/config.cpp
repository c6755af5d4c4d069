#include "haystackcraft/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "haystackcraft/error.hpp"
#include "haystackcraft/harness.hpp"

namespace hc {

namespace {

constexpr std::array kKeys = {
    "tokenizer",
    "paths.corpus", "paths.qa", "paths.embeddings", "paths.embedding_ids", "paths.query_embeddings",
    "paths.query_embedding_ids", "paths.index_dir", "paths.out",
    "ingest.on_duplicate",
    "retrieval.k1", "retrieval.b", "retrieval.rrf_k", "retrieval.depth", "retrieval.retrievers",
    "embedding.endpoint",
    "haystack.budgets", "haystack.order", "haystack.seeds", "haystack.context",
    "eval.mode", "eval.rounds", "eval.max_rounds", "eval.strict_answer", "eval.final_uses_original",
    "eval.concurrency", "eval.samples",
    "client.kind", "client.endpoint", "client.model", "client.temperature", "client.top_p", "client.max_tokens",
    "client.max_attempts", "client.backoff_ms", "client.timeout_s", "client.script", "client.oracle_threshold",
    "metrics.cutoffs",
};
constexpr std::array kPprFields = {"seeds", "damping", "tolerance", "max_iter", "symmetrize"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

nlohmann::json parse_value(std::string_view raw) {
    raw = trim(raw);
    if (raw.size() >= 2 && raw.front() == '\'' && raw.back() == '\'') return std::string(raw.substr(1, raw.size() - 2));
    auto j = nlohmann::json::parse(raw.begin(), raw.end(), nullptr, false);
    if (!j.is_discarded()) return j;
    return std::string(raw);
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "' must be " + expected);
}

}  // namespace

bool RunConfig::known_key(std::string_view key) {
    if (std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end()) return true;
    if (!key.starts_with("ppr.")) return false;
    auto rest = key.substr(4);
    for (std::string_view base : {"bm25.", "dense.", "hybrid."})
        if (rest.starts_with(base)) rest.remove_prefix(base.size());
    return std::find(kPprFields.begin(), kPprFields.end(), rest) != kPprFields.end();
}

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
    RunConfig config;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw_line; std::getline(in, raw_line);) {
        ++line_no;
        auto line = trim(strip_comment(raw_line));
        if (line.empty()) continue;
        auto where = source + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorCode::Parse, where + ": malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorCode::Parse, where + ": expected key = value");
        auto key = std::string(trim(line.substr(0, eq)));
        if (!section.empty()) key = section + "." + key;
        if (!known_key(key)) throw Error(ErrorCode::InvalidArgument, where + ": unknown config key '" + key + "'");
        config.values_[key] = parse_value(line.substr(eq + 1));
    }
    return config;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

RunConfig RunConfig::from_json(const nlohmann::json& flat) {
    if (!flat.is_object()) throw Error(ErrorCode::Parse, "config must be a JSON object");
    RunConfig config;
    for (const auto& [key, value] : flat.items()) config.set_value(key, value);
    return config;
}

void RunConfig::set(const std::string& key, std::string_view raw) {
    set_value(key, parse_value(raw));
}

void RunConfig::set_value(const std::string& key, nlohmann::json value) {
    if (!known_key(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    values_[key] = std::move(value);
}

const nlohmann::json* RunConfig::find(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (v->is_string()) return v->get<std::string>();
    if (v->is_number() || v->is_boolean()) return v->dump();
    type_error(key, "a string");
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) type_error(key, "an integer");
    return v->get<long long>();
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) type_error(key, "a number");
    return v->get<double>();
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) type_error(key, "true or false");
    return v->get<bool>();
}

std::vector<std::string> RunConfig::get_string_list(const std::string& key, std::vector<std::string> fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (v->is_string()) {
        // "a,b" is accepted as shorthand on the command line.
        std::vector<std::string> out;
        std::stringstream ss(v->get<std::string>());
        for (std::string item; std::getline(ss, item, ',');)
            if (auto t = trim(item); !t.empty()) out.emplace_back(t);
        return out;
    }
    if (!v->is_array()) type_error(key, "a string or a list of strings");
    std::vector<std::string> out;
    for (const auto& item : *v) {
        if (!item.is_string()) type_error(key, "a list of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::vector<long long> RunConfig::get_int_list(const std::string& key, std::vector<long long> fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (v->is_number_integer()) return {v->get<long long>()};
    if (v->is_string()) {
        std::vector<long long> out;
        std::stringstream ss(v->get<std::string>());
        for (std::string item; std::getline(ss, item, ',');) {
            try {
                std::size_t used = 0;
                auto t = std::string(trim(item));
                out.push_back(std::stoll(t, &used));
                if (used != t.size()) type_error(key, "a list of integers");
            } catch (const std::logic_error&) {
                type_error(key, "a list of integers");
            }
        }
        return out;
    }
    if (!v->is_array()) type_error(key, "an integer or a list of integers");
    std::vector<long long> out;
    for (const auto& item : *v) {
        if (!item.is_number_integer()) type_error(key, "a list of integers");
        out.push_back(item.get<long long>());
    }
    return out;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
}

std::string RunConfig::hash() const {
    return fnv1a_hex(to_json().dump());
}

}  // namespace hc

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hc {

/// Flat `section.key -> value` settings read from a TOML-style file:
///
///     tokenizer = "reference"
///     [retrieval]
///     k1 = 1.2
///     retrievers = ["bm25", "bm25+ppr"]
///     [ppr.hybrid]
///     damping = 0.85
///
/// Values are JSON literals (numbers, booleans, quoted strings, arrays);
/// anything else is taken as a bare string. Unknown keys are rejected.
class RunConfig {
public:
    static RunConfig parse(std::string_view text, const std::string& source = "<config>");
    static RunConfig load(const std::string& path);
    static RunConfig from_json(const nlohmann::json& flat);

    /// `raw` is interpreted exactly like a value in the file.
    void set(const std::string& key, std::string_view raw);
    void set_value(const std::string& key, nlohmann::json value);
    void erase(const std::string& key) { values_.erase(key); }
    bool has(const std::string& key) const { return values_.contains(key); }

    std::string get_string(const std::string& key, const std::string& fallback = {}) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Accepts a scalar or an array.
    std::vector<std::string> get_string_list(const std::string& key, std::vector<std::string> fallback = {}) const;
    std::vector<long long> get_int_list(const std::string& key, std::vector<long long> fallback = {}) const;

    const std::map<std::string, nlohmann::json>& values() const { return values_; }
    nlohmann::json to_json() const;
    /// Hash of the canonical JSON dump.
    std::string hash() const;

    static bool known_key(std::string_view key);

private:
    const nlohmann::json* find(const std::string& key) const;

    std::map<std::string, nlohmann::json> values_;
};

}  // namespace hc

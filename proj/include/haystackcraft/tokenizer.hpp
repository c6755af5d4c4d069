#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace hc {

/// Token counting and prefix truncation. Haystack budgets are expressed in the
/// units of whichever tokenizer is active, so every cached count records the
/// tokenizer name it was produced with.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual std::string name() const = 0;
    virtual std::size_t count(std::string_view text) const = 0;

    /// Longest prefix of `text` ending on a token boundary with at most
    /// `budget` tokens. Returns `text` unchanged when it already fits.
    virtual std::string truncate(std::string_view text, std::size_t budget) const = 0;
};

/// Whitespace split, then every ASCII punctuation character becomes its own
/// token. Bytes >= 0x80 are word characters, so UTF-8 text stays intact.
class ReferenceTokenizer final : public Tokenizer {
public:
    std::string name() const override { return "reference"; }
    std::size_t count(std::string_view text) const override;
    std::string truncate(std::string_view text, std::size_t budget) const override;

    /// Byte offset just past the end of the `n`-th token (n >= 1), or
    /// text.size() if the text has fewer tokens.
    static std::size_t end_of_token(std::string_view text, std::size_t n);
};

/// Delegates to a child process speaking one JSON object per line on
/// stdin/stdout: {"op":"count","text":...} -> {"count":n} and
/// {"op":"truncate","text":...,"budget":b} -> {"text":...}.
/// Requests are serialized, one in flight at a time.
class ExternalTokenizer final : public Tokenizer {
public:
    explicit ExternalTokenizer(std::string command);
    ~ExternalTokenizer() override;

    ExternalTokenizer(const ExternalTokenizer&) = delete;
    ExternalTokenizer& operator=(const ExternalTokenizer&) = delete;

    std::string name() const override { return "external(" + command_ + ")"; }
    std::size_t count(std::string_view text) const override;
    std::string truncate(std::string_view text, std::size_t budget) const override;

private:
    std::string roundtrip(const std::string& request_line) const;

    std::string command_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    mutable std::string read_buffer_;
    mutable std::mutex mutex_;
};

/// Parses a `tokenizer = reference | external(<command>)` setting.
std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view spec);

}  // namespace hc

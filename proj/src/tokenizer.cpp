#include "haystackcraft/tokenizer.hpp"

#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "haystackcraft/error.hpp"

namespace hc {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(unsigned char c) {
    return c < 0x80 && std::ispunct(c) != 0;
}

// Calls `on_token(begin, end)` for each token; stops early when it returns false.
template <typename F>
void scan_tokens(std::string_view text, F&& on_token) {
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            ++i;
            continue;
        }
        std::size_t begin = i;
        if (is_punct(c)) {
            ++i;
        } else {
            while (i < n) {
                auto d = static_cast<unsigned char>(text[i]);
                if (is_space(d) || is_punct(d)) break;
                ++i;
            }
        }
        if (!on_token(begin, i)) return;
    }
}

}  // namespace

std::size_t ReferenceTokenizer::count(std::string_view text) const {
    std::size_t tokens = 0;
    scan_tokens(text, [&](std::size_t, std::size_t) {
        ++tokens;
        return true;
    });
    return tokens;
}

std::size_t ReferenceTokenizer::end_of_token(std::string_view text, std::size_t n) {
    std::size_t seen = 0;
    std::size_t end = text.size();
    scan_tokens(text, [&](std::size_t, std::size_t token_end) {
        if (++seen == n) {
            end = token_end;
            return false;
        }
        return true;
    });
    return end;
}

std::string ReferenceTokenizer::truncate(std::string_view text, std::size_t budget) const {
    if (budget == 0) return {};
    return std::string(text.substr(0, end_of_token(text, budget)));
}

ExternalTokenizer::ExternalTokenizer(std::string command) : command_(std::move(command)) {
    // A dead child would otherwise kill the whole process on the next write.
    static std::once_flag sigpipe_once;
    std::call_once(sigpipe_once, [] { std::signal(SIGPIPE, SIG_IGN); });

    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) throw Error(ErrorCode::Io, "tokenizer: pipe() failed");
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw Error(ErrorCode::Io, "tokenizer: pipe() failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw Error(ErrorCode::Io, "tokenizer: fork() failed");
    if (pid_ == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

ExternalTokenizer::~ExternalTokenizer() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        waitpid(pid_, &status, 0);
    }
}

std::string ExternalTokenizer::roundtrip(const std::string& request_line) const {
    std::lock_guard lock(mutex_);
    std::string out = request_line + "\n";
    std::size_t written = 0;
    while (written < out.size()) {
        ssize_t w = write(to_child_, out.data() + written, out.size() - written);
        if (w <= 0) throw Error(ErrorCode::Io, "tokenizer: write to '" + command_ + "' failed");
        written += static_cast<std::size_t>(w);
    }
    for (;;) {
        auto nl = read_buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        ssize_t r = read(from_child_, chunk, sizeof chunk);
        if (r <= 0) throw Error(ErrorCode::Io, "tokenizer: '" + command_ + "' closed its output");
        read_buffer_.append(chunk, static_cast<std::size_t>(r));
    }
}

std::size_t ExternalTokenizer::count(std::string_view text) const {
    nlohmann::json req = {{"op", "count"}, {"text", text}};
    auto line = roundtrip(req.dump());
    try {
        return nlohmann::json::parse(line).at("count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "tokenizer: bad count response: " + std::string(e.what()));
    }
}

std::string ExternalTokenizer::truncate(std::string_view text, std::size_t budget) const {
    nlohmann::json req = {{"op", "truncate"}, {"text", text}, {"budget", budget}};
    auto line = roundtrip(req.dump());
    try {
        return nlohmann::json::parse(line).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "tokenizer: bad truncate response: " + std::string(e.what()));
    }
}

std::shared_ptr<const Tokenizer> make_tokenizer(std::string_view spec) {
    if (spec.empty() || spec == "reference") return std::make_shared<ReferenceTokenizer>();
    constexpr std::string_view prefix = "external(";
    if (spec.starts_with(prefix) && spec.ends_with(")")) {
        auto command = spec.substr(prefix.size(), spec.size() - prefix.size() - 1);
        if (command.empty()) throw Error(ErrorCode::InvalidArgument, "tokenizer: empty external command");
        return std::make_shared<ExternalTokenizer>(std::string(command));
    }
    throw Error(ErrorCode::InvalidArgument, "unknown tokenizer '" + std::string(spec) + "'");
}

}  // namespace hc

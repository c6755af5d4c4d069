#pragma once

// Little-endian stream helpers shared by the persisted formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>

#include "haystackcraft/error.hpp"

namespace hc::detail {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    }

    void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    void put_string(std::string_view s) {
        put<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void finish() {
        out_.flush();
        if (!out_) throw Error(ErrorCode::Io, "write to '" + path_ + "' failed");
    }

private:
    std::string path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    }

    void expect_magic(std::string_view tag) {
        std::string got(tag.size(), '\0');
        in_.read(got.data(), static_cast<std::streamsize>(got.size()));
        if (!in_ || got != tag) throw Error(ErrorCode::Parse, "'" + path_ + "': bad magic header, expected " + std::string(tag));
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        T value{};
        in_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!in_) truncated();
        return value;
    }

    std::string get_string() {
        auto n = get<std::uint64_t>();
        if (n > (std::uint64_t{1} << 34)) throw Error(ErrorCode::Parse, "'" + path_ + "': corrupt string length");
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (!in_) truncated();
        return s;
    }

    void read_raw(void* dst, std::size_t bytes) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        if (!in_) truncated();
    }

    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

    const std::string& path() const { return path_; }

private:
    [[noreturn]] void truncated() { throw Error(ErrorCode::Parse, "'" + path_ + "': truncated file"); }

    std::string path_;
    std::ifstream in_;
};

}  // namespace hc::detail

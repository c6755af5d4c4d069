#pragma once

#include <string>
#include <utility>

#include "haystackcraft/error.hpp"

namespace hc::detail {

/// "http://host:8000/v1/chat" -> {"http://host:8000", "/v1/chat"}.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::InvalidArgument, "endpoint '" + url + "' must start with http:// or https://");
    auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(ErrorCode::InvalidArgument, "unsupported scheme in endpoint '" + url + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") throw Error(ErrorCode::InvalidArgument, "https endpoints need a build with OpenSSL");
#endif
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace hc::detail

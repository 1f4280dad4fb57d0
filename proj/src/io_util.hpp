#pragma once

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>

#include "fishrect/common.hpp"

namespace fishrect::detail {

// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, "not a number: '" + std::string(s) + "'");
    return x;
}

} // namespace fishrect::detail

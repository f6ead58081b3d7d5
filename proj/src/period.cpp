#include "lpma/period.hpp"

#include <charconv>
#include <cstdio>

namespace lpma {

std::string Period::str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-Q%d", year, quarter);
    return buf;
}

std::optional<Period> parse_period(std::string_view text) {
    const auto dash = text.find("-Q");
    if (dash == std::string_view::npos || dash + 3 != text.size()) return std::nullopt;
    int year = 0;
    const auto ys = text.substr(0, dash);
    auto [p, ec] = std::from_chars(ys.data(), ys.data() + ys.size(), year);
    if (ec != std::errc{} || p != ys.data() + ys.size() || ys.empty()) return std::nullopt;
    const char q = text[dash + 2];
    if (q < '1' || q > '4') return std::nullopt;
    return Period{year, q - '0'};
}

}  // namespace lpma

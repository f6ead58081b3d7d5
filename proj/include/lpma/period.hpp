#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace lpma {

// Calendar quarter. Ordinal arithmetic is in quarters.
struct Period {
    int year = 0;
    int quarter = 1;  // 1..4

    int ordinal() const noexcept { return year * 4 + (quarter - 1); }
    static Period from_ordinal(int ord) noexcept {
        const int y = ord >= 0 ? ord / 4 : (ord - 3) / 4;
        return Period{y, ord - y * 4 + 1};
    }
    Period operator+(int quarters) const noexcept { return from_ordinal(ordinal() + quarters); }
    int operator-(const Period& other) const noexcept { return ordinal() - other.ordinal(); }

    auto operator<=>(const Period& other) const noexcept { return ordinal() <=> other.ordinal(); }
    bool operator==(const Period& other) const noexcept = default;

    std::string str() const;
};

// Parses "YYYY-Qn"; nullopt when malformed.
std::optional<Period> parse_period(std::string_view text);

// Inclusive range of base periods.
struct PeriodWindow {
    Period first;
    Period last;
    bool contains(const Period& p) const noexcept { return first <= p && p <= last; }
};

}  // namespace lpma

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace factorlab {

/// Calendar day with no intraday component, stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);

    /// Strict YYYY-MM-DD parse; rejects out-of-range months and days.
    static std::optional<Date> parse(std::string_view iso);

    std::string iso() const;
    constexpr std::int32_t days() const { return days_; }

    /// 0 = Monday ... 6 = Sunday
    int weekday() const;

    constexpr Date operator+(std::int32_t n) const { return Date(days_ + n); }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

}  // namespace factorlab

/*
 * Copyright (c) 2026 The dharness Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// DS3231-style timekeeping registers and the civil-calendar helpers shared by
// the RTC Double and the RTC driver.
//
//   0x00 seconds  00-59      0x04 date    01-31
//   0x01 minutes  00-59      0x05 month   01-12 (century bit unused)
//   0x02 hours    00-23      0x06 year    00-99 (2000-2099)
//   0x03 weekday  1-7, 1 = Monday

#include "dharness/error.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace dharness::rtc
{

inline constexpr std::uint8_t device_address = 0x68;
inline constexpr std::size_t register_count = 7;

enum Reg : std::size_t
{
    seconds = 0,
    minutes = 1,
    hours = 2,
    weekday = 3,
    date = 4,
    month = 5,
    year = 6,
};

using RegisterImage = std::array<std::uint8_t, register_count>;

constexpr bool is_bcd(std::uint8_t b) noexcept { return (b >> 4) <= 9 && (b & 0x0f) <= 9; }

inline std::uint8_t to_bcd(int value)
{
    if (value < 0 || value > 99)
    {
        throw Error(Errc::invalid_argument, "BCD value out of range 0..99: " + std::to_string(value));
    }
    return static_cast<std::uint8_t>(((value / 10) << 4) | (value % 10));
}

inline int from_bcd(std::uint8_t b)
{
    if (!is_bcd(b))
    {
        constexpr char digits[] = "0123456789ABCDEF";
        throw Error(Errc::invalid_register, std::string("byte 0x") + digits[b >> 4] + digits[b & 0x0f] + " is not BCD");
    }
    return (b >> 4) * 10 + (b & 0x0f);
}

constexpr bool is_leap(int year) noexcept { return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0; }

constexpr int days_in_month(int year, int month) noexcept
{
    constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12)
    {
        return 0;
    }
    return month == 2 && is_leap(year) ? 29 : lengths[month - 1];
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(int y, int m, int d) noexcept
{
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// ISO weekday, 1 = Monday .. 7 = Sunday.
constexpr int iso_weekday(int y, int m, int d) noexcept
{
    const auto days = days_from_civil(y, m, d);
    // 1970-01-01 was a Thursday.
    const auto wd = ((days % 7) + 7 + 3) % 7;
    return static_cast<int>(wd) + 1;
}

struct DateTime
{
    int year = 2000;
    int month = 1;
    int day = 1;
    int hour = 0;
    int minute = 0;
    int second = 0;

    friend constexpr bool operator==(const DateTime&, const DateTime&) = default;

    constexpr bool valid() const noexcept
    {
        return year >= 2000 && year <= 2099 && month >= 1 && month <= 12 && day >= 1 &&
               day <= days_in_month(year, month) && hour >= 0 && hour <= 23 && minute >= 0 && minute <= 59 &&
               second >= 0 && second <= 59;
    }

    constexpr int weekday() const noexcept { return iso_weekday(year, month, day); }

    std::string iso() const
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", year, month, day, hour, minute, second);
        return buf;
    }

    /// Parses YYYY-MM-DDTHH:MM:SS; throws Error(format) or Error(invalid_argument).
    static DateTime parse(std::string_view text)
    {
        auto fail = [&text] { return Error(Errc::format, "expected YYYY-MM-DDTHH:MM:SS, got '" + std::string(text) + "'"); };
        if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
            text[16] != ':')
        {
            throw fail();
        }
        auto field = [&](std::size_t pos, std::size_t len) {
            int value = 0;
            const auto* first = text.data() + pos;
            const auto [ptr, ec] = std::from_chars(first, first + len, value);
            if (ec != std::errc{} || ptr != first + len)
            {
                throw fail();
            }
            return value;
        };
        DateTime dt{field(0, 4), field(5, 2), field(8, 2), field(11, 2), field(14, 2), field(17, 2)};
        if (!dt.valid())
        {
            throw Error(Errc::invalid_argument, "date/time out of range 2000..2099: '" + std::string(text) + "'");
        }
        return dt;
    }
};

inline RegisterImage encode(const DateTime& dt)
{
    if (!dt.valid())
    {
        throw Error(Errc::invalid_argument, "date/time out of range 2000..2099: " + dt.iso());
    }
    return RegisterImage{to_bcd(dt.second), to_bcd(dt.minute), to_bcd(dt.hour), to_bcd(dt.weekday()),
                         to_bcd(dt.day),    to_bcd(dt.month),  to_bcd(dt.year - 2000)};
}

/// Throws Error(invalid_register) on non-BCD bytes or out-of-range fields.
inline DateTime decode(const RegisterImage& regs)
{
    DateTime dt{2000 + from_bcd(regs[year]), from_bcd(regs[month]), from_bcd(regs[date]),
                from_bcd(regs[hours]),       from_bcd(regs[minutes]), from_bcd(regs[seconds])};
    if (!dt.valid())
    {
        throw Error(Errc::invalid_register, "registers hold an impossible date/time");
    }
    return dt;
}

} // namespace dharness::rtc

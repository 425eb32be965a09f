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

// Reference implementations used only by tests. They are written
// independently of the library code they check: the calendar oracle walks
// day by day with its own month table, the BCD oracle goes through decimal
// text, and the coordinate oracle splits the field as text.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace oracle
{

struct Civil
{
    int year, month, day, hour, minute, second;
    int weekday; // 1 = Monday .. 7 = Sunday
    bool operator==(const Civil&) const = default;
};

inline bool leap(int y) { return y % 400 == 0 || (y % 4 == 0 && y % 100 != 0); }

inline int month_length(int y, int m)
{
    static const int table[13] = {0, 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && leap(y) ? 29 : table[m];
}

/// Weekday by counting days from 2000-01-01, a Saturday.
inline int weekday_by_counting(int y, int m, int d)
{
    long days = 0;
    for (int yy = 2000; yy < y; ++yy)
    {
        days += leap(yy) ? 366 : 365;
    }
    for (int mm = 1; mm < m; ++mm)
    {
        days += month_length(y, mm);
    }
    days += d - 1;
    return static_cast<int>((days + 5) % 7) + 1; // Saturday = 6
}

inline Civil make(int y, int mo, int d, int h, int mi, int s)
{
    return Civil{y, mo, d, h, mi, s, weekday_by_counting(y, mo, d)};
}

/// Brute force: carry seconds into minutes and hours, then walk whole days.
inline Civil add_seconds(Civil c, std::uint64_t delta)
{
    std::uint64_t total = static_cast<std::uint64_t>(c.hour) * 3600 + c.minute * 60 + c.second + delta;
    std::uint64_t days = total / 86400;
    total %= 86400;
    c.hour = static_cast<int>(total / 3600);
    c.minute = static_cast<int>(total / 60 % 60);
    c.second = static_cast<int>(total % 60);
    while (days-- > 0)
    {
        c.weekday = c.weekday == 7 ? 1 : c.weekday + 1;
        if (++c.day > month_length(c.year, c.month))
        {
            c.day = 1;
            if (++c.month > 12)
            {
                c.month = 1;
                ++c.year;
            }
        }
    }
    return c;
}

/// Two-digit BCD via decimal text.
inline std::uint8_t bcd(int v)
{
    const std::string s = std::to_string(100 + v).substr(1);
    return static_cast<std::uint8_t>(((s[0] - '0') << 4) | (s[1] - '0'));
}

inline std::array<std::uint8_t, 7> registers(const Civil& c)
{
    return {bcd(c.second), bcd(c.minute), bcd(c.hour), bcd(c.weekday), bcd(c.day), bcd(c.month), bcd(c.year - 2000)};
}

inline std::string nmea_checksum(std::string_view body)
{
    int x = 0;
    for (unsigned char ch : body)
    {
        x ^= ch;
    }
    const char* hex = "0123456789ABCDEF";
    return std::string{hex[x / 16], hex[x % 16]};
}

/// "ddmm.mmmm" (or "dddmm.mmmm") to decimal degrees, text-split.
inline double ddmm_to_degrees(const std::string& field, char hemisphere)
{
    const auto dot = field.find('.');
    const auto degree_digits = dot - 2;
    const double degrees = std::stod(field.substr(0, degree_digits));
    const double minutes = std::stod(field.substr(degree_digits));
    const double v = degrees + minutes / 60.0;
    return hemisphere == 'S' || hemisphere == 'W' ? -v : v;
}

/// Uniform random valid datetime in 2000-01-01T00:00:00 .. 2099-12-31T23:59:59.
inline Civil random_civil(std::mt19937_64& rng)
{
    const int y = std::uniform_int_distribution<int>(2000, 2099)(rng);
    const int m = std::uniform_int_distribution<int>(1, 12)(rng);
    const int d = std::uniform_int_distribution<int>(1, month_length(y, m))(rng);
    const int h = std::uniform_int_distribution<int>(0, 23)(rng);
    const int mi = std::uniform_int_distribution<int>(0, 59)(rng);
    const int s = std::uniform_int_distribution<int>(0, 59)(rng);
    return make(y, m, d, h, mi, s);
}

} // namespace oracle

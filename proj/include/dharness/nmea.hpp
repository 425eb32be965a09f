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

// NMEA 0183 sentence framing: $<body>*<CS>\r\n where CS is the XOR of every
// body byte as two uppercase hex digits.

#include "dharness/error.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dharness::nmea
{

inline std::uint8_t checksum(std::string_view body) noexcept
{
    std::uint8_t cs = 0;
    for (char c : body)
    {
        cs ^= static_cast<std::uint8_t>(c);
    }
    return cs;
}

inline std::string checksum_hex(std::string_view body)
{
    static constexpr char digits[] = "0123456789ABCDEF";
    const auto cs = checksum(body);
    return std::string{digits[cs >> 4], digits[cs & 0x0f]};
}

inline bool is_body_char(char c) noexcept { return c >= 0x20 && c <= 0x7e && c != '$' && c != '*'; }

inline std::string make_sentence(std::string_view body)
{
    if (body.empty())
    {
        throw Error(Errc::invalid_argument, "empty NMEA body");
    }
    for (char c : body)
    {
        if (!is_body_char(c))
        {
            throw Error(Errc::invalid_argument, "NMEA body may not contain '$', '*' or control bytes");
        }
    }
    return "$" + std::string(body) + "*" + checksum_hex(body) + "\r\n";
}

/// The body of a well-formed sentence with a correct checksum, else nullopt.
/// A trailing CR/LF is optional.
inline std::optional<std::string> validate(std::string_view line)
{
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
    {
        line.remove_suffix(1);
    }
    if (line.size() < 5 || line.front() != '$' || line[line.size() - 3] != '*')
    {
        return std::nullopt;
    }
    const auto body = line.substr(1, line.size() - 4);
    if (body.empty())
    {
        return std::nullopt;
    }
    for (char c : body)
    {
        if (!is_body_char(c))
        {
            return std::nullopt;
        }
    }
    auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9')
        {
            return c - '0';
        }
        if (c >= 'A' && c <= 'F')
        {
            return c - 'A' + 10;
        }
        return -1;
    };
    const int hi = hex(line[line.size() - 2]);
    const int lo = hex(line[line.size() - 1]);
    if (hi < 0 || lo < 0 || ((hi << 4) | lo) != checksum(body))
    {
        return std::nullopt;
    }
    return std::string(body);
}

inline std::vector<std::string> split_fields(std::string_view body)
{
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true)
    {
        const auto comma = body.find(',', start);
        fields.emplace_back(body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos)
        {
            return fields;
        }
        start = comma + 1;
    }
}

namespace detail
{

inline bool all_digits(std::string_view s) noexcept
{
    for (char c : s)
    {
        if (c < '0' || c > '9')
        {
            return false;
        }
    }
    return !s.empty();
}

/// d..dmm.m+ with the given number of degree digits.
inline bool is_angle_field(std::string_view s, std::size_t degree_digits, int max_degrees)
{
    const auto dot = s.find('.');
    if (dot != degree_digits + 2 || !all_digits(s.substr(0, dot)) || !all_digits(s.substr(dot + 1)))
    {
        return false;
    }
    const int degrees = std::stoi(std::string(s.substr(0, degree_digits)));
    const int minutes = std::stoi(std::string(s.substr(degree_digits, 2)));
    if (minutes >= 60 || degrees > max_degrees)
    {
        return false;
    }
    return degrees < max_degrees || std::stod(std::string(s.substr(degree_digits))) == 0.0;
}

} // namespace detail

inline bool is_latitude_field(std::string_view s) { return detail::is_angle_field(s, 2, 90); }
inline bool is_longitude_field(std::string_view s) { return detail::is_angle_field(s, 3, 180); }

/// ddmm.mmmm / dddmm.mmmm plus hemisphere to signed decimal degrees.
inline double to_decimal_degrees(std::string_view field, char hemisphere)
{
    const bool latitude = hemisphere == 'N' || hemisphere == 'S';
    const bool longitude = hemisphere == 'E' || hemisphere == 'W';
    if (!latitude && !longitude)
    {
        throw Error(Errc::format, std::string("bad hemisphere '") + hemisphere + "'");
    }
    if (latitude ? !is_latitude_field(field) : !is_longitude_field(field))
    {
        throw Error(Errc::format, "bad coordinate '" + std::string(field) + "'");
    }
    const std::size_t degree_digits = latitude ? 2 : 3;
    int degrees = 0;
    std::from_chars(field.data(), field.data() + degree_digits, degrees);
    double minutes = 0.0;
    std::from_chars(field.data() + degree_digits, field.data() + field.size(), minutes);
    const double value = degrees + minutes / 60.0;
    return hemisphere == 'S' || hemisphere == 'W' ? -value : value;
}

struct Fix
{
    std::string latitude = "4807.038";
    char ns = 'N';
    std::string longitude = "01131.000";
    char ew = 'E';

    friend bool operator==(const Fix&, const Fix&) = default;
};

/// hhmmss.ss from milliseconds since midnight (wraps at 24 h).
inline std::string utc_field(std::uint64_t ms)
{
    ms %= 24ull * 3600 * 1000;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02u%02u%02u.%02u", static_cast<unsigned>(ms / 3600000),
                  static_cast<unsigned>(ms / 60000 % 60), static_cast<unsigned>(ms / 1000 % 60),
                  static_cast<unsigned>(ms % 1000 / 10));
    return buf;
}

inline std::string gga_body(std::uint64_t time_ms, const Fix& fix)
{
    return "GPGGA," + utc_field(time_ms) + "," + fix.latitude + "," + fix.ns + "," + fix.longitude + "," + fix.ew +
           ",1,08,0.9,10.0,M,0.0,M,,";
}

inline std::string rmc_body(std::uint64_t time_ms, const Fix& fix)
{
    return "GPRMC," + utc_field(time_ms) + ",A," + fix.latitude + "," + fix.ns + "," + fix.longitude + "," + fix.ew +
           ",0.0,0.0,010121,,,A";
}

struct GgaPosition
{
    std::string latitude;
    char ns = 'N';
    std::string longitude;
    char ew = 'E';
};

/// Position fields of a validated GGA body; throws Error(format) otherwise.
inline GgaPosition parse_gga(std::string_view body)
{
    const auto fields = split_fields(body);
    if (fields.size() < 7 || fields[0].size() != 5 || fields[0].substr(2) != "GGA")
    {
        throw Error(Errc::format, "not a GGA sentence");
    }
    if (fields[3].size() != 1 || fields[5].size() != 1 || !is_latitude_field(fields[2]) ||
        !is_longitude_field(fields[4]) || (fields[3][0] != 'N' && fields[3][0] != 'S') ||
        (fields[5][0] != 'E' && fields[5][0] != 'W'))
    {
        throw Error(Errc::format, "malformed GGA position");
    }
    return GgaPosition{fields[2], fields[3][0], fields[4], fields[5][0]};
}

} // namespace dharness::nmea

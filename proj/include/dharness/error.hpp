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

#include <stdexcept>
#include <string>
#include <string_view>

namespace dharness
{

enum class Errc
{
    invalid_argument,
    time_regression,
    timeout,
    scan_timeout,
    not_connected,
    not_ready,
    not_started,
    nack,
    cs_not_asserted,
    channel_closed,
    protocol,
    format,
    invalid_register,
    unsupported,
};

inline constexpr std::string_view errc_name(Errc code) noexcept
{
    switch (code)
    {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::time_regression: return "time_regression";
    case Errc::timeout: return "timeout";
    case Errc::scan_timeout: return "scan_timeout";
    case Errc::not_connected: return "not_connected";
    case Errc::not_ready: return "not_ready";
    case Errc::not_started: return "not_started";
    case Errc::nack: return "nack";
    case Errc::cs_not_asserted: return "cs_not_asserted";
    case Errc::channel_closed: return "channel_closed";
    case Errc::protocol: return "protocol";
    case Errc::format: return "format";
    case Errc::invalid_register: return "invalid_register";
    case Errc::unsupported: return "unsupported";
    }
    return "unknown";
}

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-readable code. Device-side errors become `ERR` responses on the
/// wire; controller-side errors become ERROR verdicts in the harness.
class Error : public std::runtime_error
{
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace dharness

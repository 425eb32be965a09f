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

// Line-oriented command protocol between the orchestrating computer and the
// two devices. Wire grammar (one LF-terminated line per frame):
//
//   NEW <Class> <name> <json-array>
//   CALL <name>.<method> <json-array>
//   DEL <name>
//   PING
//   RESET
//
//   OK <json>
//   ERR <CODE> <message>

#include "dharness/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dharness::transport
{

using json = nlohmann::json;

inline constexpr std::size_t max_frame_length = 4096;
inline constexpr std::uint64_t default_virtual_timeout_ms = 5000;
inline constexpr std::uint64_t default_serial_timeout_ms = 2000;

inline bool is_frame_char(char c) noexcept { return c >= 0x20 && c <= 0x7e; }

inline void validate_frame(std::string_view line)
{
    if (line.size() > max_frame_length)
    {
        throw Error(Errc::protocol, "frame exceeds " + std::to_string(max_frame_length) + " bytes");
    }
    for (char c : line)
    {
        if (!is_frame_char(c))
        {
            throw Error(Errc::protocol, "frame contains a non-printable byte");
        }
    }
}

inline bool is_identifier(std::string_view s) noexcept
{
    if (s.empty())
    {
        return false;
    }
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    if (!alpha(s.front()))
    {
        return false;
    }
    for (char c : s.substr(1))
    {
        if (!alpha(c) && !digit(c))
        {
            return false;
        }
    }
    return true;
}

enum class Verb
{
    New,
    Call,
    Del,
    Ping,
    Reset,
};

/// For NEW, `method` holds the class name.
struct Command
{
    Verb verb = Verb::Ping;
    std::string object;
    std::string method;
    json args = json::array();

    friend bool operator==(const Command&, const Command&) = default;

    static Command make_new(std::string cls, std::string name, json args = json::array())
    {
        return Command{Verb::New, std::move(name), std::move(cls), std::move(args)};
    }
    static Command make_call(std::string name, std::string method, json args = json::array())
    {
        return Command{Verb::Call, std::move(name), std::move(method), std::move(args)};
    }
    static Command make_del(std::string name) { return Command{Verb::Del, std::move(name), {}, json::array()}; }
    static Command ping() { return Command{Verb::Ping, {}, {}, json::array()}; }
    static Command reset() { return Command{Verb::Reset, {}, {}, json::array()}; }
};

struct Response
{
    bool ok = true;
    json payload;         // OK only
    std::string code;     // ERR only
    std::string message;  // ERR only

    friend bool operator==(const Response&, const Response&) = default;

    static Response success(json payload = nullptr) { return Response{true, std::move(payload), {}, {}}; }
    static Response failure(std::string code, std::string message)
    {
        return Response{false, nullptr, std::move(code), std::move(message)};
    }
};

namespace codes
{
inline constexpr std::string_view no_object = "NO_OBJECT";
inline constexpr std::string_view no_class = "NO_CLASS";
inline constexpr std::string_view no_method = "NO_METHOD";
inline constexpr std::string_view bad_args = "BAD_ARGS";
inline constexpr std::string_view exec = "EXEC";
inline constexpr std::string_view timeout = "TIMEOUT";
} // namespace codes

inline std::string dump_ascii(const json& value) { return value.dump(-1, ' ', true); }

inline std::string format_command(const Command& cmd)
{
    switch (cmd.verb)
    {
    case Verb::New: return "NEW " + cmd.method + " " + cmd.object + " " + dump_ascii(cmd.args);
    case Verb::Call: return "CALL " + cmd.object + "." + cmd.method + " " + dump_ascii(cmd.args);
    case Verb::Del: return "DEL " + cmd.object;
    case Verb::Ping: return "PING";
    case Verb::Reset: return "RESET";
    }
    return {};
}

namespace detail
{

inline std::pair<std::string_view, std::string_view> split_token(std::string_view s)
{
    const auto space = s.find(' ');
    if (space == std::string_view::npos)
    {
        return {s, {}};
    }
    return {s.substr(0, space), s.substr(space + 1)};
}

inline json parse_args(std::string_view text)
{
    json args = json::parse(text, nullptr, false);
    if (args.is_discarded() || !args.is_array())
    {
        throw Error(Errc::protocol, "arguments must be a JSON array");
    }
    return args;
}

inline void require_identifier(std::string_view s, std::string_view what)
{
    if (!is_identifier(s))
    {
        throw Error(Errc::protocol, "invalid " + std::string(what) + " '" + std::string(s) + "'");
    }
}

} // namespace detail

inline Command parse_command(std::string_view line)
{
    validate_frame(line);
    const auto [verb, rest] = detail::split_token(line);
    if (verb == "PING" || verb == "RESET")
    {
        if (!rest.empty() || line.size() != verb.size())
        {
            throw Error(Errc::protocol, std::string(verb) + " takes no operands");
        }
        return verb == "PING" ? Command::ping() : Command::reset();
    }
    if (verb == "DEL")
    {
        detail::require_identifier(rest, "object name");
        return Command::make_del(std::string(rest));
    }
    if (verb == "NEW")
    {
        const auto [cls, after_cls] = detail::split_token(rest);
        const auto [name, args] = detail::split_token(after_cls);
        detail::require_identifier(cls, "class name");
        detail::require_identifier(name, "object name");
        return Command::make_new(std::string(cls), std::string(name), detail::parse_args(args));
    }
    if (verb == "CALL")
    {
        const auto [target, args] = detail::split_token(rest);
        const auto dot = target.find('.');
        if (dot == std::string_view::npos)
        {
            throw Error(Errc::protocol, "CALL target must be <name>.<method>");
        }
        const auto name = target.substr(0, dot);
        const auto method = target.substr(dot + 1);
        detail::require_identifier(name, "object name");
        detail::require_identifier(method, "method name");
        return Command::make_call(std::string(name), std::string(method), detail::parse_args(args));
    }
    throw Error(Errc::protocol, "unknown verb '" + std::string(verb) + "'");
}

inline std::string sanitize_message(std::string_view message)
{
    std::string out;
    out.reserve(message.size());
    for (char c : message)
    {
        out.push_back(is_frame_char(c) ? c : '?');
    }
    if (out.size() > max_frame_length - 64)
    {
        out.resize(max_frame_length - 64);
    }
    return out;
}

inline std::string format_response(const Response& rsp)
{
    if (rsp.ok)
    {
        return "OK " + dump_ascii(rsp.payload);
    }
    std::string line = "ERR " + rsp.code;
    if (!rsp.message.empty())
    {
        line += " " + sanitize_message(rsp.message);
    }
    return line;
}

inline Response parse_response(std::string_view line)
{
    validate_frame(line);
    const auto [status, rest] = detail::split_token(line);
    if (status == "OK")
    {
        json payload = json::parse(rest, nullptr, false);
        if (payload.is_discarded())
        {
            throw Error(Errc::protocol, "malformed OK payload: '" + std::string(rest) + "'");
        }
        return Response::success(std::move(payload));
    }
    if (status == "ERR")
    {
        const auto [code, message] = detail::split_token(rest);
        const bool valid_code = !code.empty() && std::all_of(code.begin(), code.end(), [](char c) {
            return (c >= 'A' && c <= 'Z') || c == '_';
        });
        if (!valid_code)
        {
            throw Error(Errc::protocol, "malformed ERR code in '" + std::string(line) + "'");
        }
        return Response::failure(std::string(code), std::string(message));
    }
    throw Error(Errc::protocol, "malformed response line '" + std::string(line) + "'");
}

enum class Role
{
    controller,
    device,
};

/// One side of a line channel.
class Endpoint
{
public:
    virtual ~Endpoint() = default;

    virtual void write_line(std::string_view line) = 0;
    /// Next frame, or nullopt when nothing arrives within timeout_ms.
    virtual std::optional<std::string> read_line(std::uint64_t timeout_ms) = 0;
    virtual void close() = 0;
    virtual bool is_open() const = 0;

    Role role() const noexcept { return role_; }
    std::uint64_t timeout_ms() const noexcept { return timeout_ms_; }
    void set_timeout_ms(std::uint64_t ms) noexcept { timeout_ms_ = ms; }

protected:
    Endpoint(Role role, std::uint64_t timeout_ms) : role_(role), timeout_ms_(timeout_ms) {}

private:
    Role role_;
    std::uint64_t timeout_ms_;
};

namespace detail
{
struct VirtualChannel
{
    std::deque<std::string> inbox[2];
    bool closed[2] = {false, false};
};
} // namespace detail

/// In-process endpoint. Reads never block on their own; when the inbox is
/// empty the optional pump is invoked with the read timeout so that the
/// owner of the peer (a simulated device) can run.
class VirtualEndpoint final : public Endpoint
{
public:
    using Pump = std::function<void(std::uint64_t timeout_ms)>;

    VirtualEndpoint(std::shared_ptr<detail::VirtualChannel> channel, int side, Role role)
        : Endpoint(role, default_virtual_timeout_ms), channel_(std::move(channel)), side_(side)
    {
    }

    void write_line(std::string_view line) override
    {
        if (channel_->closed[side_] || channel_->closed[1 - side_])
        {
            throw Error(Errc::channel_closed, "virtual channel is closed");
        }
        validate_frame(line);
        channel_->inbox[1 - side_].emplace_back(line);
    }

    std::optional<std::string> read_line(std::uint64_t timeout_ms) override
    {
        auto& inbox = channel_->inbox[side_];
        if (inbox.empty() && pump_ && !channel_->closed[side_])
        {
            pump_(timeout_ms);
        }
        if (!inbox.empty())
        {
            std::string line = std::move(inbox.front());
            inbox.pop_front();
            return line;
        }
        if (channel_->closed[side_] || channel_->closed[1 - side_])
        {
            throw Error(Errc::channel_closed, "virtual channel is closed");
        }
        return std::nullopt;
    }

    void close() override { channel_->closed[side_] = true; }
    bool is_open() const override { return !channel_->closed[side_] && !channel_->closed[1 - side_]; }

    bool has_pending() const { return !channel_->inbox[side_].empty(); }
    void set_pump(Pump pump) { pump_ = std::move(pump); }

private:
    std::shared_ptr<detail::VirtualChannel> channel_;
    int side_;
    Pump pump_;
};

/// Linked pair: first is the controller side, second the device side.
inline std::pair<std::unique_ptr<VirtualEndpoint>, std::unique_ptr<VirtualEndpoint>> open_virtual_pair()
{
    auto channel = std::make_shared<detail::VirtualChannel>();
    return {std::make_unique<VirtualEndpoint>(channel, 0, Role::controller),
            std::make_unique<VirtualEndpoint>(channel, 1, Role::device)};
}

struct SerialSettings
{
    unsigned baud = 115200;
    unsigned data_bits = 8;
    char parity = 'N';
    unsigned stop_bits = 1;
};

/// Hardware serial port. No backend ships with the library; link one in
/// and wrap it with SerialEndpoint to drive real boards.
class SerialPort
{
public:
    virtual ~SerialPort() = default;
    virtual void open(const std::string& path, const SerialSettings& settings) = 0;
    virtual std::optional<std::string> read_line(std::uint64_t timeout_ms) = 0;
    virtual void write_line(std::string_view line) = 0;
    virtual void close() = 0;
    virtual bool is_open() const = 0;
};

using SerialPortFactory = std::function<std::unique_ptr<SerialPort>()>;

class SerialEndpoint final : public Endpoint
{
public:
    SerialEndpoint(std::unique_ptr<SerialPort> port, Role role)
        : Endpoint(role, default_serial_timeout_ms), port_(std::move(port))
    {
    }

    void write_line(std::string_view line) override
    {
        validate_frame(line);
        port_->write_line(line);
    }
    std::optional<std::string> read_line(std::uint64_t timeout_ms) override { return port_->read_line(timeout_ms); }
    void close() override { port_->close(); }
    bool is_open() const override { return port_->is_open(); }

private:
    std::unique_ptr<SerialPort> port_;
};

enum class Direction
{
    command,
    response,
};

struct LogEntry
{
    std::uint64_t seq = 0;
    std::uint64_t at_ms = 0;
    std::string device;
    Direction direction = Direction::command;
    std::string line;
};

/// Chronological record of every frame exchanged by the controllers of one
/// session. The harness slices it per test case for debug output.
class TransportLog
{
public:
    void record(std::uint64_t at_ms, std::string device, Direction direction, std::string line)
    {
        entries_.push_back(LogEntry{entries_.size(), at_ms, std::move(device), direction, std::move(line)});
    }
    const std::vector<LogEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<LogEntry> entries_;
};

/// Controller side of one device link: serializes commands, waits for the
/// matching response, and synthesizes a timeout when the device stays silent.
class Controller
{
public:
    using Clock = std::function<std::uint64_t()>;

    Controller(Endpoint& endpoint, std::string device, TransportLog* log = nullptr, Clock clock = {})
        : endpoint_(&endpoint), device_(std::move(device)), log_(log), clock_(std::move(clock))
    {
        if (endpoint.role() != Role::controller)
        {
            throw Error(Errc::invalid_argument, "controller needs a controller-role endpoint");
        }
    }

    const std::string& device() const noexcept { return device_; }
    std::uint64_t timeout_ms() const noexcept { return endpoint_->timeout_ms(); }
    std::size_t unanswered() const noexcept { return unanswered_; }

    /// Throws Error(timeout) when no response arrives in time and
    /// Error(protocol) when the response line is malformed.
    Response send_command(const Command& cmd, std::optional<std::uint64_t> timeout_ms = std::nullopt)
    {
        if (unanswered_ > 0)
        {
            // Late answers to timed-out commands would otherwise be paired
            // with the wrong request.
            while (endpoint_->read_line(0))
            {
            }
            if (cmd.verb == Verb::Reset)
            {
                unanswered_ = 0;
            }
        }
        const std::string line = format_command(cmd);
        record(Direction::command, line);
        endpoint_->write_line(line);

        const std::uint64_t wait = timeout_ms.value_or(endpoint_->timeout_ms());
        auto reply = endpoint_->read_line(wait);
        if (!reply)
        {
            ++unanswered_;
            throw Error(Errc::timeout, device_ + " did not respond within " + std::to_string(wait) + " ms");
        }
        record(Direction::response, *reply);
        return parse_response(*reply);
    }

private:
    void record(Direction direction, const std::string& line)
    {
        if (log_)
        {
            log_->record(clock_ ? clock_() : 0, device_, direction, line);
        }
    }

    Endpoint* endpoint_;
    std::string device_;
    TransportLog* log_;
    Clock clock_;
    std::size_t unanswered_ = 0;
};

} // namespace dharness::transport

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

#include "dharness/error.hpp"
#include "dharness/simcore.hpp"
#include "dharness/transport.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

namespace dharness::transport
{

/// An object living on a device, reachable through CALL <name>.<method>.
class DeviceObject
{
public:
    using Method = std::function<json(const json& args)>;

    virtual ~DeviceObject() = default;

    void expose(std::string name, Method method) { methods_.insert_or_assign(std::move(name), std::move(method)); }

    bool has_method(std::string_view name) const { return methods_.find(name) != methods_.end(); }

    json invoke(std::string_view name, const json& args) const
    {
        auto it = methods_.find(name);
        if (it == methods_.end())
        {
            throw std::out_of_range(std::string(name));
        }
        return it->second(args);
    }

private:
    std::map<std::string, Method, std::less<>> methods_;
};

/// Owns a plain C++ peripheral model and exposes selected members on the wire.
template <class T>
class Bound final : public DeviceObject
{
public:
    template <class... Args>
    explicit Bound(Args&&... args) : target_(std::forward<Args>(args)...)
    {
    }

    T& target() noexcept { return target_; }

private:
    T target_;
};

inline void expect_arity(const json& args, std::size_t min, std::size_t max)
{
    if (args.size() < min || args.size() > max)
    {
        throw Error(Errc::invalid_argument, "expected " + std::to_string(min) +
                                                (min == max ? "" : ".." + std::to_string(max)) +
                                                " arguments, got " + std::to_string(args.size()));
    }
}

template <class T>
T arg(const json& args, std::size_t index)
{
    if (index >= args.size())
    {
        throw Error(Errc::invalid_argument, "missing argument " + std::to_string(index));
    }
    const json& value = args[index];
    auto bad = [index](const char* expected) {
        return Error(Errc::invalid_argument, "argument " + std::to_string(index) + ": expected " + expected);
    };
    if constexpr (std::is_same_v<T, bool>)
    {
        if (!value.is_boolean())
        {
            throw bad("boolean");
        }
        return value.get<bool>();
    }
    else if constexpr (std::is_integral_v<T>)
    {
        if (!value.is_number_integer() || (std::is_unsigned_v<T> && value.get<std::int64_t>() < 0))
        {
            throw bad(std::is_unsigned_v<T> ? "non-negative integer" : "integer");
        }
        return value.get<T>();
    }
    else if constexpr (std::is_floating_point_v<T>)
    {
        if (!value.is_number())
        {
            throw bad("number");
        }
        return value.get<T>();
    }
    else if constexpr (std::is_same_v<T, std::string>)
    {
        if (!value.is_string())
        {
            throw bad("string");
        }
        return value.get<std::string>();
    }
    else if constexpr (std::is_same_v<T, std::vector<std::uint8_t>>)
    {
        if (!value.is_array())
        {
            throw bad("byte array");
        }
        std::vector<std::uint8_t> bytes;
        bytes.reserve(value.size());
        for (const auto& b : value)
        {
            if (!b.is_number_integer() || b.get<std::int64_t>() < 0 || b.get<std::int64_t>() > 255)
            {
                throw bad("byte array");
            }
            bytes.push_back(static_cast<std::uint8_t>(b.get<int>()));
        }
        return bytes;
    }
    else
    {
        static_assert(sizeof(T) == 0, "unsupported argument type");
    }
}

/// Hosts installed classes and live objects for one device, and answers
/// commands read from a device-role endpoint.
class Device
{
public:
    using Factory = std::function<std::unique_ptr<DeviceObject>(const json& args)>;

    explicit Device(std::string name) : name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

    void install(std::string cls, Factory factory) { classes_.insert_or_assign(std::move(cls), std::move(factory)); }
    void uninstall_all() { classes_.clear(); }
    bool has_class(std::string_view cls) const { return classes_.find(cls) != classes_.end(); }

    bool has_object(std::string_view name) const { return objects_.find(name) != objects_.end(); }
    std::size_t object_count() const noexcept { return objects_.size(); }
    std::size_t abandoned() const noexcept { return abandoned_; }

    /// Direct access for in-process inspection (tests, debugging).
    DeviceObject* object(std::string_view name)
    {
        auto it = objects_.find(name);
        return it == objects_.end() ? nullptr : it->second.get();
    }

    /// sim::HorizonReached propagates; everything else becomes an ERR response.
    Response handle(const Command& cmd)
    {
        switch (cmd.verb)
        {
        case Verb::Ping: return Response::success();
        case Verb::Reset: objects_.clear(); return Response::success();
        case Verb::Del:
            if (objects_.erase(cmd.object) == 0)
            {
                return unknown_object(cmd.object);
            }
            return Response::success();
        case Verb::New: {
            auto cls = classes_.find(cmd.method);
            if (cls == classes_.end())
            {
                return Response::failure(std::string(codes::no_class), "unknown class '" + cmd.method + "'");
            }
            // Rebinding a name replaces the previous object, as an interpreter
            // would. The old one goes first so it releases its bus resources.
            objects_.erase(cmd.object);
            return guarded([&] {
                objects_.emplace(cmd.object, cls->second(cmd.args));
                return json(nullptr);
            });
        }
        case Verb::Call: {
            auto it = objects_.find(cmd.object);
            if (it == objects_.end())
            {
                return unknown_object(cmd.object);
            }
            if (!it->second->has_method(cmd.method))
            {
                return Response::failure(std::string(codes::no_method),
                                         "'" + cmd.object + "' has no method '" + cmd.method + "'");
            }
            DeviceObject& target = *it->second;
            return guarded([&] { return target.invoke(cmd.method, cmd.args); });
        }
        }
        return Response::failure(std::string(codes::exec), "unhandled verb");
    }

    Response handle_line(std::string_view line)
    {
        Command cmd;
        try
        {
            cmd = parse_command(line);
        }
        catch (const Error& e)
        {
            return Response::failure(std::string(codes::bad_args), e.what());
        }
        return handle(cmd);
    }

    /// Answers every command already queued on the endpoint. A command whose
    /// execution runs into the scheduler horizon is abandoned: the device was
    /// still busy when the controller stopped waiting, so no response is sent.
    std::size_t serve_pending(Endpoint& endpoint)
    {
        std::size_t served = 0;
        while (auto line = endpoint.read_line(0))
        {
            Response rsp;
            try
            {
                rsp = handle_line(*line);
            }
            catch (const sim::HorizonReached&)
            {
                ++abandoned_;
                return served;
            }
            endpoint.write_line(format_response(rsp));
            ++served;
        }
        return served;
    }

    /// Serves until the channel closes, the endpoint stays idle for its
    /// timeout, or (optionally) a RESET has been answered.
    void serve(Endpoint& endpoint, bool stop_on_reset = false)
    {
        try
        {
            while (auto line = endpoint.read_line(endpoint.timeout_ms()))
            {
                Response rsp;
                bool was_reset = false;
                try
                {
                    const auto parsed = parse_command(*line);
                    was_reset = parsed.verb == Verb::Reset;
                    rsp = handle(parsed);
                }
                catch (const Error& e)
                {
                    rsp = Response::failure(std::string(codes::bad_args), e.what());
                }
                catch (const sim::HorizonReached&)
                {
                    ++abandoned_;
                    continue;
                }
                endpoint.write_line(format_response(rsp));
                if (was_reset && stop_on_reset)
                {
                    return;
                }
            }
        }
        catch (const Error& e)
        {
            if (e.code() != Errc::channel_closed)
            {
                throw;
            }
        }
    }

private:
    static Response unknown_object(const std::string& name)
    {
        return Response::failure(std::string(codes::no_object), "unknown object '" + name + "'");
    }

    template <class F>
    static Response guarded(F&& body)
    {
        try
        {
            return Response::success(body());
        }
        catch (const sim::HorizonReached&)
        {
            throw;
        }
        catch (const Error& e)
        {
            if (e.code() == Errc::invalid_argument)
            {
                return Response::failure(std::string(codes::bad_args), e.what());
            }
            return Response::failure(std::string(codes::exec),
                                     std::string(errc_name(e.code())) + ": " + e.what());
        }
        catch (const nlohmann::json::exception& e)
        {
            return Response::failure(std::string(codes::bad_args), e.what());
        }
        catch (const std::exception& e)
        {
            return Response::failure(std::string(codes::exec), e.what());
        }
    }

    std::string name_;
    std::map<std::string, Factory, std::less<>> classes_;
    std::map<std::string, std::unique_ptr<DeviceObject>, std::less<>> objects_;
    std::size_t abandoned_ = 0;
};

} // namespace dharness::transport

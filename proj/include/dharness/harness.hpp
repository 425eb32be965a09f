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

// Test orchestration. A suite run has a setup phase (PING, RESET and module
// upload on both devices) followed by the execution phase, where every case
// gets a fresh RESET on both devices and then drives the four-step flow:
// create objects, inject calls, gather results, assert.

#include "dharness/error.hpp"
#include "dharness/transport.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dharness::harness
{

using json = nlohmann::json;

enum class Side
{
    dut,
    double_,
};

inline constexpr std::string_view side_name(Side side) noexcept { return side == Side::dut ? "dut" : "double"; }

enum class Verdict
{
    pass,
    fail,
    error,
};

inline constexpr std::string_view verdict_name(Verdict v) noexcept
{
    switch (v)
    {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::error: return "ERROR";
    }
    return "ERROR";
}

// ---------------------------------------------------------------------------
// Matchers

class Matcher
{
public:
    enum class Kind
    {
        equal,
        close_to,
        within,
        is_true,
    };

    static Matcher equal(json expected)
    {
        Matcher m{Kind::equal};
        m.expected_ = std::move(expected);
        return m;
    }

    /// Passes iff |actual - expected| <= tolerance. The boundary is inclusive.
    static Matcher close_to(double expected, double tolerance)
    {
        if (!(tolerance >= 0.0) || !std::isfinite(expected))
        {
            throw Error(Errc::invalid_argument, "close_to needs a finite expected value and a tolerance >= 0");
        }
        Matcher m{Kind::close_to};
        m.expected_ = expected;
        m.tolerance_ = tolerance;
        return m;
    }

    /// Inclusive range [lo, hi].
    static Matcher within(double lo, double hi)
    {
        if (!(lo <= hi))
        {
            throw Error(Errc::invalid_argument, "within needs lo <= hi");
        }
        Matcher m{Kind::within};
        m.lo_ = lo;
        m.hi_ = hi;
        return m;
    }

    static Matcher is_true() { return Matcher{Kind::is_true}; }

    Kind kind() const noexcept { return kind_; }

    bool matches(const json& actual) const
    {
        switch (kind_)
        {
        case Kind::equal: return actual == expected_;
        case Kind::close_to:
            return actual.is_number() && std::fabs(actual.get<double>() - expected_.get<double>()) <= tolerance_;
        case Kind::within: return actual.is_number() && actual.get<double>() >= lo_ && actual.get<double>() <= hi_;
        case Kind::is_true: return actual.is_boolean() && actual.get<bool>();
        }
        return false;
    }

    json describe() const
    {
        switch (kind_)
        {
        case Kind::equal: return {{"kind", "equal"}, {"expected", expected_}};
        case Kind::close_to: return {{"kind", "close_to"}, {"expected", expected_}, {"tolerance", tolerance_}};
        case Kind::within: return {{"kind", "within"}, {"lo", lo_}, {"hi", hi_}};
        case Kind::is_true: return {{"kind", "is_true"}};
        }
        return nullptr;
    }

    /// Reconstructs a matcher from describe() output.
    static Matcher from_description(const json& d)
    {
        const auto kind = d.at("kind").get<std::string>();
        if (kind == "equal")
        {
            return equal(d.at("expected"));
        }
        if (kind == "close_to")
        {
            return close_to(d.at("expected").get<double>(), d.at("tolerance").get<double>());
        }
        if (kind == "within")
        {
            return within(d.at("lo").get<double>(), d.at("hi").get<double>());
        }
        if (kind == "is_true")
        {
            return is_true();
        }
        throw Error(Errc::format, "unknown matcher kind '" + kind + "'");
    }

    std::string to_string() const
    {
        switch (kind_)
        {
        case Kind::equal: return "equal to " + transport::dump_ascii(expected_);
        case Kind::close_to:
            return "close to " + transport::dump_ascii(expected_) + " +/- " + transport::dump_ascii(tolerance_);
        case Kind::within: return "within [" + transport::dump_ascii(lo_) + ", " + transport::dump_ascii(hi_) + "]";
        case Kind::is_true: return "true";
        }
        return {};
    }

private:
    explicit Matcher(Kind kind) : kind_(kind) {}

    Kind kind_;
    json expected_;
    double tolerance_ = 0.0;
    double lo_ = 0.0;
    double hi_ = 0.0;
};

struct Assertion
{
    std::string label;
    json matcher; // Matcher::describe()
    json actual;
    bool passed = false;

    json to_json() const { return {{"label", label}, {"matcher", matcher}, {"actual", actual}, {"passed", passed}}; }
};

// ---------------------------------------------------------------------------
// Results

struct TestResult
{
    std::string suite;
    std::string name;
    Verdict verdict = Verdict::pass;
    json inputs = json::object();
    json outputs = json::object();
    std::string message;
    std::string code; // ERROR only, e.g. TIMEOUT or EXEC
    std::vector<Assertion> assertions;
    std::uint64_t sim_ms = 0;
    double wall_ms = 0.0;
    // Half-open slice of the session's transport log covering this case.
    std::size_t log_begin = 0;
    std::size_t log_end = 0;
};

struct SuiteReport
{
    std::string suite;
    std::vector<TestResult> results;
    std::vector<transport::LogEntry> log;
};

struct Summary
{
    std::size_t passed = 0;
    std::size_t failed = 0;
    std::size_t errors = 0;

    bool all_passed() const noexcept { return failed == 0 && errors == 0; }
};

inline Summary summarize(const std::vector<SuiteReport>& reports)
{
    Summary s;
    for (const auto& report : reports)
    {
        for (const auto& r : report.results)
        {
            (r.verdict == Verdict::pass ? s.passed : r.verdict == Verdict::fail ? s.failed : s.errors) += 1;
        }
    }
    return s;
}

/// Name used for the synthetic result of a failed setup phase.
inline constexpr std::string_view setup_case_name = "<setup>";

inline SuiteReport setup_error_report(std::string suite, std::string code, std::string message)
{
    SuiteReport report{std::move(suite), {}, {}};
    TestResult r;
    r.suite = report.suite;
    r.name = std::string(setup_case_name);
    r.verdict = Verdict::error;
    r.code = std::move(code);
    r.message = std::move(message);
    report.results.push_back(std::move(r));
    return report;
}

// ---------------------------------------------------------------------------
// Session: the orchestrating computer's view of one DUT/Double pair

class Session
{
public:
    virtual ~Session() = default;
    virtual transport::Controller& controller(Side side) = 0;
    /// Makes the named code modules available on a device (setup phase).
    virtual void upload(Side side, const std::vector<std::string>& modules) = 0;
    /// Lets time pass while the harness waits.
    virtual void sleep_ms(std::uint64_t ms) = 0;
    virtual std::uint64_t now_ms() const = 0;
    virtual const transport::TransportLog& log() const = 0;
};

// ---------------------------------------------------------------------------
// Suites

class CaseContext;

struct TestCase
{
    std::string name;
    std::function<void(CaseContext&)> body;
};

inline bool has_prefix(std::string_view s, std::string_view prefix) noexcept
{
    return s.size() > prefix.size() && s.substr(0, prefix.size()) == prefix;
}

class Suite
{
public:
    /// Module names must start with dut_ (DUT side) or Double_ (Double side).
    Suite(std::string name, std::vector<std::string> dut_modules, std::vector<std::string> double_modules)
        : name_(std::move(name)), dut_modules_(std::move(dut_modules)), double_modules_(std::move(double_modules))
    {
        if (name_.empty())
        {
            throw Error(Errc::invalid_argument, "suite name is empty");
        }
        for (const auto& m : dut_modules_)
        {
            if (!has_prefix(m, "dut_") || !transport::is_identifier(m))
            {
                throw Error(Errc::invalid_argument, "DUT module '" + m + "' must be an identifier starting with dut_");
            }
        }
        for (const auto& m : double_modules_)
        {
            if (!has_prefix(m, "Double_") || !transport::is_identifier(m))
            {
                throw Error(Errc::invalid_argument,
                            "Double module '" + m + "' must be an identifier starting with Double_");
            }
        }
    }

    Suite& add(std::string case_name, std::function<void(CaseContext&)> body)
    {
        if (!has_prefix(case_name, "test_") || !transport::is_identifier(case_name))
        {
            throw Error(Errc::invalid_argument, "test case '" + case_name + "' must be an identifier starting with test_");
        }
        if (!body)
        {
            throw Error(Errc::invalid_argument, "test case '" + case_name + "' has no body");
        }
        for (const auto& c : cases_)
        {
            if (c.name == case_name)
            {
                throw Error(Errc::invalid_argument, "duplicate test case '" + case_name + "' in suite " + name_);
            }
        }
        cases_.push_back(TestCase{std::move(case_name), std::move(body)});
        return *this;
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& dut_modules() const noexcept { return dut_modules_; }
    const std::vector<std::string>& double_modules() const noexcept { return double_modules_; }
    const std::vector<TestCase>& cases() const noexcept { return cases_; }

private:
    std::string name_;
    std::vector<std::string> dut_modules_;
    std::vector<std::string> double_modules_;
    std::vector<TestCase> cases_;
};

struct RunOptions
{
    bool fail_fast = false;
};

// ---------------------------------------------------------------------------
// Case context

namespace detail
{

/// A device answered ERR, or the transport failed; ends the case as ERROR.
struct CaseError
{
    std::string code;
    std::string message;
};

/// fail_fast short-circuit after a failed expectation.
struct CaseAbort
{
};

inline std::string errc_code(Errc e)
{
    std::string s(errc_name(e));
    for (auto& c : s)
    {
        if (c >= 'a' && c <= 'z')
        {
            c = static_cast<char>(c - 'a' + 'A');
        }
    }
    return s;
}

} // namespace detail

class CaseContext
{
public:
    CaseContext(Session& session, TestResult& result, const RunOptions& options)
        : session_(&session), result_(&result), options_(&options)
    {
    }

    /// Step 1: create an object on a device.
    void new_on_dut(const std::string& name, const std::string& cls, json args = json::array())
    {
        create(Side::dut, name, cls, std::move(args));
    }

    void new_on_double(const std::string& name, const std::string& cls, json args = json::array())
    {
        create(Side::double_, name, cls, std::move(args));
    }

    /// Step 2: invoke a method. The response payload is also recorded as an
    /// output under "<side>.<object>.<method>".
    json call(Side side, const std::string& object, const std::string& method, json args = json::array(),
              std::optional<std::uint64_t> timeout_ms = std::nullopt)
    {
        const std::string key = std::string(side_name(side)) + "." + object + "." + method;
        if (!args.empty())
        {
            result_->inputs[key] = args;
        }
        json payload = send(side, transport::Command::make_call(object, method, std::move(args)), timeout_ms);
        if (!payload.is_null())
        {
            result_->outputs[key] = payload;
        }
        return payload;
    }

    /// Step 3: record a gathered value under an explicit key.
    void gather(const std::string& key, json value) { result_->outputs[key] = std::move(value); }

    /// Records a test parameter that is not a call argument.
    void input(const std::string& key, json value) { result_->inputs[key] = std::move(value); }

    /// Step 4: assert. Returns whether the matcher held.
    bool expect(const std::string& label, const json& actual, const Matcher& matcher)
    {
        const bool ok = matcher.matches(actual);
        result_->assertions.push_back(Assertion{label, matcher.describe(), actual, ok});
        result_->outputs[label] = actual;
        if (!ok && options_->fail_fast)
        {
            throw detail::CaseAbort{};
        }
        return ok;
    }

    void decommission(Side side, const std::string& object) { send(side, transport::Command::make_del(object), {}); }

    void sleep(std::uint64_t ms) { session_->sleep_ms(ms); }

    std::uint64_t now_ms() const { return session_->now_ms(); }

private:
    void create(Side side, const std::string& name, const std::string& cls, json args)
    {
        result_->inputs[std::string(side_name(side)) + "." + name] = json{{"class", cls}, {"args", args}};
        send(side, transport::Command::make_new(cls, name, std::move(args)), {});
    }

    json send(Side side, const transport::Command& cmd, std::optional<std::uint64_t> timeout_ms)
    {
        transport::Response rsp;
        try
        {
            rsp = session_->controller(side).send_command(cmd, timeout_ms);
        }
        catch (const Error& e)
        {
            throw detail::CaseError{detail::errc_code(e.code()), e.what()};
        }
        if (!rsp.ok)
        {
            throw detail::CaseError{rsp.code, std::string(side_name(side)) + ": " + rsp.message};
        }
        return rsp.payload;
    }

    Session* session_;
    TestResult* result_;
    const RunOptions* options_;
};

// ---------------------------------------------------------------------------
// Running

namespace detail
{

inline void require_ok(transport::Controller& c, const transport::Command& cmd)
{
    const auto rsp = c.send_command(cmd);
    if (!rsp.ok)
    {
        throw CaseError{rsp.code, c.device() + ": " + rsp.message};
    }
}

inline void finish_verdict(TestResult& r)
{
    if (r.verdict == Verdict::error)
    {
        return;
    }
    for (const auto& a : r.assertions)
    {
        if (!a.passed)
        {
            r.verdict = Verdict::fail;
            const Matcher m = Matcher::from_description(a.matcher);
            r.message = a.label + ": expected " + m.to_string() + ", got " + transport::dump_ascii(a.actual);
            return;
        }
    }
    r.verdict = Verdict::pass;
}

} // namespace detail

inline SuiteReport run_suite(const Suite& suite, Session& session, const RunOptions& options = {})
{
    using clock = std::chrono::steady_clock;
    SuiteReport report{suite.name(), {}, {}};
    const std::size_t log_start = session.log().size();
    auto snapshot_log = [&] {
        const auto& entries = session.log().entries();
        report.log.assign(entries.begin() + static_cast<std::ptrdiff_t>(log_start), entries.end());
    };

    // Setup phase.
    try
    {
        for (Side side : {Side::dut, Side::double_})
        {
            auto& c = session.controller(side);
            detail::require_ok(c, transport::Command::ping());
            detail::require_ok(c, transport::Command::reset());
            session.upload(side, side == Side::dut ? suite.dut_modules() : suite.double_modules());
        }
    }
    catch (const detail::CaseError& e)
    {
        auto failed = setup_error_report(suite.name(), e.code, e.message);
        failed.results.front().log_end = session.log().size() - log_start;
        report.results = std::move(failed.results);
        snapshot_log();
        return report;
    }
    catch (const Error& e)
    {
        auto failed = setup_error_report(suite.name(), detail::errc_code(e.code()), e.what());
        failed.results.front().log_end = session.log().size() - log_start;
        report.results = std::move(failed.results);
        snapshot_log();
        return report;
    }

    // Execution phase.
    for (const auto& tc : suite.cases())
    {
        TestResult r;
        r.suite = suite.name();
        r.name = tc.name;
        r.log_begin = session.log().size() - log_start;
        const auto sim_start = session.now_ms();
        const auto wall_start = clock::now();
        try
        {
            for (Side side : {Side::dut, Side::double_})
            {
                detail::require_ok(session.controller(side), transport::Command::reset());
            }
            CaseContext ctx(session, r, options);
            tc.body(ctx);
        }
        catch (const detail::CaseAbort&)
        {
        }
        catch (const detail::CaseError& e)
        {
            r.verdict = Verdict::error;
            r.code = e.code;
            r.message = e.message;
        }
        catch (const Error& e)
        {
            r.verdict = Verdict::error;
            r.code = detail::errc_code(e.code());
            r.message = e.what();
        }
        detail::finish_verdict(r);
        r.sim_ms = session.now_ms() - sim_start;
        r.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - wall_start).count();
        r.log_end = session.log().size() - log_start;
        report.results.push_back(std::move(r));
    }
    snapshot_log();
    return report;
}

// ---------------------------------------------------------------------------
// Reporting

inline json result_to_json(const TestResult& r)
{
    json j = {
        {"suite", r.suite},     {"name", r.name},       {"verdict", verdict_name(r.verdict)},
        {"inputs", r.inputs},   {"outputs", r.outputs}, {"message", r.message},
        {"sim_ms", r.sim_ms},   {"wall_ms", r.wall_ms},
    };
    if (!r.code.empty())
    {
        j["code"] = r.code;
    }
    json assertions = json::array();
    for (const auto& a : r.assertions)
    {
        assertions.push_back(a.to_json());
    }
    j["assertions"] = std::move(assertions);
    return j;
}

inline json render_json(const std::vector<SuiteReport>& reports)
{
    std::string names;
    json results = json::array();
    for (const auto& report : reports)
    {
        names += (names.empty() ? "" : ",") + report.suite;
        for (const auto& r : report.results)
        {
            results.push_back(result_to_json(r));
        }
    }
    const auto s = summarize(reports);
    return {{"suite", names},
            {"results", std::move(results)},
            {"summary", {{"passed", s.passed}, {"failed", s.failed}, {"errors", s.errors}}}};
}

inline std::string summary_line(const Summary& s)
{
    return std::to_string(s.passed) + " passed, " + std::to_string(s.failed) + " failed, " +
           std::to_string(s.errors) + " errors";
}

inline std::string format_log_entry(const transport::LogEntry& e)
{
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%10llu ms", static_cast<unsigned long long>(e.at_ms));
    std::string device = e.device;
    device.resize(std::max<std::size_t>(device.size(), 6), ' ');
    return std::string("      ") + stamp + "  " + device + (e.direction == transport::Direction::command ? " > " : " < ") +
           e.line;
}

inline std::string render_human(const std::vector<SuiteReport>& reports, bool debug)
{
    std::string out;
    for (const auto& report : reports)
    {
        out += "suite " + report.suite + "\n";
        for (const auto& r : report.results)
        {
            std::string verdict(verdict_name(r.verdict));
            verdict.resize(5, ' ');
            out += "  " + verdict + " " + r.name;
            if (!r.code.empty())
            {
                out += " [" + r.code + "]";
            }
            out += "  inputs=" + transport::dump_ascii(r.inputs) + " outputs=" + transport::dump_ascii(r.outputs);
            out += "  (" + std::to_string(r.sim_ms) + " sim ms)\n";
            if (!r.message.empty())
            {
                out += "        " + r.message + "\n";
            }
            if (debug)
            {
                for (std::size_t i = r.log_begin; i < r.log_end && i < report.log.size(); ++i)
                {
                    out += format_log_entry(report.log[i]) + "\n";
                }
            }
        }
        out += "  " + summary_line(summarize({report})) + "\n";
    }
    if (reports.size() > 1)
    {
        out += "total: " + summary_line(summarize(reports)) + "\n";
    }
    return out;
}

} // namespace dharness::harness

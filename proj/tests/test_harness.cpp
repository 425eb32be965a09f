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

#include "dharness/bench.hpp"
#include "dharness/harness.hpp"
#include "dharness/suites.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace dharness;
using namespace dharness::harness;
using bench::VirtualBench;

namespace
{

std::set<std::pair<std::string, std::string>> non_passing(const std::vector<SuiteReport>& reports)
{
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& report : reports)
    {
        for (const auto& r : report.results)
        {
            if (r.verdict != Verdict::pass)
            {
                out.emplace(r.suite, r.name);
            }
        }
    }
    return out;
}

std::vector<SuiteReport> run_all(const dut::Faults& faults)
{
    std::vector<SuiteReport> reports;
    for (const auto& suite : suites::all_suites())
    {
        VirtualBench bench(faults);
        reports.push_back(run_suite(suite, bench));
    }
    return reports;
}

const TestResult& find(const SuiteReport& report, std::string_view name)
{
    for (const auto& r : report.results)
    {
        if (r.name == name)
        {
            return r;
        }
    }
    throw std::runtime_error("no result " + std::string(name));
}

std::vector<transport::LogEntry> slice(const SuiteReport& report, const TestResult& r)
{
    return {report.log.begin() + static_cast<std::ptrdiff_t>(r.log_begin),
            report.log.begin() + static_cast<std::ptrdiff_t>(r.log_end)};
}

} // namespace

// ---------------------------------------------------------------------------
// Matchers

TEST(Matcher, CloseToBoundaries)
{
    const auto m = Matcher::close_to(2000.0, 1.0);
    EXPECT_TRUE(m.matches(2000.4));
    EXPECT_TRUE(m.matches(2001.0));
    EXPECT_TRUE(m.matches(1999.0));
    EXPECT_FALSE(m.matches(2001.5));
    EXPECT_FALSE(m.matches("2000"));
    EXPECT_FALSE(m.matches(nullptr));
}

TEST(Matcher, OtherKinds)
{
    EXPECT_TRUE(Matcher::equal(json::array({1, 2})).matches(json::array({1, 2})));
    EXPECT_FALSE(Matcher::equal(json::array({1, 2})).matches(json::array({2, 1})));
    EXPECT_TRUE(Matcher::within(1, 2).matches(2));
    EXPECT_FALSE(Matcher::within(1, 2).matches(2.0001));
    EXPECT_TRUE(Matcher::is_true().matches(true));
    EXPECT_FALSE(Matcher::is_true().matches(1));
    EXPECT_THROW(Matcher::close_to(0, -1), Error);
    EXPECT_THROW(Matcher::within(2, 1), Error);
}

TEST(Matcher, DescriptionRoundTrips)
{
    const Matcher ms[] = {Matcher::equal("x"), Matcher::close_to(3, 0.5), Matcher::within(-1, 1), Matcher::is_true()};
    for (const auto& m : ms)
    {
        const auto back = Matcher::from_description(m.describe());
        EXPECT_EQ(back.describe(), m.describe());
        EXPECT_EQ(back.to_string(), m.to_string());
    }
    EXPECT_THROW(Matcher::from_description({{"kind", "regex"}}), Error);
}

TEST(MatcherProperty, CloseToIsSymmetricAndMonotone)
{
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> value(-5000.0, 5000.0);
    std::uniform_real_distribution<double> tol(0.0, 50.0);
    for (int i = 0; i < 5000; ++i)
    {
        const double a = value(rng);
        const double b = a + std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
        const double t = tol(rng);
        ASSERT_EQ(Matcher::close_to(a, t).matches(b), Matcher::close_to(b, t).matches(a));
        // Widening the tolerance never turns a pass into a fail.
        if (Matcher::close_to(a, t).matches(b))
        {
            ASSERT_TRUE(Matcher::close_to(a, t + tol(rng)).matches(b));
        }
        // Moving the actual value toward the target never turns a pass into a fail.
        if (Matcher::close_to(a, t).matches(b))
        {
            ASSERT_TRUE(Matcher::close_to(a, t).matches(a + (b - a) / 2));
        }
    }
}

// ---------------------------------------------------------------------------
// Suite validation

TEST(Suite, ValidatesNames)
{
    EXPECT_THROW(Suite("", {}, {}), Error);
    EXPECT_THROW(Suite("s", {"blinker"}, {}), Error);
    EXPECT_THROW(Suite("s", {}, {"double_led"}), Error);
    EXPECT_THROW(Suite("s", {"dut_"}, {}), Error);
    Suite s("s", {"dut_blinker"}, {"Double_led"});
    EXPECT_THROW(s.add("blink", [](CaseContext&) {}), Error);
    EXPECT_THROW(s.add("test_x", nullptr), Error);
    s.add("test_x", [](CaseContext&) {});
    EXPECT_THROW(s.add("test_x", [](CaseContext&) {}), Error);
    EXPECT_EQ(s.cases().size(), 1u);
}

TEST(Suites, ShippedSuitesHaveTheExpectedCases)
{
    std::vector<std::string> names;
    for (const auto& suite : suites::all_suites())
    {
        for (const auto& c : suite.cases())
        {
            names.push_back(suite.name() + "/" + c.name);
        }
    }
    EXPECT_EQ(names.size(), 15u);
    EXPECT_THROW(suites::suite_by_name("nope"), Error);
    EXPECT_THROW(suites::designated_failures("nope"), Error);
}

// ---------------------------------------------------------------------------
// Running

TEST(RunSuite, BlinkPasses)
{
    VirtualBench bench;
    const auto report = run_suite(suites::blink_suite(), bench);
    ASSERT_EQ(report.results.size(), 2u);
    for (const auto& r : report.results)
    {
        EXPECT_EQ(r.verdict, Verdict::pass) << r.name << ": " << r.message;
        EXPECT_EQ(r.outputs.at("average_blink_ms"), 2000.0);
        EXPECT_EQ(r.inputs.at("dut.blinker"), (json{{"class", "Blinker"}, {"args", {2, 2000, 2}}}));
    }
    const auto human = render_human({report}, false);
    EXPECT_NE(human.find("suite blink\n"), std::string::npos);
    EXPECT_NE(human.find("2 passed, 0 failed, 0 errors"), std::string::npos);
    EXPECT_EQ(human.find("total:"), std::string::npos);
}

TEST(RunSuite, RtcResultsInDeclarationOrder)
{
    VirtualBench bench;
    const auto report = run_suite(suites::rtc_suite(), bench);
    std::vector<std::string> names;
    for (const auto& r : report.results)
    {
        names.push_back(r.name);
        EXPECT_EQ(r.verdict, Verdict::pass) << r.name << ": " << r.message;
    }
    EXPECT_EQ(names, (std::vector<std::string>{"test_set_date_time_static", "test_set_date_time_dynamic",
                                               "test_get_date_time", "test_set_get_date_time"}));
    EXPECT_EQ(find(report, "test_set_date_time_dynamic").sim_ms, 30000u);
}

TEST(RunSuite, EveryShippedCasePassesWithoutFaults)
{
    const auto reports = run_all({});
    EXPECT_TRUE(non_passing(reports).empty());
    EXPECT_EQ(summarize(reports).passed, 15u);
}

TEST(RunSuite, SlowBleSensorIsTimeoutWithUnansweredCommandLast)
{
    dut::Faults faults;
    dut::apply_fault(faults, "ble_init_delay_ms");
    VirtualBench bench(faults);
    const auto report = run_suite(suites::ble_suite(), bench);
    const auto& r = find(report, "test_connection");
    EXPECT_EQ(r.verdict, Verdict::error);
    EXPECT_EQ(r.code, "TIMEOUT");
    const auto entries = slice(report, r);
    ASSERT_FALSE(entries.empty());
    EXPECT_EQ(entries.back().direction, transport::Direction::command);
    EXPECT_EQ(entries.back().device, "double");
    EXPECT_EQ(entries.back().line, "CALL central.scan_connect [\"TempSensor\",0]");
    // The following cases recover and pass.
    EXPECT_EQ(find(report, "test_read").verdict, Verdict::pass);
    EXPECT_EQ(find(report, "test_notify").verdict, Verdict::pass);

    const auto debug = render_human({report}, true);
    EXPECT_NE(debug.find("ERROR test_connection [TIMEOUT]"), std::string::npos);
    EXPECT_NE(debug.find("double > CALL central.scan_connect"), std::string::npos);
}

TEST(RunSuite, PhaseOrderingInTheLog)
{
    VirtualBench bench;
    const auto report = run_suite(suites::spi_suite(), bench);
    ASSERT_FALSE(report.results.empty());
    // Setup: PING then RESET on each device, before any case.
    std::vector<std::string> setup;
    for (std::size_t i = 0; i < report.results.front().log_begin; ++i)
    {
        if (report.log[i].direction == transport::Direction::command)
        {
            setup.push_back(report.log[i].device + " " + report.log[i].line);
        }
    }
    EXPECT_EQ(setup, (std::vector<std::string>{"dut PING", "dut RESET", "double PING", "double RESET"}));

    std::size_t prev_end = report.results.front().log_begin;
    for (const auto& r : report.results)
    {
        EXPECT_EQ(r.log_begin, prev_end);
        prev_end = r.log_end;
        std::vector<std::string> commands;
        for (const auto& e : slice(report, r))
        {
            if (e.direction == transport::Direction::command)
            {
                commands.push_back(e.device + " " + e.line);
            }
        }
        ASSERT_GE(commands.size(), 4u) << r.name;
        EXPECT_EQ(commands[0], "dut RESET");
        EXPECT_EQ(commands[1], "double RESET");
        // Creation happens before any call, decommission after.
        std::size_t last_new = 0, first_call = commands.size(), first_del = commands.size(), last_call = 0;
        for (std::size_t i = 0; i < commands.size(); ++i)
        {
            const auto verb = commands[i].substr(commands[i].find(' ') + 1, 4);
            if (verb == "NEW ")
            {
                last_new = i;
            }
            if (verb == "CALL")
            {
                first_call = std::min(first_call, i);
                last_call = i;
            }
            if (verb == "DEL ")
            {
                first_del = std::min(first_del, i);
            }
        }
        EXPECT_LT(last_new, first_call) << r.name;
        EXPECT_LT(last_call, first_del) << r.name;
    }
    EXPECT_EQ(prev_end, report.log.size());
}

TEST(RunSuite, CasesAreIsolated)
{
    Suite s("iso", {"dut_rtc"}, {"Double_rtc"});
    s.add("test_create", [](CaseContext& ctx) { ctx.new_on_double("rtc", "Rtc"); });
    s.add("test_use_leftover", [](CaseContext& ctx) { ctx.call(Side::double_, "rtc", "get_registers"); });
    VirtualBench bench;
    const auto report = run_suite(s, bench);
    EXPECT_EQ(report.results[0].verdict, Verdict::pass);
    EXPECT_EQ(report.results[1].verdict, Verdict::error);
    EXPECT_EQ(report.results[1].code, "NO_OBJECT");
}

TEST(RunSuite, VerdictReplaysFromAssertions)
{
    std::vector<SuiteReport> reports;
    for (const char* fault : {"period_skew_ms", "swap_bcd_nibbles", "drop_first_byte"})
    {
        dut::Faults faults;
        dut::apply_fault(faults, fault);
        for (const auto& r : run_all(faults))
        {
            reports.push_back(r);
        }
    }
    for (const auto& report : reports)
    {
        for (const auto& r : report.results)
        {
            bool all = true;
            for (const auto& a : r.assertions)
            {
                const bool replay = Matcher::from_description(a.matcher).matches(a.actual);
                EXPECT_EQ(replay, a.passed) << r.name << " " << a.label;
                EXPECT_EQ(r.outputs.at(a.label), a.actual);
                all = all && replay;
            }
            if (r.verdict != Verdict::error)
            {
                EXPECT_EQ(r.verdict, all ? Verdict::pass : Verdict::fail) << r.name;
            }
        }
    }
}

TEST(RunSuite, EmptySuite)
{
    VirtualBench bench;
    const auto report = run_suite(Suite("empty", {}, {}), bench);
    EXPECT_TRUE(report.results.empty());
    EXPECT_NE(render_human({report}, false).find("0 passed, 0 failed, 0 errors"), std::string::npos);
}

TEST(RunSuite, FailFastStopsAtFirstFailedExpectation)
{
    Suite s("ff", {}, {});
    s.add("test_two", [](CaseContext& ctx) {
        ctx.expect("first", 1, Matcher::equal(2));
        ctx.expect("second", 3, Matcher::equal(3));
    });
    s.add("test_after", [](CaseContext& ctx) { ctx.expect("ok", true, Matcher::is_true()); });

    VirtualBench a;
    const auto normal = run_suite(s, a);
    EXPECT_EQ(normal.results[0].verdict, Verdict::fail);
    EXPECT_EQ(normal.results[0].assertions.size(), 2u);
    EXPECT_EQ(normal.results[0].message, "first: expected equal to 2, got 1");

    VirtualBench b;
    const auto fast = run_suite(s, b, RunOptions{true});
    EXPECT_EQ(fast.results[0].verdict, Verdict::fail);
    EXPECT_EQ(fast.results[0].assertions.size(), 1u);
    // Other cases still run.
    EXPECT_EQ(fast.results[1].verdict, Verdict::pass);
}

TEST(RunSuite, SetupFailureIsOneErrorResult)
{
    Suite s("broken", {"dut_missing"}, {});
    s.add("test_never", [](CaseContext&) {});
    VirtualBench bench;
    const auto report = run_suite(s, bench);
    ASSERT_EQ(report.results.size(), 1u);
    EXPECT_EQ(report.results[0].name, "<setup>");
    EXPECT_EQ(report.results[0].verdict, Verdict::error);
    EXPECT_EQ(report.results[0].code, "UNSUPPORTED");
}

TEST(RunSuite, DeviceErrorsBecomeErrorVerdicts)
{
    Suite s("err", {"dut_rtc"}, {});
    s.add("test_bad_class", [](CaseContext& ctx) { ctx.new_on_dut("x", "NoSuchClass"); });
    s.add("test_bad_method", [](CaseContext& ctx) {
        ctx.new_on_dut("driver", "RtcDriver");
        ctx.call(Side::dut, "driver", "fly");
    });
    VirtualBench bench;
    const auto report = run_suite(s, bench);
    EXPECT_EQ(report.results[0].code, "NO_CLASS");
    EXPECT_EQ(report.results[1].code, "NO_METHOD");
}

TEST(RunSuite, DesignatedFaultMatrix)
{
    for (const auto& info : dut::fault_catalog)
    {
        dut::Faults faults;
        dut::apply_fault(faults, info.name);
        std::set<std::pair<std::string, std::string>> expected;
        for (const auto& ref : suites::designated_failures(info.name))
        {
            expected.emplace(ref.suite, ref.name);
        }
        EXPECT_EQ(non_passing(run_all(faults)), expected) << info.name;
    }
}

TEST(RunSuite, SwapFaultVerdicts)
{
    dut::Faults faults;
    dut::apply_fault(faults, "swap_bcd_nibbles");
    VirtualBench bench(faults);
    const auto report = run_suite(suites::rtc_suite(), bench);
    EXPECT_EQ(find(report, "test_set_date_time_static").verdict, Verdict::fail);
    EXPECT_EQ(find(report, "test_set_date_time_dynamic").verdict, Verdict::fail);
    EXPECT_EQ(find(report, "test_get_date_time").verdict, Verdict::pass);
    EXPECT_EQ(find(report, "test_set_get_date_time").verdict, Verdict::error);
    EXPECT_EQ(find(report, "test_set_get_date_time").code, "EXEC");
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, JsonShape)
{
    dut::Faults faults;
    dut::apply_fault(faults, "ble_init_delay_ms");
    std::vector<SuiteReport> reports;
    for (const char* name : {"blink", "ble"})
    {
        VirtualBench bench(faults);
        reports.push_back(run_suite(suites::suite_by_name(name), bench));
    }
    const auto j = json::parse(render_json(reports).dump());
    EXPECT_EQ(j.at("suite"), "blink,ble");
    EXPECT_EQ(j.at("summary"), (json{{"passed", 4}, {"failed", 0}, {"errors", 1}}));
    ASSERT_EQ(j.at("results").size(), 5u);
    for (const auto& r : j.at("results"))
    {
        for (const char* key : {"suite", "name", "verdict", "message"})
        {
            EXPECT_TRUE(r.at(key).is_string()) << key;
        }
        EXPECT_TRUE(r.at("inputs").is_object());
        EXPECT_TRUE(r.at("outputs").is_object());
        EXPECT_TRUE(r.at("sim_ms").is_number_unsigned());
        EXPECT_TRUE(r.at("wall_ms").is_number());
        EXPECT_TRUE(r.at("assertions").is_array());
        const auto verdict = r.at("verdict").get<std::string>();
        EXPECT_TRUE(verdict == "PASS" || verdict == "FAIL" || verdict == "ERROR");
        EXPECT_EQ(r.contains("code"), verdict == "ERROR");
    }
    const auto human = render_human(reports, false);
    EXPECT_NE(human.find("total: 4 passed, 0 failed, 1 errors"), std::string::npos);
}

TEST(Report, SetupErrorReport)
{
    const auto report = setup_error_report("gps", "UNSUPPORTED", "no backend");
    const auto s = summarize({report});
    EXPECT_EQ(s.errors, 1u);
    EXPECT_FALSE(s.all_passed());
    EXPECT_EQ(summary_line(s), "0 passed, 0 failed, 1 errors");
}

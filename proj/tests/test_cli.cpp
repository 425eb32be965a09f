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

#include "cli.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace dharness;
using nlohmann::json;

namespace
{

struct Run
{
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "dharness");
    std::vector<const char*> argv;
    for (const auto& a : args)
    {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST(Cli, BlinkPasses)
{
    const auto r = run({"run", "--suite", "blink"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("2 passed, 0 failed, 0 errors"), std::string::npos);
}

TEST(Cli, AllSuitesPassByDefault)
{
    const auto r = run({"run"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("total: 15 passed, 0 failed, 0 errors"), std::string::npos);
}

TEST(Cli, FaultFailsAndNamesTheCase)
{
    const auto r = run({"run", "--suite", "spi", "--fault", "drop_first_byte"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("FAIL  test_reading_registers_with_address"), std::string::npos);
    EXPECT_NE(r.out.find("FAIL  test_reading_registers_without_indicating_address"), std::string::npos);
    EXPECT_NE(r.out.find("PASS  test_writing_registers"), std::string::npos);
}

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(run({"run", "--suite", "nope"}).code, 2);
    EXPECT_EQ(run({"run", "--format", "xml"}).code, 2);
    EXPECT_EQ(run({"run", "--transport", "tcp"}).code, 2);
    EXPECT_EQ(run({"run", "--fault", "nope"}).code, 2);
    EXPECT_EQ(run({"run", "--timeout-ms", "0"}).code, 2);
    EXPECT_EQ(run({"run", "--bogus"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    const auto r = run({"run", "--transport", "serial:/dev/a,/dev/b", "--fault", "omit_checksum"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--fault"), std::string::npos);
}

TEST(Cli, JsonAgreesWithExitCode)
{
    for (const char* fault : {"", "omit_checksum"})
    {
        std::vector<std::string> args{"run", "--suite", "gps", "--format", "json"};
        if (*fault)
        {
            args.push_back("--fault");
            args.push_back(fault);
        }
        const auto r = run(args);
        const auto j = json::parse(r.out);
        const auto& s = j.at("summary");
        const bool clean = s.at("failed") == 0 && s.at("errors") == 0;
        EXPECT_EQ(r.code, clean ? 0 : 1) << fault;
        EXPECT_EQ(j.at("results").size(), 3u);
    }
}

TEST(Cli, SuitesAreDeduplicated)
{
    const auto r = run({"run", "--suite", "blink", "--suite", "all", "--format", "json"});
    const auto j = json::parse(r.out);
    EXPECT_EQ(j.at("suite"), "blink,rtc,gps,spi,ble");
}

TEST(Cli, SerialWithoutBackendIsSetupError)
{
    const auto r = run({"run", "--suite", "blink", "--transport", "serial:/dev/ttyUSB0,/dev/ttyUSB1", "--format", "json"});
    EXPECT_EQ(r.code, 1);
    const auto j = json::parse(r.out);
    ASSERT_EQ(j.at("results").size(), 1u);
    EXPECT_EQ(j.at("results")[0].at("name"), "<setup>");
    EXPECT_EQ(j.at("results")[0].at("code"), "UNSUPPORTED");
}

TEST(Cli, DebugShowsTransportLines)
{
    const auto r = run({"run", "--suite", "blink", "--debug"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("dut    > NEW Blinker blinker [2,2000,2]"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("double < OK 2000.0"), std::string::npos) << r.out;
}

TEST(Cli, ListShowsSuitesAndFaults)
{
    const auto r = run({"list"});
    EXPECT_EQ(r.code, 0);
    for (const char* needle : {"blink\n", "  test_notify\n", "faults\n", "  period_skew_ms[=2]", "  omit_checksum  "})
    {
        EXPECT_NE(r.out.find(needle), std::string::npos) << needle;
    }
}

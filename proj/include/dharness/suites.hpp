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

// The shipped suites: blink, rtc, gps, spi, ble.

#include "dharness/harness.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dharness::suites
{

using harness::CaseContext;
using harness::Matcher;
using harness::Side;
using harness::Suite;
using json = nlohmann::json;

namespace blink
{

inline constexpr std::uint64_t period_ms = 2000;
inline constexpr std::uint32_t count = 2;
inline constexpr double tolerance_ms = 1.0;

/// Both cases share everything except the mode and how the harness waits.
inline void run(CaseContext& ctx, const std::string& mode)
{
    const std::uint64_t total_ms = 2 * count * period_ms;
    ctx.new_on_double("led", "Led", {13, 2 * count});
    ctx.new_on_dut("blinker", "Blinker", {2, period_ms, count});
    ctx.call(Side::double_, "led", "start_acquisition");
    if (mode == "blocking")
    {
        // The call itself lasts total_ms, so give the controller more than that.
        ctx.call(Side::dut, "blinker", "blink", {mode}, total_ms + period_ms);
    }
    else
    {
        ctx.call(Side::dut, "blinker", "blink", {mode});
        ctx.sleep(total_ms + period_ms);
    }
    const auto avg = ctx.call(Side::double_, "led", "get_avg_blink_ms");
    ctx.expect("average_blink_ms", avg, Matcher::close_to(static_cast<double>(period_ms), tolerance_ms));
    ctx.decommission(Side::dut, "blinker");
    ctx.decommission(Side::double_, "led");
}

} // namespace blink

inline Suite blink_suite()
{
    Suite s("blink", {"dut_blinker"}, {"Double_led"});
    s.add("test_blink_blocking", [](CaseContext& ctx) { blink::run(ctx, "blocking"); });
    s.add("test_blink_isr", [](CaseContext& ctx) { blink::run(ctx, "isr"); });
    return s;
}

// ---------------------------------------------------------------------------

inline Suite rtc_suite()
{
    Suite s("rtc", {"dut_rtc"}, {"Double_rtc"});

    // 2021-02-28 was a Sunday (weekday 7); 2021-03-01 a Monday.
    s.add("test_set_date_time_static", [](CaseContext& ctx) {
        ctx.new_on_double("rtc", "Rtc");
        ctx.call(Side::double_, "rtc", "set_mode", {"static"});
        ctx.new_on_dut("driver", "RtcDriver");
        ctx.call(Side::dut, "driver", "set_datetime", {"2021-02-28T23:59:30"});
        const auto regs = ctx.call(Side::double_, "rtc", "get_registers");
        ctx.expect("registers", regs, Matcher::equal({0x30, 0x59, 0x23, 0x07, 0x28, 0x02, 0x21}));
        ctx.decommission(Side::dut, "driver");
        ctx.decommission(Side::double_, "rtc");
    });

    s.add("test_set_date_time_dynamic", [](CaseContext& ctx) {
        ctx.new_on_double("rtc", "Rtc");
        ctx.call(Side::double_, "rtc", "set_mode", {"dynamic"});
        ctx.new_on_dut("driver", "RtcDriver");
        ctx.call(Side::dut, "driver", "set_datetime", {"2021-02-28T23:59:30"});
        ctx.input("elapsed_ms", 30000);
        ctx.sleep(30000);
        const auto regs = ctx.call(Side::double_, "rtc", "get_registers");
        ctx.expect("registers", regs, Matcher::equal({0x00, 0x00, 0x00, 0x01, 0x01, 0x03, 0x21}));
        ctx.decommission(Side::dut, "driver");
        ctx.decommission(Side::double_, "rtc");
    });

    s.add("test_get_date_time", [](CaseContext& ctx) {
        ctx.new_on_double("rtc", "Rtc");
        ctx.call(Side::double_, "rtc", "set_mode", {"static"});
        ctx.call(Side::double_, "rtc", "set_datetime", {"2024-02-29T12:34:56"});
        ctx.new_on_dut("driver", "RtcDriver");
        const auto got = ctx.call(Side::dut, "driver", "get_datetime");
        ctx.expect("datetime", got, Matcher::equal("2024-02-29T12:34:56"));
        ctx.decommission(Side::dut, "driver");
        ctx.decommission(Side::double_, "rtc");
    });

    // Round trip through the Double alone.
    s.add("test_set_get_date_time", [](CaseContext& ctx) {
        ctx.new_on_double("rtc", "Rtc");
        ctx.call(Side::double_, "rtc", "set_mode", {"static"});
        ctx.new_on_dut("driver", "RtcDriver");
        ctx.call(Side::dut, "driver", "set_datetime", {"2099-12-31T23:59:59"});
        const auto got = ctx.call(Side::dut, "driver", "get_datetime");
        ctx.expect("datetime", got, Matcher::equal("2099-12-31T23:59:59"));
        ctx.decommission(Side::dut, "driver");
        ctx.decommission(Side::double_, "rtc");
    });
    return s;
}

// ---------------------------------------------------------------------------

inline Suite gps_suite()
{
    Suite s("gps", {"dut_gps"}, {"Double_gps"});

    s.add("test_send_command_configuration", [](CaseContext& ctx) {
        ctx.new_on_double("gps", "Gps");
        ctx.new_on_dut("driver", "GpsDriver");
        ctx.call(Side::dut, "driver", "send_command", {"PDBL,SEL,RMC,1"});
        ctx.expect("rmc_enabled", ctx.call(Side::double_, "gps", "enabled", {"RMC"}), Matcher::is_true());
        ctx.expect("rejected", ctx.call(Side::double_, "gps", "rejected"), Matcher::equal(0));
        ctx.decommission(Side::dut, "driver");
        ctx.decommission(Side::double_, "gps");
    });

    s.add("test_send_command_update_rate", [](CaseContext& ctx) {
        ctx.new_on_double("gps", "Gps");
        ctx.new_on_dut("driver", "GpsDriver");
        ctx.call(Side::dut, "driver", "send_command", {"PDBL,RATE,1000"});
        ctx.expect("update_period_ms", ctx.call(Side::double_, "gps", "update_period_ms"), Matcher::equal(1000));
        ctx.input("window_ms", 5000);
        ctx.sleep(5000);
        ctx.expect("emitted", ctx.call(Side::double_, "gps", "emitted"), Matcher::equal(5));
        ctx.decommission(Side::dut, "driver");
        ctx.decommission(Side::double_, "gps");
    });

    s.add("test_get_latitude", [](CaseContext& ctx) {
        ctx.new_on_double("gps", "Gps");
        ctx.new_on_dut("driver", "GpsDriver");
        ctx.call(Side::double_, "gps", "set_fix", {"4807.038", "N", "01131.000", "E"});
        ctx.call(Side::double_, "gps", "set_rate", {1000});
        const auto lat = ctx.call(Side::dut, "driver", "get_latitude", {3000});
        ctx.expect("latitude", lat, Matcher::close_to(48.0 + 7.038 / 60.0, 1e-9));
        ctx.decommission(Side::dut, "driver");
        ctx.decommission(Side::double_, "gps");
    });
    return s;
}

// ---------------------------------------------------------------------------

inline Suite spi_suite()
{
    Suite s("spi", {"dut_spi"}, {"Double_spi"});

    s.add("test_writing_registers", [](CaseContext& ctx) {
        ctx.new_on_double("slave", "SpiSlave");
        ctx.new_on_dut("master", "SpiMaster");
        ctx.call(Side::dut, "master", "write", {json::array({7, 8, 9})});
        ctx.expect("rx", ctx.call(Side::double_, "slave", "get_rx"), Matcher::equal({7, 8, 9}));
        ctx.decommission(Side::dut, "master");
        ctx.decommission(Side::double_, "slave");
    });

    // Plain read: the master only drains what the slave has queued.
    s.add("test_reading_registers_without_indicating_address", [](CaseContext& ctx) {
        ctx.new_on_double("slave", "SpiSlave");
        ctx.new_on_dut("master", "SpiMaster");
        ctx.call(Side::double_, "slave", "preload_tx", {json::array({0x12, 0x34})});
        ctx.expect("read", ctx.call(Side::dut, "master", "read", {2}), Matcher::equal({0x12, 0x34}));
        ctx.decommission(Side::dut, "master");
        ctx.decommission(Side::double_, "slave");
    });

    // Address byte first; the slave's answer to it is a don't-care.
    s.add("test_reading_registers_with_address", [](CaseContext& ctx) {
        ctx.new_on_double("slave", "SpiSlave");
        ctx.new_on_dut("master", "SpiMaster");
        ctx.call(Side::double_, "slave", "preload_tx", {json::array({0x00, 0xA5, 0x5A})});
        const auto miso = ctx.call(Side::dut, "master", "write_read", {json::array({0x83, 0x00, 0x00})});
        json data = json::array();
        for (std::size_t i = 1; i < miso.size(); ++i)
        {
            data.push_back(miso[i]);
        }
        ctx.expect("data", data, Matcher::equal({0xA5, 0x5A}));
        ctx.expect("rx", ctx.call(Side::double_, "slave", "get_rx"), Matcher::equal({0x83, 0x00, 0x00}));
        ctx.decommission(Side::dut, "master");
        ctx.decommission(Side::double_, "slave");
    });
    return s;
}

// ---------------------------------------------------------------------------

namespace ble
{

inline constexpr std::uint64_t settle_limit_ms = 30000;
inline constexpr std::uint64_t settle_step_ms = 1000;

/// Waits, as the test script, until the sensor advertises.
inline void wait_for_advertising(CaseContext& ctx)
{
    for (std::uint64_t waited = 0; waited < settle_limit_ms; waited += settle_step_ms)
    {
        if (ctx.call(Side::dut, "sensor", "is_advertising") == true)
        {
            return;
        }
        ctx.sleep(settle_step_ms);
    }
}

} // namespace ble

inline Suite ble_suite()
{
    Suite s("ble", {"dut_ble"}, {"Double_ble"});

    // The central starts scanning right away and blocks until it finds the
    // sensor, so a slow sensor start leaves the Double without an answer.
    s.add("test_connection", [](CaseContext& ctx) {
        ctx.new_on_dut("sensor", "BleTempSensor");
        ctx.call(Side::dut, "sensor", "start");
        ctx.new_on_double("central", "BleCentral");
        const auto connected = ctx.call(Side::double_, "central", "scan_connect", {"TempSensor", 0});
        ctx.expect("connected", connected, Matcher::is_true());
        ctx.decommission(Side::double_, "central");
        ctx.decommission(Side::dut, "sensor");
    });

    s.add("test_read", [](CaseContext& ctx) {
        ctx.new_on_dut("sensor", "BleTempSensor");
        ctx.call(Side::dut, "sensor", "start");
        ctx.call(Side::dut, "sensor", "set_temperature", {23.5});
        ble::wait_for_advertising(ctx);
        ctx.new_on_double("central", "BleCentral");
        ctx.call(Side::double_, "central", "scan_connect", {"TempSensor", 5000});
        ctx.expect("temp", ctx.call(Side::double_, "central", "read", {"temp"}), Matcher::equal(23.5));
        ctx.decommission(Side::double_, "central");
        ctx.decommission(Side::dut, "sensor");
    });

    s.add("test_notify", [](CaseContext& ctx) {
        ctx.new_on_dut("sensor", "BleTempSensor");
        ctx.call(Side::dut, "sensor", "start");
        ble::wait_for_advertising(ctx);
        ctx.new_on_double("central", "BleCentral");
        ctx.call(Side::double_, "central", "scan_connect", {"TempSensor", 5000});
        ctx.call(Side::dut, "sensor", "set_temperature", {24.0});
        ctx.expect("notified_centrals", ctx.call(Side::dut, "sensor", "notify"), Matcher::equal(1));
        ctx.expect("temp", ctx.call(Side::double_, "central", "await_notify", {1000}), Matcher::equal(24.0));
        ctx.decommission(Side::double_, "central");
        ctx.decommission(Side::dut, "sensor");
    });
    return s;
}

// ---------------------------------------------------------------------------

inline constexpr std::string_view suite_names[] = {"blink", "rtc", "gps", "spi", "ble"};

inline std::vector<Suite> all_suites()
{
    std::vector<Suite> out;
    out.push_back(blink_suite());
    out.push_back(rtc_suite());
    out.push_back(gps_suite());
    out.push_back(spi_suite());
    out.push_back(ble_suite());
    return out;
}

/// Throws Error(invalid_argument) for unknown names.
inline Suite suite_by_name(std::string_view name)
{
    if (name == "blink")
    {
        return blink_suite();
    }
    if (name == "rtc")
    {
        return rtc_suite();
    }
    if (name == "gps")
    {
        return gps_suite();
    }
    if (name == "spi")
    {
        return spi_suite();
    }
    if (name == "ble")
    {
        return ble_suite();
    }
    throw Error(Errc::invalid_argument, "unknown suite '" + std::string(name) + "'");
}

struct CaseRef
{
    std::string_view suite;
    std::string_view name;
    friend bool operator==(const CaseRef&, const CaseRef&) = default;
};

/// The cases each shipped fault is built to break. Every other case of every
/// suite must keep passing with that fault on.
inline std::vector<CaseRef> designated_failures(std::string_view fault)
{
    if (fault == "period_skew_ms")
    {
        return {{"blink", "test_blink_blocking"}, {"blink", "test_blink_isr"}};
    }
    if (fault == "swap_bcd_nibbles")
    {
        return {{"rtc", "test_set_date_time_static"},
                {"rtc", "test_set_date_time_dynamic"},
                {"rtc", "test_set_get_date_time"}};
    }
    if (fault == "omit_checksum")
    {
        return {{"gps", "test_send_command_configuration"}, {"gps", "test_send_command_update_rate"}};
    }
    if (fault == "drop_first_byte")
    {
        return {{"spi", "test_reading_registers_without_indicating_address"},
                {"spi", "test_reading_registers_with_address"}};
    }
    if (fault == "ble_init_delay_ms")
    {
        return {{"ble", "test_connection"}};
    }
    throw Error(Errc::invalid_argument, "unknown fault '" + std::string(fault) + "'");
}

} // namespace dharness::suites

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

// Writing a suite of your own against the shipped modules: checks that the
// RTC Double rolls over a leap day and that the DUT driver reads it back.

#include "dharness/dharness.hpp"

#include <iostream>

int main()
{
    using namespace dharness;
    using harness::Matcher;
    using harness::Side;

    harness::Suite suite("leap_day", {"dut_rtc"}, {"Double_rtc"});
    suite.add("test_leap_day_rollover", [](harness::CaseContext& ctx) {
        ctx.new_on_double("rtc", "Rtc");
        ctx.call(Side::double_, "rtc", "set_mode", {"dynamic"});
        ctx.new_on_dut("driver", "RtcDriver");
        ctx.call(Side::dut, "driver", "set_datetime", {"2024-02-28T23:59:58"});
        ctx.sleep(2000);
        ctx.expect("datetime", ctx.call(Side::dut, "driver", "get_datetime"), Matcher::equal("2024-02-29T00:00:00"));
    });

    bench::VirtualBench bench;
    const auto report = harness::run_suite(suite, bench);
    std::cout << harness::render_human({report}, /*debug=*/true);
    return harness::summarize({report}).all_passed() ? 0 : 1;
}

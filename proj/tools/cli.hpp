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

// Command-line runner. Kept in a header so the tests can drive it in-process.
//
//   dharness run [--suite <name>]... [--transport virtual|serial:<dut>,<double>]
//                [--format human|json] [--debug] [--fault <name>[=<n>]] [--timeout-ms <n>]
//   dharness list
//
// Exit codes: 0 every case passed, 1 any FAIL or ERROR, 2 usage error.

#include "dharness/bench.hpp"
#include "dharness/dut.hpp"
#include "dharness/harness.hpp"
#include "dharness/suites.hpp"
#include "dharness/transport.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dharness::cli
{

enum class Format
{
    human,
    json,
};

struct RunConfig
{
    std::vector<std::string> suites;
    bool serial = false;
    std::string serial_path;
    Format format = Format::human;
    bool debug = false;
    std::optional<std::string> fault;
    std::optional<std::uint64_t> timeout_ms;
};

inline constexpr int exit_ok = 0;
inline constexpr int exit_failures = 1;
inline constexpr int exit_usage = 2;

/// Expands "all" and validates names and combinations. Throws
/// Error(invalid_argument) with a user-facing message.
inline RunConfig normalize(RunConfig cfg, const std::string& transport, const std::string& format)
{
    if (transport == "virtual")
    {
        cfg.serial = false;
    }
    else if (transport.rfind("serial:", 0) == 0 && transport.size() > 7)
    {
        cfg.serial = true;
        cfg.serial_path = transport.substr(7);
    }
    else
    {
        throw Error(Errc::invalid_argument, "--transport must be 'virtual' or 'serial:<path>'");
    }

    if (format == "human")
    {
        cfg.format = Format::human;
    }
    else if (format == "json")
    {
        cfg.format = Format::json;
    }
    else
    {
        throw Error(Errc::invalid_argument, "--format must be 'human' or 'json'");
    }

    std::vector<std::string> expanded;
    auto add = [&expanded](std::string_view name) {
        for (const auto& s : expanded)
        {
            if (s == name)
            {
                return;
            }
        }
        expanded.emplace_back(name);
    };
    if (cfg.suites.empty())
    {
        cfg.suites.push_back("all");
    }
    for (const auto& name : cfg.suites)
    {
        if (name == "all")
        {
            for (auto s : suites::suite_names)
            {
                add(s);
            }
            continue;
        }
        suites::suite_by_name(name); // throws on unknown names
        add(name);
    }
    cfg.suites = std::move(expanded);

    if (cfg.fault)
    {
        if (cfg.serial)
        {
            throw Error(Errc::invalid_argument, "--fault is only available with --transport virtual");
        }
        dut::Faults probe;
        dut::apply_fault(probe, *cfg.fault);
    }
    if (cfg.timeout_ms && *cfg.timeout_ms == 0)
    {
        throw Error(Errc::invalid_argument, "--timeout-ms must be positive");
    }
    return cfg;
}

inline std::vector<harness::SuiteReport> execute(const RunConfig& cfg, const transport::SerialPortFactory& serial)
{
    dut::Faults faults;
    if (cfg.fault)
    {
        dut::apply_fault(faults, *cfg.fault);
    }
    std::vector<harness::SuiteReport> reports;
    for (const auto& name : cfg.suites)
    {
        const auto suite = suites::suite_by_name(name);
        if (!cfg.serial)
        {
            // A fresh bench per suite: independent clocks and buses.
            bench::VirtualBench bench(faults, cfg.timeout_ms.value_or(transport::default_virtual_timeout_ms));
            reports.push_back(harness::run_suite(suite, bench));
            continue;
        }
        try
        {
            bench::SerialSession session(cfg.serial_path, serial,
                                         cfg.timeout_ms.value_or(transport::default_serial_timeout_ms));
            reports.push_back(harness::run_suite(suite, session));
        }
        catch (const Error& e)
        {
            reports.push_back(harness::setup_error_report(name, harness::detail::errc_code(e.code()), e.what()));
        }
    }
    return reports;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                   const transport::SerialPortFactory& serial = {})
{
    CLI::App app{"Runs DUT/Double driver test suites", "dharness"};
    app.require_subcommand(1, 1);

    RunConfig cfg;
    std::string transport = "virtual";
    std::string format = "human";
    std::string fault;
    std::uint64_t timeout_ms = 0;

    auto* run = app.add_subcommand("run", "Run one or more suites");
    run->add_option("--suite", cfg.suites, "blink, rtc, gps, spi, ble or all (repeatable; default all)");
    run->add_option("--transport", transport, "virtual or serial:<dut-port>,<double-port>");
    run->add_option("--format", format, "human or json");
    run->add_flag("--debug", cfg.debug, "Interleave the transport log under every case");
    auto* fault_opt = run->add_option("--fault", fault, "Inject a DUT fault: <name> or <name>=<n>");
    auto* timeout_opt = run->add_option("--timeout-ms", timeout_ms, "Controller response timeout");

    auto* list = app.add_subcommand("list", "List suites, cases and faults");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForAllHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e, out, err);
        return exit_usage;
    }

    if (list->parsed())
    {
        for (const auto& suite : suites::all_suites())
        {
            out << suite.name() << "\n";
            for (const auto& c : suite.cases())
            {
                out << "  " << c.name << "\n";
            }
        }
        out << "faults\n";
        for (const auto& f : dut::fault_catalog)
        {
            out << "  " << f.name;
            if (!f.default_value.empty())
            {
                out << "[=" << f.default_value << "]";
            }
            out << "  " << f.description << "\n";
        }
        return exit_ok;
    }

    if (fault_opt->count() > 0)
    {
        cfg.fault = fault;
    }
    if (timeout_opt->count() > 0)
    {
        cfg.timeout_ms = timeout_ms;
    }
    // DOUBLE_HARNESS_SEED is reserved; the simulation is deterministic without it.
    try
    {
        cfg = normalize(std::move(cfg), transport, format);
    }
    catch (const Error& e)
    {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    const auto reports = execute(cfg, serial);
    if (cfg.format == Format::json)
    {
        out << harness::render_json(reports).dump(2) << "\n";
    }
    else
    {
        out << harness::render_human(reports, cfg.debug);
    }
    return harness::summarize(reports).all_passed() ? exit_ok : exit_failures;
}

} // namespace dharness::cli

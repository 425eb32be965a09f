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

// Sessions the harness can drive. VirtualBench wires a simulated DUT and
// Double to the same buses and scheduler; SerialSession talks to real boards
// through a caller-supplied serial backend.
//
// Module catalog (what "uploading code" installs on a device):
//
//   dut_blinker  Blinker(pin, period_ms, count)     Double_led  Led(pin, expected_toggles)
//   dut_rtc      RtcDriver()                        Double_rtc  Rtc()
//   dut_gps      GpsDriver()                        Double_gps  Gps()
//   dut_spi      SpiMaster()                        Double_spi  SpiSlave()
//   dut_ble      BleTempSensor([name])              Double_ble  BleCentral()
//
// DUT pin 2 and Double pin 13 are the two ends of the same GPIO line.

#include "dharness/bus.hpp"
#include "dharness/device.hpp"
#include "dharness/doubles.hpp"
#include "dharness/dut.hpp"
#include "dharness/error.hpp"
#include "dharness/harness.hpp"
#include "dharness/simcore.hpp"
#include "dharness/transport.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace dharness::bench
{

using harness::Side;
using transport::json;

inline constexpr int dut_led_pin = 2;
inline constexpr int double_led_pin = 13;

struct Wiring
{
    explicit Wiring(sim::Scheduler& scheduler) : uart(scheduler), spi(scheduler), air(scheduler) {}

    bus::GpioLine led_line;
    bus::I2cBus i2c;
    bus::UartLink uart;
    bus::SpiBus spi;
    bus::BleAir air;
};

struct ModuleInfo
{
    std::string_view name;
    Side side;
    std::string_view cls;
};

inline constexpr ModuleInfo module_catalog[] = {
    {"dut_blinker", Side::dut, "Blinker"},      {"dut_rtc", Side::dut, "RtcDriver"},
    {"dut_gps", Side::dut, "GpsDriver"},        {"dut_spi", Side::dut, "SpiMaster"},
    {"dut_ble", Side::dut, "BleTempSensor"},    {"Double_led", Side::double_, "Led"},
    {"Double_rtc", Side::double_, "Rtc"},       {"Double_gps", Side::double_, "Gps"},
    {"Double_spi", Side::double_, "SpiSlave"},  {"Double_ble", Side::double_, "BleCentral"},
};

namespace detail
{

using transport::arg;
using transport::Bound;
using transport::DeviceObject;
using transport::expect_arity;

inline bus::GpioLine& pin(Wiring& w, Side side, int number)
{
    if (number != (side == Side::dut ? dut_led_pin : double_led_pin))
    {
        throw Error(Errc::invalid_argument, std::string(harness::side_name(side)) + " pin " + std::to_string(number) +
                                                " is not wired");
    }
    return w.led_line;
}

inline json registers_json(const rtc::RegisterImage& regs) { return json(std::vector<int>(regs.begin(), regs.end())); }

inline rtc::RegisterImage registers_arg(const json& args)
{
    const auto bytes = arg<std::vector<std::uint8_t>>(args, 0);
    if (bytes.size() != rtc::register_count)
    {
        throw Error(Errc::invalid_argument, "expected 7 register bytes");
    }
    rtc::RegisterImage image{};
    std::copy(bytes.begin(), bytes.end(), image.begin());
    return image;
}

inline std::unique_ptr<DeviceObject> make_blinker(const json& a, Wiring& w, sim::Scheduler& s, const dut::Faults& f)
{
    expect_arity(a, 3, 3);
    auto obj = std::make_unique<Bound<dut::Blinker>>(pin(w, Side::dut, arg<int>(a, 0)), s, arg<std::uint64_t>(a, 1),
                                                     arg<std::uint32_t>(a, 2), f.period_skew_ms);
    auto& t = obj->target();
    obj->expose("blink", [&t](const json& args) {
        expect_arity(args, 1, 1);
        const auto mode = arg<std::string>(args, 0);
        if (mode != "blocking" && mode != "isr")
        {
            throw Error(Errc::invalid_argument, "blink mode must be \"blocking\" or \"isr\"");
        }
        t.blink(mode == "blocking" ? dut::BlinkMode::blocking : dut::BlinkMode::isr);
        return json(nullptr);
    });
    obj->expose("toggles", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.toggles());
    });
    obj->expose("running", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.running());
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_rtc_driver(const json& a, Wiring& w, const dut::Faults& f)
{
    expect_arity(a, 0, 0);
    auto obj = std::make_unique<Bound<dut::RtcDriver>>(w.i2c, f.swap_bcd_nibbles);
    auto& t = obj->target();
    obj->expose("set_datetime", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.set_datetime(rtc::DateTime::parse(arg<std::string>(args, 0)));
        return json(nullptr);
    });
    obj->expose("get_datetime", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.get_datetime().iso());
    });
    obj->expose("read_registers", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return registers_json(t.read_registers());
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_gps_driver(const json& a, Wiring& w, sim::Scheduler& s, const dut::Faults& f)
{
    expect_arity(a, 0, 0);
    auto obj = std::make_unique<Bound<dut::GpsDriver>>(w.uart, s, f.omit_checksum);
    auto& t = obj->target();
    obj->expose("send_command", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.send_command(arg<std::string>(args, 0));
        return json(nullptr);
    });
    obj->expose("get_latitude", [&t](const json& args) {
        expect_arity(args, 1, 1);
        return json(t.get_latitude(arg<std::uint64_t>(args, 0)));
    });
    obj->expose("get_longitude", [&t](const json& args) {
        expect_arity(args, 1, 1);
        return json(t.get_longitude(arg<std::uint64_t>(args, 0)));
    });
    obj->expose("parse_errors", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.parse_errors());
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_spi_master(const json& a, Wiring& w, const dut::Faults& f)
{
    expect_arity(a, 0, 0);
    auto obj = std::make_unique<Bound<dut::SpiMasterDriver>>(w.spi, f.drop_first_byte);
    auto& t = obj->target();
    obj->expose("write", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.write(arg<std::vector<std::uint8_t>>(args, 0));
        return json(nullptr);
    });
    obj->expose("read", [&t](const json& args) {
        expect_arity(args, 1, 1);
        return json(t.read(arg<std::size_t>(args, 0)));
    });
    obj->expose("write_read", [&t](const json& args) {
        expect_arity(args, 1, 1);
        return json(t.write_read(arg<std::vector<std::uint8_t>>(args, 0)));
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_ble_sensor(const json& a, Wiring& w, const dut::Faults& f)
{
    expect_arity(a, 0, 1);
    const auto name = a.empty() ? std::string(dut::BleTempSensor::default_name) : arg<std::string>(a, 0);
    auto obj = std::make_unique<Bound<dut::BleTempSensor>>(w.air, f.ble_init_delay_ms.value_or(0), name);
    auto& t = obj->target();
    obj->expose("start", [&t](const json& args) {
        expect_arity(args, 0, 0);
        t.start();
        return json(nullptr);
    });
    obj->expose("set_temperature", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.set_temperature(arg<double>(args, 0));
        return json(nullptr);
    });
    obj->expose("notify", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.notify());
    });
    obj->expose("is_advertising", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.is_advertising());
    });
    obj->expose("started", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.started());
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_led(const json& a, Wiring& w)
{
    expect_arity(a, 2, 2);
    auto obj = std::make_unique<Bound<doubles::LedDouble>>(pin(w, Side::double_, arg<int>(a, 0)),
                                                           arg<std::size_t>(a, 1));
    auto& t = obj->target();
    obj->expose("start_acquisition", [&t](const json& args) {
        expect_arity(args, 0, 0);
        t.start_acquisition();
        return json(nullptr);
    });
    obj->expose("get_avg_blink_ms", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.average_blink_ms());
    });
    obj->expose("edges_captured", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.edges_captured());
    });
    obj->expose("intervals", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.intervals());
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_rtc(const json& a, Wiring& w, sim::Scheduler& s)
{
    expect_arity(a, 0, 0);
    auto obj = std::make_unique<Bound<doubles::RtcDouble>>(w.i2c, s);
    auto& t = obj->target();
    obj->expose("set_mode", [&t](const json& args) {
        expect_arity(args, 1, 1);
        const auto mode = arg<std::string>(args, 0);
        if (mode != "static" && mode != "dynamic")
        {
            throw Error(Errc::invalid_argument, "RTC mode must be \"static\" or \"dynamic\"");
        }
        t.set_mode(mode == "static" ? doubles::RtcMode::static_clock : doubles::RtcMode::dynamic_clock);
        return json(nullptr);
    });
    obj->expose("get_registers", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return registers_json(t.registers());
    });
    obj->expose("set_registers", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.set_registers(registers_arg(args));
        return json(nullptr);
    });
    obj->expose("get_datetime", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.datetime().iso());
    });
    obj->expose("set_datetime", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.set_datetime(rtc::DateTime::parse(arg<std::string>(args, 0)));
        return json(nullptr);
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_gps(const json& a, Wiring& w, sim::Scheduler& s)
{
    expect_arity(a, 0, 0);
    auto obj = std::make_unique<Bound<doubles::GpsDouble>>(w.uart, s);
    auto& t = obj->target();
    obj->expose("set_fix", [&t](const json& args) {
        expect_arity(args, 4, 4);
        const auto ns = arg<std::string>(args, 1);
        const auto ew = arg<std::string>(args, 3);
        if (ns.size() != 1 || ew.size() != 1)
        {
            throw Error(Errc::invalid_argument, "hemispheres must be single letters");
        }
        t.set_fix(arg<std::string>(args, 0), ns[0], arg<std::string>(args, 2), ew[0]);
        return json(nullptr);
    });
    obj->expose("set_rate", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.set_rate(arg<std::uint64_t>(args, 0));
        return json(nullptr);
    });
    obj->expose("select", [&t](const json& args) {
        expect_arity(args, 2, 2);
        t.select(arg<std::string>(args, 0), arg<bool>(args, 1));
        return json(nullptr);
    });
    obj->expose("enabled", [&t](const json& args) {
        expect_arity(args, 1, 1);
        return json(t.enabled(arg<std::string>(args, 0)));
    });
    obj->expose("update_period_ms", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.update_period_ms());
    });
    obj->expose("rejected", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.rejected());
    });
    obj->expose("emitted", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.emitted());
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_spi_slave(const json& a, Wiring& w)
{
    expect_arity(a, 0, 0);
    auto obj = std::make_unique<Bound<doubles::SpiSlaveDouble>>(w.spi);
    auto& t = obj->target();
    obj->expose("preload_tx", [&t](const json& args) {
        expect_arity(args, 1, 1);
        t.preload_tx(arg<std::vector<std::uint8_t>>(args, 0));
        return json(nullptr);
    });
    obj->expose("get_rx", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.get_rx());
    });
    obj->expose("tx_pending", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.tx_pending());
    });
    return obj;
}

inline std::unique_ptr<DeviceObject> make_central(const json& a, Wiring& w, sim::Scheduler& s)
{
    expect_arity(a, 0, 0);
    auto obj = std::make_unique<Bound<doubles::BleCentralDouble>>(w.air, s);
    auto& t = obj->target();
    obj->expose("scan_connect", [&t](const json& args) {
        expect_arity(args, 2, 2);
        return json(t.scan_connect(arg<std::string>(args, 0), arg<std::uint64_t>(args, 1)));
    });
    obj->expose("read", [&t](const json& args) {
        expect_arity(args, 1, 1);
        return json(t.read(arg<std::string>(args, 0)));
    });
    obj->expose("await_notify", [&t](const json& args) {
        expect_arity(args, 1, 1);
        return json(t.await_notify(arg<std::uint64_t>(args, 0)));
    });
    obj->expose("disconnect", [&t](const json& args) {
        expect_arity(args, 0, 0);
        t.disconnect();
        return json(nullptr);
    });
    obj->expose("is_connected", [&t](const json& args) {
        expect_arity(args, 0, 0);
        return json(t.is_connected());
    });
    return obj;
}

} // namespace detail

/// Installs the classes of one catalog module on a device. Throws
/// Error(unsupported) for unknown modules or modules built for the other side.
inline void install_module(transport::Device& device, Side side, std::string_view module, Wiring& w,
                           sim::Scheduler& s, const dut::Faults& f)
{
    const ModuleInfo* info = nullptr;
    for (const auto& m : module_catalog)
    {
        if (m.name == module)
        {
            info = &m;
        }
    }
    if (!info || info->side != side)
    {
        throw Error(Errc::unsupported, "no module '" + std::string(module) + "' for the " +
                                           std::string(harness::side_name(side)) + " side");
    }
    const std::string cls(info->cls);
    // Faults are copied in so that a class keeps the configuration it was
    // uploaded with.
    const dut::Faults faults = f;
    using Factory = transport::Device::Factory;
    Factory factory;
    if (module == "dut_blinker")
    {
        factory = [&w, &s, faults](const json& a) { return detail::make_blinker(a, w, s, faults); };
    }
    else if (module == "dut_rtc")
    {
        factory = [&w, faults](const json& a) { return detail::make_rtc_driver(a, w, faults); };
    }
    else if (module == "dut_gps")
    {
        factory = [&w, &s, faults](const json& a) { return detail::make_gps_driver(a, w, s, faults); };
    }
    else if (module == "dut_spi")
    {
        factory = [&w, faults](const json& a) { return detail::make_spi_master(a, w, faults); };
    }
    else if (module == "dut_ble")
    {
        factory = [&w, faults](const json& a) { return detail::make_ble_sensor(a, w, faults); };
    }
    else if (module == "Double_led")
    {
        factory = [&w](const json& a) { return detail::make_led(a, w); };
    }
    else if (module == "Double_rtc")
    {
        factory = [&w, &s](const json& a) { return detail::make_rtc(a, w, s); };
    }
    else if (module == "Double_gps")
    {
        factory = [&w, &s](const json& a) { return detail::make_gps(a, w, s); };
    }
    else if (module == "Double_spi")
    {
        factory = [&w](const json& a) { return detail::make_spi_slave(a, w); };
    }
    else
    {
        factory = [&w, &s](const json& a) { return detail::make_central(a, w, s); };
    }
    device.install(cls, std::move(factory));
}

// ---------------------------------------------------------------------------

/// Both devices simulated in-process on one scheduler. Controller reads pump
/// the addressed device with a scheduler horizon equal to the read timeout,
/// so a device that stays busy past the timeout leaves its command
/// unanswered exactly as a blocked board would.
class VirtualBench final : public harness::Session
{
public:
    explicit VirtualBench(dut::Faults faults = {},
                          std::uint64_t timeout_ms = transport::default_virtual_timeout_ms)
        : wiring_(scheduler_), faults_(std::move(faults)), dut_("dut"), double_("double")
    {
        for (Link* link : {&dut_, &double_})
        {
            auto [host, board] = transport::open_virtual_pair();
            link->host = std::move(host);
            link->board = std::move(board);
            link->host->set_timeout_ms(timeout_ms);
            link->host->set_pump([this, link](std::uint64_t ms) { run_device(*link, ms); });
            link->controller = std::make_unique<transport::Controller>(
                *link->host, link->device.name(), &log_, [this] { return scheduler_.now().millis; });
        }
    }

    VirtualBench(const VirtualBench&) = delete;
    VirtualBench& operator=(const VirtualBench&) = delete;

    transport::Controller& controller(Side side) override { return *link(side).controller; }

    void upload(Side side, const std::vector<std::string>& modules) override
    {
        for (const auto& m : modules)
        {
            install_module(link(side).device, side, m, wiring_, scheduler_, faults_);
        }
    }

    void sleep_ms(std::uint64_t ms) override { scheduler_.advance_by(ms); }
    std::uint64_t now_ms() const override { return scheduler_.now().millis; }
    const transport::TransportLog& log() const override { return log_; }

    sim::Scheduler& scheduler() noexcept { return scheduler_; }
    Wiring& wiring() noexcept { return wiring_; }
    const dut::Faults& faults() const noexcept { return faults_; }
    transport::Device& device(Side side) { return link(side).device; }

private:
    struct Link
    {
        explicit Link(std::string name) : device(std::move(name)) {}
        transport::Device device;
        std::unique_ptr<transport::VirtualEndpoint> host;
        std::unique_ptr<transport::VirtualEndpoint> board;
        std::unique_ptr<transport::Controller> controller;
    };

    Link& link(Side side) { return side == Side::dut ? dut_ : double_; }

    void run_device(Link& link, std::uint64_t timeout_ms)
    {
        scheduler_.set_horizon(scheduler_.now() + timeout_ms);
        try
        {
            link.device.serve_pending(*link.board);
        }
        catch (...)
        {
            scheduler_.set_horizon(std::nullopt);
            throw;
        }
        scheduler_.set_horizon(std::nullopt);
    }

    // Declaration order matters: devices own objects that hold references
    // into the wiring and the scheduler, so they must be destroyed first.
    sim::Scheduler scheduler_;
    Wiring wiring_;
    dut::Faults faults_;
    transport::TransportLog log_;
    Link dut_;
    Link double_;
};

// ---------------------------------------------------------------------------

/// Real boards on two serial ports, e.g. "/dev/ttyUSB0,/dev/ttyUSB1". The
/// firmware is flashed out of band, so upload() only checks reachability.
class SerialSession final : public harness::Session
{
public:
    SerialSession(std::string_view ports, const transport::SerialPortFactory& factory,
                  std::uint64_t timeout_ms = transport::default_serial_timeout_ms)
        : start_(std::chrono::steady_clock::now())
    {
        if (!factory)
        {
            throw Error(Errc::unsupported, "no serial backend is linked into this build");
        }
        const auto comma = ports.find(',');
        if (comma == std::string_view::npos || comma == 0 || comma + 1 == ports.size())
        {
            throw Error(Errc::invalid_argument, "serial transport needs <dut-port>,<double-port>");
        }
        const std::string paths[2] = {std::string(ports.substr(0, comma)), std::string(ports.substr(comma + 1))};
        const char* names[2] = {"dut", "double"};
        for (int i = 0; i < 2; ++i)
        {
            auto port = factory();
            port->open(paths[i], transport::SerialSettings{});
            endpoints_[i] = std::make_unique<transport::SerialEndpoint>(std::move(port), transport::Role::controller);
            endpoints_[i]->set_timeout_ms(timeout_ms);
            controllers_[i] = std::make_unique<transport::Controller>(*endpoints_[i], names[i], &log_,
                                                                      [this] { return now_ms(); });
        }
    }

    transport::Controller& controller(Side side) override { return *controllers_[side == Side::dut ? 0 : 1]; }
    void upload(Side, const std::vector<std::string>&) override {}
    void sleep_ms(std::uint64_t ms) override { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }

    std::uint64_t now_ms() const override
    {
        return static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count());
    }

    const transport::TransportLog& log() const override { return log_; }

private:
    std::chrono::steady_clock::time_point start_;
    transport::TransportLog log_;
    std::unique_ptr<transport::SerialEndpoint> endpoints_[2];
    std::unique_ptr<transport::Controller> controllers_[2];
};

} // namespace dharness::bench

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

// Reference drivers that run on the simulated DUT. Each takes its fault
// switches at construction time; nothing on the wire can turn a fault on.

#include "dharness/bus.hpp"
#include "dharness/error.hpp"
#include "dharness/nmea.hpp"
#include "dharness/rtc_registers.hpp"
#include "dharness/simcore.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dharness::dut
{

using bus::Bytes;

// ---------------------------------------------------------------------------
// Fault injection

struct Faults
{
    std::int64_t period_skew_ms = 0;
    bool swap_bcd_nibbles = false;
    bool omit_checksum = false;
    bool drop_first_byte = false;
    std::optional<std::uint64_t> ble_init_delay_ms;

    bool any() const noexcept
    {
        return period_skew_ms != 0 || swap_bcd_nibbles || omit_checksum || drop_first_byte || ble_init_delay_ms;
    }
};

struct FaultInfo
{
    std::string_view name;
    std::string_view default_value; // empty for plain switches
    std::string_view description;
};

inline constexpr FaultInfo fault_catalog[] = {
    {"period_skew_ms", "2", "Blinker waits period + N ms between toggles"},
    {"swap_bcd_nibbles", "", "RtcDriver writes registers with BCD nibbles swapped"},
    {"omit_checksum", "", "GpsDriver sends commands without the *CS suffix"},
    {"drop_first_byte", "", "SpiMaster loses the first received byte and pads with 0x00"},
    {"ble_init_delay_ms", "6000", "BleTempSensor takes N ms to start advertising"},
};

/// Applies "name" or "name=value". Throws Error(invalid_argument) on unknown
/// names or bad values.
inline void apply_fault(Faults& faults, std::string_view spec)
{
    const auto eq = spec.find('=');
    const auto name = spec.substr(0, eq);
    const FaultInfo* info = nullptr;
    for (const auto& f : fault_catalog)
    {
        if (f.name == name)
        {
            info = &f;
        }
    }
    if (!info)
    {
        throw Error(Errc::invalid_argument, "unknown fault '" + std::string(name) + "'");
    }
    std::string_view value = eq == std::string_view::npos ? info->default_value : spec.substr(eq + 1);
    if (info->default_value.empty())
    {
        if (eq != std::string_view::npos)
        {
            throw Error(Errc::invalid_argument, "fault '" + std::string(name) + "' takes no value");
        }
    }
    std::int64_t number = 0;
    if (!info->default_value.empty())
    {
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), number);
        if (ec != std::errc{} || ptr != value.data() + value.size())
        {
            throw Error(Errc::invalid_argument, "fault '" + std::string(name) + "' needs an integer value");
        }
    }
    if (name == "period_skew_ms")
    {
        faults.period_skew_ms = number;
    }
    else if (name == "swap_bcd_nibbles")
    {
        faults.swap_bcd_nibbles = true;
    }
    else if (name == "omit_checksum")
    {
        faults.omit_checksum = true;
    }
    else if (name == "drop_first_byte")
    {
        faults.drop_first_byte = true;
    }
    else if (name == "ble_init_delay_ms")
    {
        if (number < 0)
        {
            throw Error(Errc::invalid_argument, "ble_init_delay_ms must be non-negative");
        }
        faults.ble_init_delay_ms = static_cast<std::uint64_t>(number);
    }
}

// ---------------------------------------------------------------------------

enum class BlinkMode
{
    blocking,
    isr,
};

/// Toggles a pin 2 * count times, period_ms apart. Blocking mode burns the
/// time inside the call; ISR mode arms a periodic timer and returns.
class Blinker
{
public:
    Blinker(bus::GpioLine& pin, sim::Scheduler& scheduler, std::uint64_t period_ms, std::uint32_t count,
            std::int64_t skew_ms = 0)
        : pin_(&pin), scheduler_(&scheduler), period_ms_(period_ms), count_(count)
    {
        if (period_ms == 0 || count == 0)
        {
            throw Error(Errc::invalid_argument, "blink period and count must be positive");
        }
        const auto interval = static_cast<std::int64_t>(period_ms) + skew_ms;
        if (interval < 1)
        {
            throw Error(Errc::invalid_argument, "skewed blink interval must stay positive");
        }
        interval_ms_ = static_cast<std::uint64_t>(interval);
        pin_->write(0, scheduler_->now());
    }

    ~Blinker() { stop(); }

    Blinker(const Blinker&) = delete;
    Blinker& operator=(const Blinker&) = delete;

    void blink(BlinkMode mode)
    {
        stop();
        toggles_ = 0;
        if (mode == BlinkMode::blocking)
        {
            for (std::uint32_t i = 0; i < 2 * count_; ++i)
            {
                scheduler_->sleep_for(interval_ms_);
                toggle();
            }
            return;
        }
        timer_ = scheduler_->schedule(interval_ms_, [this] {
            toggle();
            if (toggles_ == 2 * count_)
            {
                stop();
            }
        }, interval_ms_);
    }

    bool running() const { return timer_ && scheduler_->is_pending(*timer_); }
    std::uint32_t toggles() const noexcept { return toggles_; }
    std::uint64_t period_ms() const noexcept { return period_ms_; }
    std::uint32_t count() const noexcept { return count_; }

private:
    void toggle()
    {
        pin_->write(pin_->level() ^ 1, scheduler_->now());
        ++toggles_;
    }

    void stop()
    {
        if (timer_)
        {
            scheduler_->cancel(*timer_);
            timer_.reset();
        }
    }

    bus::GpioLine* pin_;
    sim::Scheduler* scheduler_;
    std::uint64_t period_ms_;
    std::uint64_t interval_ms_ = 0;
    std::uint32_t count_;
    std::uint32_t toggles_ = 0;
    std::optional<sim::EventHandle> timer_;
};

// ---------------------------------------------------------------------------

class RtcDriver
{
public:
    explicit RtcDriver(bus::I2cBus& i2c, bool swap_bcd_nibbles = false,
                       std::uint8_t address = rtc::device_address)
        : i2c_(&i2c), swap_(swap_bcd_nibbles), address_(address)
    {
    }

    /// One transaction: register pointer 0x00 followed by all seven registers.
    void set_datetime(const rtc::DateTime& dt)
    {
        const auto image = rtc::encode(dt);
        Bytes frame{0x00};
        for (auto b : image)
        {
            frame.push_back(swap_ ? static_cast<std::uint8_t>((b << 4) | (b >> 4)) : b);
        }
        i2c_->write_then_read(address_, frame, 0);
    }

    rtc::RegisterImage read_registers()
    {
        const Bytes pointer{0x00};
        const auto bytes = i2c_->write_then_read(address_, pointer, rtc::register_count);
        rtc::RegisterImage image{};
        std::copy(bytes.begin(), bytes.end(), image.begin());
        return image;
    }

    rtc::DateTime get_datetime() { return rtc::decode(read_registers()); }

private:
    bus::I2cBus* i2c_;
    bool swap_;
    std::uint8_t address_;
};

// ---------------------------------------------------------------------------

/// UART GPS driver: command sender plus the line reader and GGA parser
/// layered on top of it.
class GpsDriver
{
public:
    GpsDriver(bus::UartLink& uart, sim::Scheduler& scheduler, bool omit_checksum = false)
        : uart_(&uart), scheduler_(&scheduler), omit_checksum_(omit_checksum)
    {
        uart_->flush(bus::UartDir::b_to_a);
    }

    void send_command(std::string_view body)
    {
        std::string sentence = nmea::make_sentence(body);
        if (omit_checksum_)
        {
            sentence = "$" + std::string(body) + "\r\n";
        }
        uart_->send(bus::UartDir::a_to_b, sentence);
    }

    double get_latitude(std::uint64_t timeout_ms)
    {
        const auto pos = next_position(timeout_ms);
        return nmea::to_decimal_degrees(pos.latitude, pos.ns);
    }

    double get_longitude(std::uint64_t timeout_ms)
    {
        const auto pos = next_position(timeout_ms);
        return nmea::to_decimal_degrees(pos.longitude, pos.ew);
    }

    std::size_t parse_errors() const noexcept { return parse_errors_; }

private:
    /// Skips sentences of other types; corrupt lines are counted and skipped.
    nmea::GgaPosition next_position(std::uint64_t timeout_ms)
    {
        const auto deadline = scheduler_->now() + timeout_ms;
        while (true)
        {
            const auto now = scheduler_->now();
            const auto remaining = deadline > now ? deadline.millis - now.millis : 0;
            const auto line = uart_->recv_line(bus::UartDir::b_to_a, remaining);
            const auto body = nmea::validate(line);
            if (!body)
            {
                ++parse_errors_;
                continue;
            }
            const auto fields = nmea::split_fields(*body);
            if (fields[0].size() != 5 || fields[0].substr(2) != "GGA")
            {
                continue;
            }
            try
            {
                return nmea::parse_gga(*body);
            }
            catch (const Error&)
            {
                ++parse_errors_;
            }
        }
    }

    bus::UartLink* uart_;
    sim::Scheduler* scheduler_;
    bool omit_checksum_;
    std::size_t parse_errors_ = 0;
};

// ---------------------------------------------------------------------------

/// SPI master. Chip select is asserted around every call.
class SpiMasterDriver
{
public:
    explicit SpiMasterDriver(bus::SpiBus& spi, bool drop_first_byte = false) : spi_(&spi), drop_(drop_first_byte) {}

    void write(std::span<const std::uint8_t> bytes) { transact(bytes); }

    /// Clocks out n dummy 0x00 bytes and returns what the slave shifted in.
    Bytes read(std::size_t n)
    {
        const Bytes dummy(n, 0x00);
        return received(transact(dummy));
    }

    Bytes write_read(std::span<const std::uint8_t> bytes) { return received(transact(bytes)); }

private:
    struct ChipSelect
    {
        bus::SpiBus& spi;
        explicit ChipSelect(bus::SpiBus& s) : spi(s) { spi.assert_cs(); }
        ~ChipSelect() { spi.deassert_cs(); }
    };

    Bytes transact(std::span<const std::uint8_t> mosi)
    {
        ChipSelect cs{*spi_};
        return spi_->transfer(mosi);
    }

    Bytes received(Bytes miso) const
    {
        if (drop_ && !miso.empty())
        {
            miso.erase(miso.begin());
            miso.push_back(0x00);
        }
        return miso;
    }

    bus::SpiBus* spi_;
    bool drop_;
};

// ---------------------------------------------------------------------------

/// BLE peripheral publishing one temperature characteristic.
class BleTempSensor
{
public:
    static constexpr std::string_view default_name = "TempSensor";
    static constexpr std::string_view characteristic = "temp";
    static constexpr std::string_view service = "environmental_sensing";

    BleTempSensor(bus::BleAir& air, std::uint64_t init_delay_ms, std::string name = std::string(default_name))
        : air_(&air), init_delay_ms_(init_delay_ms), name_(std::move(name))
    {
    }

    ~BleTempSensor()
    {
        if (started_)
        {
            air_->remove_peripheral(name_);
        }
    }

    BleTempSensor(const BleTempSensor&) = delete;
    BleTempSensor& operator=(const BleTempSensor&) = delete;

    /// Advertising begins init_delay_ms after this call.
    void start()
    {
        air_->add_peripheral(name_, bus::Advertisement{name_, {std::string(service)}}, init_delay_ms_);
        air_->write(name_, std::string(characteristic), temperature_);
        started_ = true;
    }

    void set_temperature(double celsius)
    {
        require_started();
        temperature_ = celsius;
        air_->write(name_, std::string(characteristic), celsius);
    }

    std::size_t notify()
    {
        require_started();
        return air_->notify(name_, std::string(characteristic));
    }

    bool started() const noexcept { return started_; }
    bool is_advertising() const { return air_->is_advertising(name_); }
    double temperature() const noexcept { return temperature_; }
    std::uint64_t init_delay_ms() const noexcept { return init_delay_ms_; }
    const std::string& name() const noexcept { return name_; }

private:
    void require_started() const
    {
        if (!started_)
        {
            throw Error(Errc::not_started, "sensor not started");
        }
    }

    bus::BleAir* air_;
    std::uint64_t init_delay_ms_;
    std::string name_;
    double temperature_ = 0.0;
    bool started_ = false;
};

} // namespace dharness::dut

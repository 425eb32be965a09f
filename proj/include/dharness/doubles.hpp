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

// Peripheral impostors. Each one attaches to a bus on construction and
// detaches on destruction, so deleting the object on the device is enough to
// pull it off the wire.

#include "dharness/bus.hpp"
#include "dharness/error.hpp"
#include "dharness/nmea.hpp"
#include "dharness/rtc_registers.hpp"
#include "dharness/simcore.hpp"

#include <charconv>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dharness::doubles
{

using bus::Bytes;

// ---------------------------------------------------------------------------

/// Listens to a GPIO line and reports the mean interval between consecutive
/// edges once `expected_toggles` edges have been captured.
class LedDouble
{
public:
    LedDouble(bus::GpioLine& line, std::size_t expected_toggles) : line_(&line), expected_toggles_(expected_toggles)
    {
        if (expected_toggles < 2)
        {
            throw Error(Errc::invalid_argument, "need at least 2 toggles to measure an interval");
        }
        subscription_ = line_->subscribe([this](const bus::Edge& edge) { on_edge(edge); });
    }

    ~LedDouble() { line_->unsubscribe(subscription_); }

    LedDouble(const LedDouble&) = delete;
    LedDouble& operator=(const LedDouble&) = delete;

    void start_acquisition()
    {
        edge_times_.clear();
        acquiring_ = true;
    }

    bool acquiring() const noexcept { return acquiring_; }
    std::size_t expected_toggles() const noexcept { return expected_toggles_; }
    std::size_t edges_captured() const noexcept { return edge_times_.size(); }

    std::vector<std::uint64_t> intervals() const
    {
        std::vector<std::uint64_t> out;
        for (std::size_t i = 1; i < edge_times_.size(); ++i)
        {
            out.push_back(edge_times_[i] - edge_times_[i - 1]);
        }
        return out;
    }

    double average_blink_ms() const
    {
        if (edge_times_.size() < expected_toggles_)
        {
            throw Error(Errc::not_ready, "captured " + std::to_string(edge_times_.size()) + " of " +
                                             std::to_string(expected_toggles_) + " toggles");
        }
        const auto gaps = intervals();
        const auto total = std::accumulate(gaps.begin(), gaps.end(), std::uint64_t{0});
        return static_cast<double>(total) / static_cast<double>(gaps.size());
    }

private:
    void on_edge(const bus::Edge& edge)
    {
        if (!acquiring_)
        {
            return;
        }
        edge_times_.push_back(edge.at.millis);
        if (edge_times_.size() >= expected_toggles_)
        {
            acquiring_ = false;
        }
    }

    bus::GpioLine* line_;
    std::size_t expected_toggles_;
    std::uint64_t subscription_ = 0;
    bool acquiring_ = false;
    std::vector<std::uint64_t> edge_times_;
};

// ---------------------------------------------------------------------------

enum class RtcMode
{
    static_clock,  // keeps whatever was written
    dynamic_clock, // internal 1 Hz timer advances the registers
};

/// DS3231-like RTC: seven BCD timekeeping registers behind an I2C register
/// pointer. Register writes store raw bytes, as the real part does.
class RtcDouble
{
public:
    static constexpr std::uint64_t tick_ms = 1000;

    RtcDouble(bus::I2cBus& i2c, sim::Scheduler& scheduler, std::uint8_t address = rtc::device_address)
        : i2c_(&i2c), scheduler_(&scheduler), address_(address)
    {
        regs_ = rtc::encode(rtc::DateTime{});
        i2c_->attach(address_, [this](std::span<const std::uint8_t> w, std::size_t n) { return handle_i2c(w, n); });
    }

    ~RtcDouble()
    {
        stop_tick();
        i2c_->detach(address_);
    }

    RtcDouble(const RtcDouble&) = delete;
    RtcDouble& operator=(const RtcDouble&) = delete;

    /// First written byte sets the register pointer; further bytes are
    /// stored with auto-increment. Reads continue from the pointer. The
    /// pointer wraps from 0x06 back to 0x00.
    Bytes handle_i2c(std::span<const std::uint8_t> written, std::size_t nread)
    {
        if (!written.empty())
        {
            if (written[0] >= rtc::register_count)
            {
                throw Error(Errc::nack, "register pointer " + bus::hex_byte(written[0]) + " beyond 0x06");
            }
            pointer_ = written[0];
            for (auto byte : written.subspan(1))
            {
                regs_[pointer_] = byte;
                if (pointer_ == rtc::seconds)
                {
                    // Writing seconds resets the divider chain.
                    rephase_tick();
                }
                advance_pointer();
            }
        }
        Bytes out;
        out.reserve(nread);
        for (std::size_t i = 0; i < nread; ++i)
        {
            out.push_back(regs_[pointer_]);
            advance_pointer();
        }
        return out;
    }

    void set_mode(RtcMode mode)
    {
        if (mode == mode_)
        {
            return;
        }
        mode_ = mode;
        if (mode_ == RtcMode::dynamic_clock)
        {
            start_tick();
        }
        else
        {
            stop_tick();
        }
    }

    RtcMode mode() const noexcept { return mode_; }
    bool tick_pending() const { return tick_ && scheduler_->is_pending(*tick_); }

    const rtc::RegisterImage& registers() const noexcept { return regs_; }
    void set_registers(const rtc::RegisterImage& regs)
    {
        regs_ = regs;
        rephase_tick();
    }

    rtc::DateTime datetime() const { return rtc::decode(regs_); }
    void set_datetime(const rtc::DateTime& dt) { set_registers(rtc::encode(dt)); }

    /// One second of timekeeping with full calendar carry. Tolerates raw
    /// non-BCD bytes by reading nibbles positionally, so the registers are
    /// valid BCD again after the next carry.
    void increment_second()
    {
        auto raw = [this](rtc::Reg r) { return (regs_[r] >> 4) * 10 + (regs_[r] & 0x0f); };
        auto store = [this](rtc::Reg r, int v) { regs_[r] = static_cast<std::uint8_t>(((v / 10) << 4) | (v % 10)); };

        const int second = raw(rtc::seconds) + 1;
        if (second < 60)
        {
            store(rtc::seconds, second);
            return;
        }
        store(rtc::seconds, 0);
        const int minute = raw(rtc::minutes) + 1;
        if (minute < 60)
        {
            store(rtc::minutes, minute);
            return;
        }
        store(rtc::minutes, 0);
        const int hour = raw(rtc::hours) + 1;
        if (hour < 24)
        {
            store(rtc::hours, hour);
            return;
        }
        store(rtc::hours, 0);

        const int weekday = raw(rtc::weekday);
        store(rtc::weekday, weekday >= 1 && weekday < 7 ? weekday + 1 : 1);

        const int year = 2000 + raw(rtc::year);
        const int month = raw(rtc::month);
        const int day = raw(rtc::date) + 1;
        if (day <= rtc::days_in_month(year, month))
        {
            store(rtc::date, day);
            return;
        }
        store(rtc::date, 1);
        if (month + 1 <= 12 && month >= 1)
        {
            store(rtc::month, month + 1);
            return;
        }
        store(rtc::month, 1);
        store(rtc::year, year - 2000 + 1 <= 99 ? year - 2000 + 1 : 0);
    }

private:
    void advance_pointer() noexcept { pointer_ = static_cast<std::uint8_t>((pointer_ + 1) % rtc::register_count); }

    void start_tick()
    {
        tick_ = scheduler_->schedule(tick_ms, [this] { increment_second(); }, tick_ms);
    }

    void rephase_tick()
    {
        if (mode_ == RtcMode::dynamic_clock)
        {
            stop_tick();
            start_tick();
        }
    }

    void stop_tick()
    {
        if (tick_)
        {
            scheduler_->cancel(*tick_);
            tick_.reset();
        }
    }

    bus::I2cBus* i2c_;
    sim::Scheduler* scheduler_;
    std::uint8_t address_;
    rtc::RegisterImage regs_{};
    std::uint8_t pointer_ = 0;
    RtcMode mode_ = RtcMode::static_clock;
    std::optional<sim::EventHandle> tick_;
};

// ---------------------------------------------------------------------------

/// NEO-6M-like receiver. Reads configuration sentences from the DUT on the
/// a->b lane and emits position sentences on the b->a lane at the configured
/// update period. Configuration uses a proprietary talker:
///
///   $PDBL,RATE,<ms>*CS          update period, 0 stops emission
///   $PDBL,SEL,<GGA|RMC>,<0|1>*CS enable or disable a sentence type
class GpsDouble
{
public:
    GpsDouble(bus::UartLink& uart, sim::Scheduler& scheduler) : uart_(&uart), scheduler_(&scheduler)
    {
        uart_->set_line_listener(bus::UartDir::a_to_b, [this](const std::string& line) { on_uart_line(line); });
    }

    ~GpsDouble()
    {
        stop_emitter();
        uart_->clear_line_listener(bus::UartDir::a_to_b);
    }

    GpsDouble(const GpsDouble&) = delete;
    GpsDouble& operator=(const GpsDouble&) = delete;

    /// Bad or unknown sentences are dropped and counted, never answered.
    void on_uart_line(std::string_view line)
    {
        const auto body = nmea::validate(line);
        if (!body || !apply_command(nmea::split_fields(*body)))
        {
            ++rejected_;
        }
    }

    void set_fix(const std::string& latitude, char ns, const std::string& longitude, char ew)
    {
        if (!nmea::is_latitude_field(latitude) || (ns != 'N' && ns != 'S'))
        {
            throw Error(Errc::format, "bad latitude '" + latitude + "," + ns + "'");
        }
        if (!nmea::is_longitude_field(longitude) || (ew != 'E' && ew != 'W'))
        {
            throw Error(Errc::format, "bad longitude '" + longitude + "," + ew + "'");
        }
        fix_ = nmea::Fix{latitude, ns, longitude, ew};
    }

    const nmea::Fix& fix() const noexcept { return fix_; }

    /// First emission one period from now; 0 stops emission.
    void set_rate(std::uint64_t period_ms)
    {
        stop_emitter();
        period_ms_ = period_ms;
        if (period_ms_ > 0)
        {
            emitter_ = scheduler_->schedule(period_ms_, [this] { emit(); }, period_ms_);
        }
    }

    std::uint64_t update_period_ms() const noexcept { return period_ms_; }

    void select(std::string_view type, bool enabled)
    {
        if (type == "GGA")
        {
            gga_ = enabled;
        }
        else if (type == "RMC")
        {
            rmc_ = enabled;
        }
        else
        {
            throw Error(Errc::invalid_argument, "unknown sentence type '" + std::string(type) + "'");
        }
    }

    bool enabled(std::string_view type) const
    {
        if (type == "GGA")
        {
            return gga_;
        }
        if (type == "RMC")
        {
            return rmc_;
        }
        throw Error(Errc::invalid_argument, "unknown sentence type '" + std::string(type) + "'");
    }

    std::size_t rejected() const noexcept { return rejected_; }
    std::size_t emitted() const noexcept { return sentences_.size(); }
    const std::vector<std::string>& sentences() const noexcept { return sentences_; }
    const std::vector<sim::SimTime>& emission_times() const noexcept { return emission_times_; }

private:
    bool apply_command(const std::vector<std::string>& f)
    {
        if (f.empty() || f[0] != "PDBL")
        {
            return false;
        }
        auto number = [](const std::string& s) -> std::optional<std::uint64_t> {
            std::uint64_t v = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
            {
                return std::nullopt;
            }
            return v;
        };
        if (f.size() == 3 && f[1] == "RATE")
        {
            const auto period = number(f[2]);
            if (!period)
            {
                return false;
            }
            set_rate(*period);
            return true;
        }
        if (f.size() == 4 && f[1] == "SEL" && (f[2] == "GGA" || f[2] == "RMC") && (f[3] == "0" || f[3] == "1"))
        {
            select(f[2], f[3] == "1");
            return true;
        }
        return false;
    }

    void emit()
    {
        const auto now = scheduler_->now();
        if (gga_)
        {
            send(nmea::make_sentence(nmea::gga_body(now.millis, fix_)), now);
        }
        if (rmc_)
        {
            send(nmea::make_sentence(nmea::rmc_body(now.millis, fix_)), now);
        }
    }

    void send(const std::string& sentence, sim::SimTime now)
    {
        sentences_.push_back(sentence);
        emission_times_.push_back(now);
        uart_->send(bus::UartDir::b_to_a, sentence);
    }

    void stop_emitter()
    {
        if (emitter_)
        {
            scheduler_->cancel(*emitter_);
            emitter_.reset();
        }
    }

    bus::UartLink* uart_;
    sim::Scheduler* scheduler_;
    nmea::Fix fix_;
    std::uint64_t period_ms_ = 0;
    bool gga_ = true;
    bool rmc_ = false;
    std::size_t rejected_ = 0;
    std::optional<sim::EventHandle> emitter_;
    std::vector<std::string> sentences_;
    std::vector<sim::SimTime> emission_times_;
};

// ---------------------------------------------------------------------------

/// Generic SPI slave: shifts preloaded bytes out on MISO (0x00 once the FIFO
/// runs dry) and captures everything clocked in on MOSI.
class SpiSlaveDouble
{
public:
    explicit SpiSlaveDouble(bus::SpiBus& spi) : spi_(&spi)
    {
        spi_->attach_slave([this](std::span<const std::uint8_t> mosi) { return exchange(mosi); });
    }

    ~SpiSlaveDouble() { spi_->detach_slave(); }

    SpiSlaveDouble(const SpiSlaveDouble&) = delete;
    SpiSlaveDouble& operator=(const SpiSlaveDouble&) = delete;

    void preload_tx(std::span<const std::uint8_t> bytes) { tx_fifo_.insert(tx_fifo_.end(), bytes.begin(), bytes.end()); }

    /// Returns and clears the captured MOSI bytes.
    Bytes get_rx()
    {
        Bytes out;
        out.swap(rx_log_);
        return out;
    }

    std::size_t tx_pending() const noexcept { return tx_fifo_.size(); }
    const Bytes& rx_log() const noexcept { return rx_log_; }

    Bytes exchange(std::span<const std::uint8_t> mosi)
    {
        Bytes miso;
        miso.reserve(mosi.size());
        for (auto byte : mosi)
        {
            rx_log_.push_back(byte);
            if (tx_fifo_.empty())
            {
                miso.push_back(0x00);
            }
            else
            {
                miso.push_back(tx_fifo_.front());
                tx_fifo_.pop_front();
            }
        }
        return miso;
    }

private:
    bus::SpiBus* spi_;
    std::deque<std::uint8_t> tx_fifo_;
    Bytes rx_log_;
};

// ---------------------------------------------------------------------------

enum class CentralState
{
    idle,
    scanning,
    connected,
};

/// Smartphone-like BLE central.
class BleCentralDouble
{
public:
    BleCentralDouble(bus::BleAir& air, sim::Scheduler& scheduler) : air_(&air), scheduler_(&scheduler)
    {
        id_ = air_->register_central([this](const bus::Notification& n) { inbox_.push_back(n); });
    }

    ~BleCentralDouble() { air_->unregister_central(id_); }

    BleCentralDouble(const BleCentralDouble&) = delete;
    BleCentralDouble& operator=(const BleCentralDouble&) = delete;

    /// Scans for `name` and connects. timeout_ms = 0 scans without a window of
    /// its own, i.e. until found or until the caller's horizon cuts it off.
    bool scan_connect(const std::string& name, std::uint64_t timeout_ms)
    {
        disconnect();
        state_ = CentralState::scanning;
        const auto deadline = timeout_ms == 0 ? sim::forever : scheduler_->now() + timeout_ms;
        try
        {
            air_->scan_until(name, deadline);
        }
        catch (const Error&)
        {
            state_ = CentralState::idle;
            throw;
        }
        air_->connect(id_, name);
        peer_ = name;
        state_ = CentralState::connected;
        return true;
    }

    double read(const std::string& characteristic)
    {
        require_connected();
        last_read_ = air_->read(id_, *peer_, characteristic);
        return *last_read_;
    }

    /// Next notification value; queued notifications are returned first.
    double await_notify(std::uint64_t timeout_ms)
    {
        if (inbox_.empty())
        {
            require_connected();
            if (!scheduler_->wait_until([this] { return !inbox_.empty(); }, scheduler_->now() + timeout_ms))
            {
                throw Error(Errc::timeout, "no notification within " + std::to_string(timeout_ms) + " ms");
            }
        }
        const double value = inbox_.front().value;
        inbox_.pop_front();
        return value;
    }

    void disconnect()
    {
        if (peer_)
        {
            air_->disconnect(id_, *peer_);
            peer_.reset();
        }
        state_ = CentralState::idle;
    }

    CentralState state() const noexcept { return state_; }
    bool is_connected() const { return peer_ && air_->connected(id_, *peer_); }
    std::optional<double> last_read() const noexcept { return last_read_; }
    std::size_t pending_notifications() const noexcept { return inbox_.size(); }
    std::uint64_t id() const noexcept { return id_; }

private:
    void require_connected() const
    {
        if (state_ != CentralState::connected || !is_connected())
        {
            throw Error(Errc::not_connected, "central is not connected");
        }
    }

    bus::BleAir* air_;
    sim::Scheduler* scheduler_;
    std::uint64_t id_ = 0;
    CentralState state_ = CentralState::idle;
    std::optional<std::string> peer_;
    std::optional<double> last_read_;
    std::deque<bus::Notification> inbox_;
};

} // namespace dharness::doubles

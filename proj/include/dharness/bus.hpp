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

// Transaction-level models of the wires between DUT and Double. Timing comes
// exclusively from the shared scheduler; nothing here models electrical
// behaviour.

#include "dharness/error.hpp"
#include "dharness/simcore.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <algorithm>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dharness::bus
{

using sim::SimTime;
using Bytes = std::vector<std::uint8_t>;

inline std::string hex_byte(std::uint8_t b)
{
    static constexpr char digits[] = "0123456789ABCDEF";
    return std::string{'0', 'x', digits[b >> 4], digits[b & 0x0f]};
}

// ---------------------------------------------------------------------------
// GPIO

struct Edge
{
    SimTime at;
    int level = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// A single wire. Only level changes are recorded.
class GpioLine
{
public:
    using Observer = std::function<void(const Edge&)>;

    int level() const noexcept { return level_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    void write(int level, SimTime at)
    {
        if (level != 0 && level != 1)
        {
            throw Error(Errc::invalid_argument, "GPIO level must be 0 or 1");
        }
        if (at < last_write_)
        {
            throw Error(Errc::time_regression, "GPIO write at " + std::to_string(at.millis) +
                                                   " ms precedes last write at " +
                                                   std::to_string(last_write_.millis) + " ms");
        }
        last_write_ = at;
        if (level == level_)
        {
            return;
        }
        level_ = level;
        edges_.push_back(Edge{at, level});
        const Edge edge = edges_.back();
        // Copy: an observer may unsubscribe itself.
        const auto observers = observers_;
        for (const auto& [id, observer] : observers)
        {
            observer(edge);
        }
    }

    std::uint64_t subscribe(Observer observer)
    {
        const auto id = next_id_++;
        observers_.emplace(id, std::move(observer));
        return id;
    }

    void unsubscribe(std::uint64_t id) { observers_.erase(id); }

private:
    int level_ = 0;
    SimTime last_write_{};
    std::vector<Edge> edges_;
    std::map<std::uint64_t, Observer> observers_;
    std::uint64_t next_id_ = 1;
};

// ---------------------------------------------------------------------------
// I2C

/// Receives the bytes written in the transaction and returns exactly nread bytes.
using I2cHandler = std::function<Bytes(std::span<const std::uint8_t> written, std::size_t nread)>;

class I2cBus
{
public:
    static constexpr std::uint8_t min_address = 0x08;
    static constexpr std::uint8_t max_address = 0x77;

    void attach(std::uint8_t address, I2cHandler handler)
    {
        if (address < min_address || address > max_address)
        {
            throw Error(Errc::invalid_argument, "I2C address " + hex_byte(address) + " outside 0x08..0x77");
        }
        if (!devices_.emplace(address, std::move(handler)).second)
        {
            throw Error(Errc::invalid_argument, "I2C address " + hex_byte(address) + " already in use");
        }
    }

    void detach(std::uint8_t address) { devices_.erase(address); }
    bool has_device(std::uint8_t address) const { return devices_.count(address) != 0; }

    Bytes write_then_read(std::uint8_t address, std::span<const std::uint8_t> written, std::size_t nread)
    {
        auto it = devices_.find(address);
        if (it == devices_.end())
        {
            throw Error(Errc::nack, "no device acknowledged address " + hex_byte(address));
        }
        Bytes result = it->second(written, nread);
        if (result.size() != nread)
        {
            throw Error(Errc::protocol, "I2C device at " + hex_byte(address) + " returned " +
                                            std::to_string(result.size()) + " bytes, expected " +
                                            std::to_string(nread));
        }
        return result;
    }

private:
    std::map<std::uint8_t, I2cHandler> devices_;
};

// ---------------------------------------------------------------------------
// UART

enum class UartDir
{
    a_to_b,
    b_to_a,
};

/// Two independent byte FIFOs. A direction may have a line listener, in which
/// case complete lines are pushed to it as soon as they arrive.
class UartLink
{
public:
    using LineListener = std::function<void(const std::string& line)>;

    explicit UartLink(sim::Scheduler& scheduler) : scheduler_(&scheduler) {}

    void send(UartDir dir, std::string_view bytes)
    {
        auto& lane = lanes_[index(dir)];
        lane.fifo.append(bytes);
        lane.sent += bytes.size();
        if (lane.listener)
        {
            while (auto line = take_line(lane))
            {
                // The listener may send on the opposite direction.
                auto listener = lane.listener;
                listener(*line);
            }
        }
    }

    std::optional<std::string> try_recv_line(UartDir dir) { return take_line(lanes_[index(dir)]); }

    /// Waits in simulated time for a complete line (LF included).
    std::string recv_line(UartDir dir, std::uint64_t timeout_ms)
    {
        auto& lane = lanes_[index(dir)];
        const bool ready = scheduler_->wait_until(
            [&lane] { return lane.fifo.find('\n') != std::string::npos; }, scheduler_->now() + timeout_ms);
        if (!ready)
        {
            throw Error(Errc::timeout, "no UART line within " + std::to_string(timeout_ms) + " ms");
        }
        return *take_line(lane);
    }

    /// Raw read of up to max bytes, no waiting.
    std::string recv_bytes(UartDir dir, std::size_t max)
    {
        auto& lane = lanes_[index(dir)];
        const auto n = std::min(max, lane.fifo.size());
        std::string out = lane.fifo.substr(0, n);
        lane.fifo.erase(0, n);
        lane.received += n;
        return out;
    }

    void set_line_listener(UartDir dir, LineListener listener) { lanes_[index(dir)].listener = std::move(listener); }
    void clear_line_listener(UartDir dir) { lanes_[index(dir)].listener = nullptr; }

    std::size_t buffered(UartDir dir) const { return lanes_[index(dir)].fifo.size(); }
    std::uint64_t bytes_sent(UartDir dir) const { return lanes_[index(dir)].sent; }
    std::uint64_t bytes_received(UartDir dir) const { return lanes_[index(dir)].received; }

    void flush(UartDir dir)
    {
        auto& lane = lanes_[index(dir)];
        lane.received += lane.fifo.size();
        lane.fifo.clear();
    }

private:
    struct Lane
    {
        std::string fifo;
        LineListener listener;
        std::uint64_t sent = 0;
        std::uint64_t received = 0;
    };

    static std::size_t index(UartDir dir) { return dir == UartDir::a_to_b ? 0 : 1; }

    static std::optional<std::string> take_line(Lane& lane)
    {
        const auto lf = lane.fifo.find('\n');
        if (lf == std::string::npos)
        {
            return std::nullopt;
        }
        std::string line = lane.fifo.substr(0, lf + 1);
        lane.fifo.erase(0, lf + 1);
        lane.received += line.size();
        return line;
    }

    sim::Scheduler* scheduler_;
    Lane lanes_[2];
};

// ---------------------------------------------------------------------------
// SPI

struct SpiTransfer
{
    Bytes mosi;
    Bytes miso;
    SimTime at;
};

/// Consumes MOSI and supplies MISO of the same length.
using SpiSlaveHandler = std::function<Bytes(std::span<const std::uint8_t> mosi)>;

class SpiBus
{
public:
    explicit SpiBus(sim::Scheduler& scheduler) : scheduler_(&scheduler) {}

    void attach_slave(SpiSlaveHandler handler) { slave_ = std::move(handler); }
    void detach_slave() { slave_ = nullptr; }
    bool has_slave() const noexcept { return static_cast<bool>(slave_); }

    void assert_cs() noexcept { cs_ = true; }
    void deassert_cs() noexcept { cs_ = false; }
    bool cs_asserted() const noexcept { return cs_; }

    /// Full duplex. With no slave attached MISO idles high.
    Bytes transfer(std::span<const std::uint8_t> mosi)
    {
        if (!cs_)
        {
            throw Error(Errc::cs_not_asserted, "SPI transfer without chip select");
        }
        Bytes miso = slave_ ? slave_(mosi) : Bytes(mosi.size(), 0xff);
        if (miso.size() != mosi.size())
        {
            throw Error(Errc::protocol, "SPI slave broke full duplex: " + std::to_string(mosi.size()) +
                                            " bytes in, " + std::to_string(miso.size()) + " out");
        }
        log_.push_back(SpiTransfer{Bytes(mosi.begin(), mosi.end()), miso, scheduler_->now()});
        return miso;
    }

    const std::vector<SpiTransfer>& log() const noexcept { return log_; }

private:
    sim::Scheduler* scheduler_;
    SpiSlaveHandler slave_;
    bool cs_ = false;
    std::vector<SpiTransfer> log_;
};

// ---------------------------------------------------------------------------
// BLE

struct Advertisement
{
    std::string name;
    std::vector<std::string> services;
    friend bool operator==(const Advertisement&, const Advertisement&) = default;
};

struct Notification
{
    std::string peripheral;
    std::string characteristic;
    double value = 0.0;
    SimTime at;
};

/// GATT-level radio medium: advertise, scan, connect, read, notify.
class BleAir
{
public:
    using Inbox = std::function<void(const Notification&)>;

    explicit BleAir(sim::Scheduler& scheduler) : scheduler_(&scheduler) {}

    /// The peripheral becomes visible to scanners init_delay_ms from now.
    void add_peripheral(const std::string& name, Advertisement adv, std::uint64_t init_delay_ms)
    {
        remove_peripheral(name);
        auto& p = peripherals_[name];
        p.adv = std::move(adv);
        p.activation = scheduler_->schedule(init_delay_ms, [this, name] {
            auto it = peripherals_.find(name);
            if (it != peripherals_.end())
            {
                it->second.advertising = true;
                it->second.activation.reset();
            }
        });
    }

    void remove_peripheral(const std::string& name)
    {
        auto it = peripherals_.find(name);
        if (it == peripherals_.end())
        {
            return;
        }
        if (it->second.activation)
        {
            scheduler_->cancel(*it->second.activation);
        }
        peripherals_.erase(it);
        std::erase_if(connections_, [&name](const auto& c) { return c.second == name; });
    }

    bool is_advertising(std::string_view name) const
    {
        auto it = peripherals_.find(name);
        return it != peripherals_.end() && it->second.advertising;
    }

    std::optional<Advertisement> scan(std::string_view name) const
    {
        auto it = peripherals_.find(name);
        if (it == peripherals_.end() || !it->second.advertising)
        {
            return std::nullopt;
        }
        return it->second.adv;
    }

    /// Scans until `deadline`; throws scan_timeout when nothing was heard.
    Advertisement scan_until(const std::string& name, SimTime deadline)
    {
        if (!scheduler_->wait_until([this, &name] { return is_advertising(name); }, deadline))
        {
            throw Error(Errc::scan_timeout, "'" + name + "' not found before " + std::to_string(deadline.millis) +
                                                " ms (now " + std::to_string(scheduler_->now().millis) + " ms)");
        }
        return *scan(name);
    }

    void write(const std::string& peripheral, const std::string& characteristic, double value)
    {
        auto it = peripherals_.find(peripheral);
        if (it == peripherals_.end())
        {
            throw Error(Errc::not_started, "peripheral '" + peripheral + "' is not on the air");
        }
        it->second.characteristics[characteristic] = value;
    }

    std::uint64_t register_central(Inbox inbox)
    {
        const auto id = next_central_++;
        centrals_.emplace(id, std::move(inbox));
        return id;
    }

    void unregister_central(std::uint64_t central)
    {
        centrals_.erase(central);
        std::erase_if(connections_, [central](const auto& c) { return c.first == central; });
    }

    void connect(std::uint64_t central, const std::string& peripheral)
    {
        if (centrals_.count(central) == 0)
        {
            throw Error(Errc::invalid_argument, "unknown central " + std::to_string(central));
        }
        if (!is_advertising(peripheral))
        {
            throw Error(Errc::not_connected, "peripheral '" + peripheral + "' is not advertising");
        }
        connections_.emplace(central, peripheral);
    }

    void disconnect(std::uint64_t central, const std::string& peripheral)
    {
        connections_.erase({central, peripheral});
    }

    bool connected(std::uint64_t central, const std::string& peripheral) const
    {
        return connections_.count({central, peripheral}) != 0;
    }

    double read(std::uint64_t central, const std::string& peripheral, const std::string& characteristic) const
    {
        if (!connected(central, peripheral))
        {
            throw Error(Errc::not_connected, "central is not connected to '" + peripheral + "'");
        }
        const auto& chars = peripherals_.at(peripheral).characteristics;
        auto it = chars.find(characteristic);
        if (it == chars.end())
        {
            throw Error(Errc::invalid_argument, "'" + peripheral + "' has no characteristic '" + characteristic + "'");
        }
        return it->second;
    }

    /// Pushes the current value to every connected central; returns the count.
    std::size_t notify(const std::string& peripheral, const std::string& characteristic)
    {
        auto it = peripherals_.find(peripheral);
        if (it == peripherals_.end())
        {
            throw Error(Errc::not_started, "peripheral '" + peripheral + "' is not on the air");
        }
        auto value = it->second.characteristics.find(characteristic);
        if (value == it->second.characteristics.end())
        {
            throw Error(Errc::invalid_argument, "'" + peripheral + "' has no characteristic '" + characteristic + "'");
        }
        const Notification note{peripheral, characteristic, value->second, scheduler_->now()};
        std::vector<std::uint64_t> targets;
        for (const auto& [central, name] : connections_)
        {
            if (name == peripheral)
            {
                targets.push_back(central);
            }
        }
        for (auto central : targets)
        {
            centrals_.at(central)(note);
        }
        return targets.size();
    }

    std::size_t connection_count() const noexcept { return connections_.size(); }

private:
    struct Peripheral
    {
        Advertisement adv;
        std::map<std::string, double, std::less<>> characteristics;
        bool advertising = false;
        std::optional<sim::EventHandle> activation;
    };

    sim::Scheduler* scheduler_;
    std::map<std::string, Peripheral, std::less<>> peripherals_;
    std::map<std::uint64_t, Inbox> centrals_;
    std::set<std::pair<std::uint64_t, std::string>> connections_;
    std::uint64_t next_central_ = 1;
};

} // namespace dharness::bus

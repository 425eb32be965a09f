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

#include "dharness/error.hpp"

#include <compare>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dharness::sim
{

/// Milliseconds since the start of a simulation run.
struct SimTime
{
    std::uint64_t millis = 0;

    friend constexpr auto operator<=>(SimTime, SimTime) = default;

    constexpr SimTime operator+(std::uint64_t ms) const noexcept
    {
        // Saturate so that "now + huge timeout" never wraps into the past.
        const auto max = std::numeric_limits<std::uint64_t>::max();
        return SimTime{ms > max - millis ? max : millis + ms};
    }
};

inline constexpr SimTime forever{std::numeric_limits<std::uint64_t>::max()};

struct EventHandle
{
    std::uint64_t id = 0;
    friend constexpr bool operator==(EventHandle, EventHandle) = default;
};

using Action = std::function<void()>;

/// Thrown out of a cooperative wait when the scheduler horizon is reached
/// before the wait's own deadline. Deliberately not a dharness::Error so that
/// code catching library errors does not swallow it.
class HorizonReached : public std::exception
{
public:
    explicit HorizonReached(SimTime at) : at_(at) {}
    SimTime at() const noexcept { return at_; }
    const char* what() const noexcept override { return "scheduler horizon reached"; }

private:
    SimTime at_;
};

/// Deterministic discrete-event scheduler over integer milliseconds.
///
/// Events fire in (due, seq) order where seq is the insertion sequence, so
/// events due at the same instant fire FIFO. Periodic events are re-armed at
/// due + period with a fresh sequence number until cancelled.
///
/// Not thread-safe: one logical thread of control per instance.
class Scheduler
{
public:
    Scheduler() = default;
    Scheduler(const Scheduler&) = delete;
    Scheduler& operator=(const Scheduler&) = delete;
    Scheduler(Scheduler&&) = default;
    Scheduler& operator=(Scheduler&&) = default;

    SimTime now() const noexcept { return now_; }

    EventHandle schedule(std::uint64_t delay_ms, Action action,
                         std::optional<std::uint64_t> period_ms = std::nullopt)
    {
        if (period_ms && *period_ms == 0)
        {
            throw Error(Errc::invalid_argument, "periodic event with period 0 would never let time advance");
        }
        if (!action)
        {
            throw Error(Errc::invalid_argument, "scheduled action is empty");
        }
        const std::uint64_t id = next_id_++;
        slots_.emplace(id, Slot{std::make_shared<Action>(std::move(action)), period_ms.value_or(0)});
        heap_.push_back(Item{now_ + delay_ms, next_seq_++, id});
        sift_up(heap_.size() - 1);
        return EventHandle{id};
    }

    /// Fires every event with due <= to, including events scheduled by fired
    /// actions, then sets now to `to`. Returns the number of firings.
    std::size_t advance(SimTime to)
    {
        if (to < now_)
        {
            throw Error(Errc::time_regression,
                        "cannot advance to " + std::to_string(to.millis) + " ms, now is " +
                            std::to_string(now_.millis) + " ms");
        }
        if (firing_)
        {
            throw std::logic_error("Scheduler::advance called from inside an event action");
        }
        FiringGuard guard{firing_};

        std::size_t fired = 0;
        while (!heap_.empty() && heap_.front().due <= to)
        {
            const Item top = heap_.front();
            auto it = slots_.find(top.id);
            if (it == slots_.end())
            {
                pop_top();
                continue;
            }
            now_ = top.due;
            std::shared_ptr<Action> action;
            if (it->second.period != 0)
            {
                action = it->second.action;
                heap_.front() = Item{top.due + it->second.period, next_seq_++, top.id};
                sift_down(0);
            }
            else
            {
                action = std::move(it->second.action);
                slots_.erase(it);
                pop_top();
            }
            ++fired;
            ++fired_total_;
            (*action)();
        }
        now_ = to;
        return fired;
    }

    std::size_t advance_by(std::uint64_t ms) { return advance(now_ + ms); }

    /// True iff the event was pending; a cancelled periodic event stops recurring.
    bool cancel(EventHandle handle) { return slots_.erase(handle.id) != 0; }

    bool is_pending(EventHandle handle) const { return slots_.count(handle.id) != 0; }

    std::size_t pending() const noexcept { return slots_.size(); }

    std::uint64_t fired_total() const noexcept { return fired_total_; }

    std::optional<SimTime> next_due()
    {
        while (!heap_.empty() && slots_.count(heap_.front().id) == 0)
        {
            pop_top();
        }
        if (heap_.empty())
        {
            return std::nullopt;
        }
        return heap_.front().due;
    }

    /// Upper bound for cooperative waits. A wait whose deadline lies beyond
    /// the horizon throws HorizonReached once simulated time gets there.
    void set_horizon(std::optional<SimTime> horizon) noexcept { horizon_ = horizon; }
    std::optional<SimTime> horizon() const noexcept { return horizon_; }

    /// Advances simulated time event by event until `ready` holds or the
    /// deadline passes. Blocking device code uses this instead of spinning.
    /// With deadline = forever and nothing left to fire, returns false.
    bool wait_until(const std::function<bool()>& ready, SimTime deadline)
    {
        while (true)
        {
            if (ready())
            {
                return true;
            }
            SimTime limit = deadline;
            const bool cut = horizon_ && *horizon_ < deadline;
            if (cut)
            {
                limit = *horizon_;
            }
            const auto next = next_due();
            if (next && *next <= limit)
            {
                advance(*next);
                continue;
            }
            if (cut)
            {
                advance(limit);
                if (ready())
                {
                    return true;
                }
                throw HorizonReached(limit);
            }
            if (deadline == forever)
            {
                return false;
            }
            advance(deadline);
            return ready();
        }
    }

    void sleep_for(std::uint64_t ms)
    {
        wait_until([] { return false; }, now_ + ms);
    }

private:
    struct Item
    {
        SimTime due;
        std::uint64_t seq;
        std::uint64_t id;
    };

    struct Slot
    {
        std::shared_ptr<Action> action;
        std::uint64_t period; // 0 for one-shot
    };

    struct FiringGuard
    {
        bool& flag;
        explicit FiringGuard(bool& f) : flag(f) { flag = true; }
        ~FiringGuard() { flag = false; }
    };

    static bool earlier(const Item& a, const Item& b) noexcept
    {
        return a.due < b.due || (a.due == b.due && a.seq < b.seq);
    }

    void sift_up(std::size_t i)
    {
        while (i > 0)
        {
            const std::size_t parent = (i - 1) / 2;
            if (!earlier(heap_[i], heap_[parent]))
            {
                break;
            }
            std::swap(heap_[i], heap_[parent]);
            i = parent;
        }
    }

    void sift_down(std::size_t i)
    {
        const std::size_t n = heap_.size();
        while (true)
        {
            const std::size_t left = 2 * i + 1;
            if (left >= n)
            {
                break;
            }
            std::size_t child = left;
            if (left + 1 < n && earlier(heap_[left + 1], heap_[left]))
            {
                child = left + 1;
            }
            if (!earlier(heap_[child], heap_[i]))
            {
                break;
            }
            std::swap(heap_[i], heap_[child]);
            i = child;
        }
    }

    void pop_top()
    {
        heap_.front() = heap_.back();
        heap_.pop_back();
        if (!heap_.empty())
        {
            sift_down(0);
        }
    }

    SimTime now_{};
    std::vector<Item> heap_;
    std::unordered_map<std::uint64_t, Slot> slots_;
    std::uint64_t next_id_ = 1;
    std::uint64_t next_seq_ = 0;
    std::uint64_t fired_total_ = 0;
    std::optional<SimTime> horizon_;
    bool firing_ = false;
};

} // namespace dharness::sim

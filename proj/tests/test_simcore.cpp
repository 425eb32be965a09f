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

#include "dharness/simcore.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <tuple>
#include <vector>

using dharness::Errc;
using dharness::Error;
using dharness::sim::EventHandle;
using dharness::sim::HorizonReached;
using dharness::sim::Scheduler;
using dharness::sim::SimTime;

namespace
{

std::uint64_t ms(SimTime t) { return t.millis; }

} // namespace

TEST(Scheduler, ZeroDelayFiresOnceAtZero)
{
    Scheduler s;
    int fired = 0;
    s.schedule(0, [&] { ++fired; });
    EXPECT_EQ(s.advance(SimTime{0}), 1u);
    EXPECT_EQ(fired, 1);
    EXPECT_EQ(s.advance(SimTime{0}), 0u);
    EXPECT_EQ(fired, 1);
}

TEST(Scheduler, PeriodicFiresAtEachMultiple)
{
    Scheduler s;
    std::vector<std::uint64_t> times;
    s.schedule(1000, [&] { times.push_back(ms(s.now())); }, 1000);
    EXPECT_EQ(s.advance(SimTime{3500}), 3u);
    EXPECT_EQ(times, (std::vector<std::uint64_t>{1000, 2000, 3000}));
    EXPECT_EQ(ms(s.now()), 3500u);
}

TEST(Scheduler, EqualDueTimesFireInInsertionOrder)
{
    Scheduler s;
    std::string order;
    s.schedule(5, [&] { order += 'A'; });
    s.schedule(5, [&] { order += 'B'; });
    s.advance(SimTime{5});
    EXPECT_EQ(order, "AB");
}

TEST(Scheduler, EmptyAdvanceMovesClock)
{
    Scheduler s;
    EXPECT_EQ(s.advance(SimTime{100}), 0u);
    EXPECT_EQ(ms(s.now()), 100u);
    EXPECT_EQ(s.advance(SimTime{100}), 0u);
}

TEST(Scheduler, ChildEventsFireInSamePass)
{
    Scheduler s;
    std::vector<std::pair<char, std::uint64_t>> log;
    s.schedule(50, [&] {
        log.emplace_back('p', ms(s.now()));
        s.schedule(10, [&] { log.emplace_back('c', ms(s.now())); });
    });
    EXPECT_EQ(s.advance(SimTime{100}), 2u);
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(log[0], std::make_pair('p', std::uint64_t{50}));
    EXPECT_EQ(log[1], std::make_pair('c', std::uint64_t{60}));
}

TEST(Scheduler, RejectsTimeRegression)
{
    Scheduler s;
    s.advance(SimTime{10});
    try
    {
        s.advance(SimTime{9});
        FAIL() << "expected time_regression";
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::time_regression);
    }
}

TEST(Scheduler, RejectsZeroPeriodAndEmptyAction)
{
    Scheduler s;
    EXPECT_THROW(s.schedule(1, [] {}, 0), Error);
    EXPECT_THROW(s.schedule(1, {}), Error);
}

TEST(Scheduler, AdvanceFromInsideActionIsRejected)
{
    Scheduler s;
    bool threw = false;
    s.schedule(1, [&] {
        try
        {
            s.advance(SimTime{5});
        }
        catch (const std::logic_error&)
        {
            threw = true;
        }
    });
    s.advance(SimTime{2});
    EXPECT_TRUE(threw);
}

TEST(Scheduler, CancelPendingEvent)
{
    Scheduler s;
    int fired = 0;
    const auto h = s.schedule(10, [&] { ++fired; });
    EXPECT_TRUE(s.is_pending(h));
    EXPECT_TRUE(s.cancel(h));
    EXPECT_FALSE(s.cancel(h));
    s.advance(SimTime{100});
    EXPECT_EQ(fired, 0);
    EXPECT_EQ(s.pending(), 0u);
}

TEST(Scheduler, CancelPeriodicAfterTwoFirings)
{
    Scheduler s;
    int fired = 0;
    const auto h = s.schedule(100, [&] { ++fired; }, 100);
    s.advance(SimTime{250});
    EXPECT_EQ(fired, 2);
    EXPECT_TRUE(s.cancel(h));
    s.advance(SimTime{10000});
    EXPECT_EQ(fired, 2);
}

TEST(Scheduler, PeriodicCanCancelItself)
{
    Scheduler s;
    int fired = 0;
    EventHandle h;
    h = s.schedule(1, [&] {
        if (++fired == 3)
        {
            s.cancel(h);
        }
    }, 1);
    s.advance(SimTime{100});
    EXPECT_EQ(fired, 3);
}

TEST(Scheduler, CancelUnknownHandleIsFalse)
{
    Scheduler s;
    EXPECT_FALSE(s.cancel(EventHandle{12345}));
}

TEST(Scheduler, NextDueSkipsCancelled)
{
    Scheduler s;
    const auto a = s.schedule(5, [] {});
    s.schedule(9, [] {});
    s.cancel(a);
    ASSERT_TRUE(s.next_due().has_value());
    EXPECT_EQ(ms(*s.next_due()), 9u);
}

TEST(Scheduler, WaitUntilStopsWhenReady)
{
    Scheduler s;
    bool flag = false;
    s.schedule(300, [&] { flag = true; });
    s.schedule(900, [] {});
    EXPECT_TRUE(s.wait_until([&] { return flag; }, SimTime{1000}));
    EXPECT_EQ(ms(s.now()), 300u);
}

TEST(Scheduler, WaitUntilTimesOutAtDeadline)
{
    Scheduler s;
    EXPECT_FALSE(s.wait_until([] { return false; }, SimTime{700}));
    EXPECT_EQ(ms(s.now()), 700u);
}

TEST(Scheduler, WaitForeverWithNothingQueuedReturnsFalse)
{
    Scheduler s;
    EXPECT_FALSE(s.wait_until([] { return false; }, dharness::sim::forever));
    EXPECT_EQ(ms(s.now()), 0u);
}

TEST(Scheduler, HorizonCutsLongWaits)
{
    Scheduler s;
    s.set_horizon(SimTime{500});
    try
    {
        s.sleep_for(1000);
        FAIL() << "expected HorizonReached";
    }
    catch (const HorizonReached& h)
    {
        EXPECT_EQ(ms(h.at()), 500u);
    }
    EXPECT_EQ(ms(s.now()), 500u);
    s.set_horizon(std::nullopt);
    s.sleep_for(1000);
    EXPECT_EQ(ms(s.now()), 1500u);
}

TEST(Scheduler, HorizonDoesNotAffectShortWaits)
{
    Scheduler s;
    s.set_horizon(SimTime{500});
    s.sleep_for(400);
    EXPECT_EQ(ms(s.now()), 400u);
}

TEST(SimTime, AdditionSaturates)
{
    EXPECT_EQ((SimTime{10} + 5).millis, 15u);
    EXPECT_EQ((dharness::sim::forever + 5), dharness::sim::forever);
}

// Property: random schedules fire in (due, insertion) order, never early,
// and the fired count matches the number of non-cancelled occurrences.
TEST(SchedulerProperty, OrderConservationAndDeterminism)
{
    auto run = [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        Scheduler s;
        std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>> fired; // due, id, at
        std::vector<std::pair<std::uint64_t, EventHandle>> scheduled;             // due, handle
        for (std::uint64_t i = 0; i < 200; ++i)
        {
            const auto delay = std::uniform_int_distribution<std::uint64_t>(0, 500)(rng);
            const auto due = ms(s.now()) + delay;
            const auto h = s.schedule(delay, [&fired, &s, due, i] { fired.emplace_back(due, i, ms(s.now())); });
            scheduled.emplace_back(due, h);
        }
        std::size_t cancelled_due = 0;
        for (std::size_t i = 0; i < scheduled.size(); i += 7)
        {
            EXPECT_TRUE(s.cancel(scheduled[i].second));
            ++cancelled_due;
        }
        std::size_t total = 0;
        for (std::uint64_t t = 0; t <= 600; t += std::uniform_int_distribution<std::uint64_t>(1, 50)(rng))
        {
            total += s.advance(SimTime{t});
        }
        total += s.advance(SimTime{600});
        EXPECT_EQ(total, fired.size());
        EXPECT_EQ(fired.size(), scheduled.size() - cancelled_due);
        for (std::size_t i = 1; i < fired.size(); ++i)
        {
            const auto& [d0, i0, a0] = fired[i - 1];
            const auto& [d1, i1, a1] = fired[i];
            EXPECT_TRUE(d0 < d1 || (d0 == d1 && i0 < i1));
        }
        for (const auto& [due, id, at] : fired)
        {
            EXPECT_EQ(at, due);
        }
        return fired;
    };
    for (std::uint64_t seed : {1u, 2u, 3u, 42u})
    {
        EXPECT_EQ(run(seed), run(seed));
    }
}

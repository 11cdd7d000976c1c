#include "hdt/state_store.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

using namespace hdt;

TEST (StateStore, EmptyUntilFirstUpdate)
{
    LatestStateStore store;
    EXPECT_FALSE (store.snapshot ());
    VehicleState s;
    s.seq = 0;
    EXPECT_TRUE (store.update (s, 10));
    ASSERT_TRUE (store.snapshot ());
    EXPECT_EQ (store.snapshot ()->arrival_us, 10u);
}

TEST (StateStore, OnlyNewerSequenceReplaces)
{
    LatestStateStore store;
    VehicleState s;
    s.seq = 10;
    EXPECT_TRUE (store.update (s, 1));
    s.seq = 10;
    EXPECT_FALSE (store.update (s, 2));
    s.seq = 3;
    EXPECT_FALSE (store.update (s, 3));
    s.seq = 11;
    EXPECT_TRUE (store.update (s, 4));
    const auto c = store.counters ();
    EXPECT_EQ (c.received, 4u);
    EXPECT_EQ (c.accepted, 2u);
    EXPECT_EQ (c.dropped, 2u);
}

TEST (StateStore, ReadersNeverSeeTornStates)
{
    LatestStateStore store;
    std::atomic<bool> done{false};
    std::atomic<std::uint64_t> reads{0};
    std::atomic<bool> torn{false};
    std::vector<std::thread> readers;
    for (int r = 0; r < 3; ++r)
        readers.emplace_back ([&] {
            std::uint32_t last = 0;
            while (!done)
            {
                const auto s = store.snapshot ();
                if (!s)
                    continue;
                // every field is derived from seq, so a mixed snapshot is detectable
                const double k = s->state.seq;
                if (s->state.pose.x != k || s->state.pose.y != -k || s->state.v != 2 * k ||
                    s->arrival_us != s->state.seq * 3ULL || s->state.seq < last)
                    torn = true;
                last = s->state.seq;
                ++reads;
            }
        });
    for (std::uint32_t i = 1; i <= 200000; ++i)
    {
        VehicleState s;
        s.seq = i;
        s.pose = {double (i), -double (i), 0.0};
        s.v = 2.0 * i;
        store.update (s, i * 3ULL);
    }
    done = true;
    for (auto& t : readers)
        t.join ();
    EXPECT_FALSE (torn);
    EXPECT_GT (reads.load (), 0u);
    EXPECT_EQ (store.snapshot ()->state.seq, 200000u);
}

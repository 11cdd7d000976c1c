#pragma once
/**
 * @file   event_loop.hpp
 * @brief  Single-threaded discrete-event scheduler on an integer microsecond clock.
 *
 * In fast mode the clock jumps from event to event. In real-time mode the
 * loop sleeps until each event's wall-clock instant, so the same scenario
 * wiring can be run paced or free-running. Events with equal timestamps run
 * in the order they were scheduled.
 */

#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <vector>

namespace hdt
{
    using Micros = std::int64_t;

    [[nodiscard]] constexpr Micros seconds_to_us (double s) noexcept
    {
        return static_cast<Micros> (s * 1e6 + (s >= 0 ? 0.5 : -0.5));
    }
    [[nodiscard]] constexpr double us_to_seconds (Micros us) noexcept { return static_cast<double> (us) * 1e-6; }

    class EventLoop
    {
    public:
        using Task = std::function<void ()>;

        explicit EventLoop (bool realtime = false) : realtime_ (realtime) {}

        [[nodiscard]] Micros now () const noexcept { return now_; }
        [[nodiscard]] bool realtime () const noexcept { return realtime_; }

        /// Events in the past are clamped to now().
        void at (Micros t, Task task);
        void after (Micros delay, Task task) { at (now_ + delay, std::move (task)); }

        /**
         * @brief Runs `task(k)` at start + round(k * 1e6 / hz) for k = 0, 1, ...
         *
         * Ticks are computed from k, not accumulated, so a 60 Hz timer does
         * not drift. Stops rescheduling once `task` returns false.
         */
        void every (double hz, Micros start, std::function<bool (std::int64_t)> task);

        /// Processes all events with t <= end, then sets now() = end.
        void run_until (Micros end);

        [[nodiscard]] std::size_t pending () const noexcept { return queue_.size (); }

    private:
        struct Event
        {
            Micros t;
            std::uint64_t order;
            Task task;
        };
        struct Later
        {
            bool operator() (const Event& a, const Event& b) const noexcept
            {
                return a.t != b.t ? a.t > b.t : a.order > b.order;
            }
        };

        void schedule_periodic (double hz, Micros start, std::int64_t k, std::shared_ptr<std::function<bool (std::int64_t)>> task);

        Micros now_{0};
        std::uint64_t next_order_{0};
        bool realtime_{false};
        std::priority_queue<Event, std::vector<Event>, Later> queue_;
    };

} // namespace hdt

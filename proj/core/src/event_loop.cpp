#include "hdt/event_loop.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace hdt
{
    void EventLoop::at (Micros t, Task task)
    {
        queue_.push (Event{t < now_ ? now_ : t, next_order_++, std::move (task)});
    }

    void EventLoop::every (double hz, Micros start, std::function<bool (std::int64_t)> task)
    {
        schedule_periodic (hz, start, 0, std::make_shared<std::function<bool (std::int64_t)>> (std::move (task)));
    }

    void EventLoop::schedule_periodic (double hz, Micros start, std::int64_t k,
                                       std::shared_ptr<std::function<bool (std::int64_t)>> task)
    {
        const auto t = start + static_cast<Micros> (std::llround (static_cast<double> (k) * 1e6 / hz));
        at (t, [this, hz, start, k, task] () {
            if ((*task) (k))
                schedule_periodic (hz, start, k + 1, task);
        });
    }

    void EventLoop::run_until (Micros end)
    {
        using Clock = std::chrono::steady_clock;
        const auto wall_origin = Clock::now () - std::chrono::microseconds (now_);

        while (!queue_.empty () && queue_.top ().t <= end)
        {
            // Copy out before pop: the task may schedule new events.
            Event ev = queue_.top ();
            queue_.pop ();
            if (realtime_)
                std::this_thread::sleep_until (wall_origin + std::chrono::microseconds (ev.t));
            now_ = ev.t;
            ev.task ();
        }
        if (realtime_)
            std::this_thread::sleep_until (wall_origin + std::chrono::microseconds (end));
        now_ = end;
    }

} // namespace hdt

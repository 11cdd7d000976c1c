#pragma once

#include "hdt/event_loop.hpp"
#include "hdt/impairment.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace hdt
{
    struct LinkStats
    {
        std::uint64_t sent{0};
        std::uint64_t lost{0};
        std::uint64_t delivered{0};
        std::uint64_t noise{0};
    };

    /**
     * @brief One direction of a simulated network hop on an EventLoop.
     *
     * Datagram mode (in_order = false) may reorder under jitter, like UDP.
     * Stream mode (in_order = true) never delivers out of order, like a TCP
     * connection: a late segment holds back everything behind it.
     */
    class ImpairedLink
    {
    public:
        using Receiver = std::function<void (const std::vector<std::uint8_t>&)>;

        ImpairedLink (EventLoop& loop, LinkImpairment cfg, std::uint64_t seed, Receiver receiver, bool in_order = false);
        ImpairedLink (const ImpairedLink&) = delete;
        ImpairedLink& operator= (const ImpairedLink&) = delete;
        ~ImpairedLink () { close (); }

        void send (std::vector<std::uint8_t> datagram);

        /// Drops everything still in flight and stops noise injection.
        void close ();

        [[nodiscard]] const LinkStats& stats () const noexcept { return stats_; }

    private:
        void schedule_noise ();

        EventLoop& loop_;
        ImpairmentModel model_;
        Receiver receiver_;
        bool in_order_;
        Micros last_arrival_{0};
        LinkStats stats_;
        std::shared_ptr<bool> alive_ = std::make_shared<bool> (true);
    };

} // namespace hdt

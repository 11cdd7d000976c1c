#pragma once
/**
 * @file   relay_server.hpp
 * @brief  Cloud relay process: TCP sessions with length-prefixed frames, a
 *         fixed-rate broadcast timer and a WebSocket JSON mirror for browser
 *         consoles.
 */

#include "hdt/relay_core.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace hdt
{
    struct RelayServerOptions
    {
        std::string bind_host{"127.0.0.1"};
        std::uint16_t tcp_port{0};               ///< 0 = ephemeral
        std::optional<std::uint16_t> ws_port{0}; ///< nullopt disables the WebSocket endpoint
        RelayConfig relay{};
        std::size_t max_queued_frames{512};      ///< per-session backlog before the session is dropped
    };

    class RelayServer
    {
    public:
        /// Called on the server thread after each broadcast has been queued.
        using BroadcastObserver = std::function<void (const Broadcast&)>;

        explicit RelayServer (RelayServerOptions options);
        ~RelayServer ();
        RelayServer (const RelayServer&) = delete;
        RelayServer& operator= (const RelayServer&) = delete;

        /// Binds both endpoints and starts the server thread. Throws std::runtime_error on bind failure.
        void start ();
        void stop ();

        /// Must be set before start().
        void set_broadcast_observer (BroadcastObserver observer);

        [[nodiscard]] std::uint16_t tcp_port () const noexcept;
        [[nodiscard]] std::uint16_t ws_port () const noexcept;
        [[nodiscard]] RelayStats stats () const;
        [[nodiscard]] std::size_t session_count () const;

    private:
        struct Impl;
        std::unique_ptr<Impl> impl_;
    };

} // namespace hdt

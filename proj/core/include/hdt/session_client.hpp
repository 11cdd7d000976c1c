#pragma once
/**
 * @file   session_client.hpp
 * @brief  Leader / user side of a relay session. Runs its own network
 *         thread; the local world never blocks on it.
 */

#include "hdt/session.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hdt
{
    struct SessionClientOptions
    {
        std::string host{"127.0.0.1"};
        std::uint16_t port{0};
        session::Role role{session::Role::User};
        std::uint32_t client_id{0};
        std::chrono::milliseconds backoff_initial{100};
        std::chrono::milliseconds backoff_max{2000};
    };

    struct SessionClientStats
    {
        std::uint64_t connects{0};
        std::uint64_t broadcasts{0};
        std::uint64_t stale_dropped{0};
        std::uint64_t controls{0};
        std::uint64_t ego_sent{0};
        std::uint64_t protocol_errors{0};
    };

    class SessionClient
    {
    public:
        /// Receives every non-stale GLOBAL_STATE along with its exact frame bytes (prefix included).
        using GlobalHandler = std::function<void (const session::GlobalWorldState&, const std::vector<std::uint8_t>& frame)>;
        using ControlHandler = std::function<void (const session::Control&)>;

        explicit SessionClient (SessionClientOptions options);
        ~SessionClient ();
        SessionClient (const SessionClient&) = delete;
        SessionClient& operator= (const SessionClient&) = delete;

        /// Handlers run on the client's network thread; set them before start().
        void on_global_state (GlobalHandler handler);
        void on_control (ControlHandler handler);

        void start ();
        void stop ();

        /// Queues an EGO_STATE upload. Dropped while disconnected. Thread-safe.
        void send_ego (std::vector<EntityState> entities);

        /// Round trip to the relay. Returns nullopt on timeout or while disconnected.
        [[nodiscard]] std::optional<session::Pong> ping (std::chrono::milliseconds timeout);

        [[nodiscard]] bool connected () const noexcept;
        /// Blocks until connected and joined or the timeout expires.
        bool wait_connected (std::chrono::milliseconds timeout) const;
        [[nodiscard]] SessionClientStats stats () const;
        [[nodiscard]] std::uint64_t last_seq () const;

    private:
        struct Impl;
        std::unique_ptr<Impl> impl_;
    };

} // namespace hdt

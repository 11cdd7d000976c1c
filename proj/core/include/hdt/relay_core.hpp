#pragma once
/**
 * @file   relay_core.hpp
 * @brief  Transport-independent relay logic: session registry, aggregation
 *         table and broadcast assembly. Both the TCP server and the
 *         virtual-time simulation drive this class.
 */

#include "hdt/session.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace hdt
{
    using SessionId = std::uint64_t;

    struct RelayConfig
    {
        double broadcast_hz{20.0};
        std::uint64_t staleness_us{300'000};
    };

    struct Outgoing
    {
        SessionId to{0};
        std::vector<std::uint8_t> frame;
    };

    /// The session must be closed; the string is the logged reason.
    struct CloseSession
    {
        std::string reason;
    };

    /// A message the relay itself does not consume: raw vehicle states and
    /// controls for entities no session owns. A relay that hosts a world
    /// handles these; a pure relay drops them.
    struct HostMessage
    {
        SessionId from{0};
        session::Message message;
    };

    using RelayAction = std::variant<Outgoing, CloseSession, HostMessage>;

    struct Broadcast
    {
        session::GlobalWorldState state;
        std::vector<std::uint8_t> frame; ///< identical bytes for every recipient
        std::vector<SessionId> recipients;
    };

    struct RelayStats
    {
        std::uint64_t broadcasts{0};
        std::uint64_t ego_updates{0};
        std::uint64_t pruned{0};
        std::uint64_t rejected_joins{0};
        std::uint64_t protocol_errors{0};
        std::uint64_t controls_routed{0};
        std::uint64_t controls_unrouted{0};
    };

    /**
     * @brief Relay state machine.
     *
     * Not thread-safe; callers serialize access (the TCP server runs it on a
     * single executor).
     */
    class RelayCore
    {
    public:
        explicit RelayCore (RelayConfig config = {});

        void on_connect (SessionId sid);

        /// Handles one decoded frame from a session.
        [[nodiscard]] std::vector<RelayAction> on_message (SessionId sid, const session::Message& msg, std::uint64_t now_us);

        /// Handles a decode failure: protocol error, close only that session.
        [[nodiscard]] RelayAction on_frame_error (SessionId sid, const session::FrameError& err);

        /// Removes the session and every entity it owns. Frees the leader slot if it was the leader.
        void on_disconnect (SessionId sid);

        /**
         * @brief Prunes stale entities, bumps the sequence number and encodes the broadcast.
         *
         * `hosted` are entities simulated by the relay itself; they are merged
         * into the table view and win on id collisions.
         */
        [[nodiscard]] Broadcast make_broadcast (std::uint64_t now_us, std::span<const EntityState> hosted = {});

        /// Routes a control message to the session that owns the target entity.
        [[nodiscard]] std::optional<Outgoing> route_control (const session::Control& control);

        [[nodiscard]] const RelayConfig& config () const noexcept { return config_; }
        [[nodiscard]] const RelayStats& stats () const noexcept { return stats_; }
        [[nodiscard]] std::optional<SessionId> leader () const noexcept { return leader_; }
        [[nodiscard]] std::size_t joined_count () const noexcept;
        [[nodiscard]] std::size_t entity_count () const noexcept { return table_.size (); }
        [[nodiscard]] std::uint64_t last_seq () const noexcept { return seq_; }
        [[nodiscard]] std::uint64_t leader_epoch () const noexcept { return epoch_; }

    private:
        struct SessionInfo
        {
            std::optional<session::Join> join;
        };

        struct Entry
        {
            EntityState state;
            SessionId owner{0};
            std::uint64_t updated_us{0};
        };

        RelayConfig config_;
        std::map<SessionId, SessionInfo> sessions_;
        std::map<std::uint32_t, Entry> table_;
        std::optional<SessionId> leader_;
        std::uint64_t seq_{0};
        std::uint64_t epoch_{0};
        RelayStats stats_;
    };

} // namespace hdt

#include "hdt/relay_core.hpp"

#include <spdlog/spdlog.h>

#include <stdexcept>

namespace hdt
{
    using namespace session;

    RelayCore::RelayCore (RelayConfig config) : config_ (config)
    {
        if (!(config_.broadcast_hz > 0.0))
            throw std::invalid_argument ("relay: broadcast rate must be positive");
    }

    void RelayCore::on_connect (SessionId sid) { sessions_.try_emplace (sid); }

    std::size_t RelayCore::joined_count () const noexcept
    {
        std::size_t n = 0;
        for (const auto& [sid, info] : sessions_)
            n += info.join.has_value () ? 1 : 0;
        return n;
    }

    RelayAction RelayCore::on_frame_error (SessionId sid, const FrameError& err)
    {
        ++stats_.protocol_errors;
        spdlog::warn ("relay: session {} protocol error: {}", sid, err.reason);
        return CloseSession{err.reason};
    }

    std::vector<RelayAction> RelayCore::on_message (SessionId sid, const Message& msg, std::uint64_t now_us)
    {
        std::vector<RelayAction> actions;
        auto it = sessions_.find (sid);
        if (it == sessions_.end ())
            it = sessions_.try_emplace (sid).first;
        auto& info = it->second;

        auto fail = [&] (std::string reason) {
            ++stats_.protocol_errors;
            spdlog::warn ("relay: session {} closed: {}", sid, reason);
            actions.emplace_back (CloseSession{std::move (reason)});
            return actions;
        };

        if (const auto* join = std::get_if<Join> (&msg))
        {
            if (info.join)
                return fail ("duplicate JOIN");
            for (const auto& [other, other_info] : sessions_)
                if (other_info.join && other_info.join->client_id == join->client_id)
                {
                    ++stats_.rejected_joins;
                    return fail ("client id " + std::to_string (join->client_id) + " already joined");
                }
            if (join->role == Role::Leader)
            {
                if (leader_)
                {
                    ++stats_.rejected_joins;
                    return fail ("leader slot taken");
                }
                leader_ = sid;
                ++epoch_;
            }
            info.join = *join;
            spdlog::info ("relay: session {} joined as {} id {}", sid, to_string (join->role), join->client_id);
            return actions;
        }

        if (!info.join)
            return fail ("message before JOIN");

        if (const auto* ego = std::get_if<EgoState> (&msg))
        {
            for (const auto& e : ego->entities)
            {
                auto [entry, inserted] = table_.try_emplace (e.id);
                if (!inserted && entry->second.owner != sid)
                    continue; // id owned by another session
                entry->second.state = e;
                entry->second.owner = sid;
                entry->second.updated_us = now_us;
                ++stats_.ego_updates;
            }
        }
        else if (const auto* ping = std::get_if<Ping> (&msg))
            actions.emplace_back (Outgoing{sid, encode_frame (Pong{ping->client_ts_us, now_us})});
        else if (const auto* control = std::get_if<Control> (&msg))
        {
            if (auto out = route_control (*control))
                actions.emplace_back (std::move (*out));
            else
                actions.emplace_back (HostMessage{sid, msg});
        }
        else if (std::holds_alternative<RawState> (msg))
            actions.emplace_back (HostMessage{sid, msg});
        else
            return fail ("unexpected message type from client");
        return actions;
    }

    void RelayCore::on_disconnect (SessionId sid)
    {
        if (sessions_.erase (sid) == 0)
            return;
        if (leader_ == sid)
            leader_.reset ();
        std::erase_if (table_, [sid] (const auto& kv) { return kv.second.owner == sid; });
    }

    Broadcast RelayCore::make_broadcast (std::uint64_t now_us, std::span<const EntityState> hosted)
    {
        stats_.pruned += std::erase_if (table_, [&] (const auto& kv) {
            return now_us > kv.second.updated_us && now_us - kv.second.updated_us > config_.staleness_us;
        });

        Broadcast b;
        b.state.broadcast_seq = ++seq_;
        b.state.server_timestamp_us = now_us;
        std::map<std::uint32_t, EntityState> merged;
        for (const auto& [id, entry] : table_)
            merged.emplace (id, entry.state);
        for (const auto& e : hosted)
            merged.insert_or_assign (e.id, e);
        b.state.vehicles.reserve (merged.size ());
        for (const auto& [id, e] : merged)
            b.state.vehicles.push_back (e);
        b.frame = encode_frame (b.state);
        for (const auto& [sid, info] : sessions_)
            if (info.join)
                b.recipients.push_back (sid);
        ++stats_.broadcasts;
        return b;
    }

    std::optional<Outgoing> RelayCore::route_control (const Control& control)
    {
        const auto it = table_.find (control.target);
        if (it == table_.end ())
        {
            ++stats_.controls_unrouted;
            return std::nullopt;
        }
        ++stats_.controls_routed;
        return Outgoing{it->second.owner, encode_frame (control)};
    }

} // namespace hdt

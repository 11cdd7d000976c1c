#include "hdt/session.hpp"

#include "le_bytes.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace hdt::session
{
    namespace
    {
        using detail::ByteReader;
        using detail::ByteWriter;

        void write_entity (ByteWriter& w, const EntityState& e)
        {
            w.u32 (e.id);
            w.u8 (static_cast<std::uint8_t> (e.kind));
            w.f64 (e.x);
            w.f64 (e.y);
            w.f64 (e.yaw);
            w.f64 (e.v);
            w.u64 (e.source_timestamp_us);
        }

        bool read_entity (ByteReader& r, EntityState& e)
        {
            e.id = r.u32 ();
            const auto kind = r.u8 ();
            e.x = r.f64 ();
            e.y = r.f64 ();
            e.yaw = r.f64 ();
            e.v = r.f64 ();
            e.source_timestamp_us = r.u64 ();
            if (kind > static_cast<std::uint8_t> (EntityKind::User))
                return false;
            e.kind = static_cast<EntityKind> (kind);
            return r.ok ();
        }

        void write_entities (ByteWriter& w, const std::vector<EntityState>& entities)
        {
            if (entities.size () > kMaxEntities)
                throw std::length_error ("session frame: too many entities");
            w.u16 (static_cast<std::uint16_t> (entities.size ()));
            for (const auto& e : entities)
                write_entity (w, e);
        }

        std::optional<std::vector<EntityState>> read_entities (ByteReader& r)
        {
            const auto count = r.u16 ();
            if (!r.ok () || r.remaining () != std::size_t{count} * kEntitySize)
                return std::nullopt;
            std::vector<EntityState> out (count);
            for (auto& e : out)
                if (!read_entity (r, e))
                    return std::nullopt;
            return out;
        }

        DecodeResult error (std::string reason) { return FrameError{std::move (reason)}; }
    } // namespace

    std::string_view to_string (Role r) noexcept { return r == Role::Leader ? "leader" : "user"; }

    can::ControlCommand Control::to_command () const noexcept
    {
        can::ControlCommand c;
        c.steer_deg = steer_deg;
        c.accel_mps2 = accel;
        c.brake_pct = brake;
        c.turn_left = turn_left;
        c.turn_right = turn_right;
        c.engage = engage;
        c.brake_light = brake_light;
        return c;
    }

    Control Control::from_command (std::uint32_t target, const can::ControlCommand& cmd) noexcept
    {
        return {target, cmd.steer_deg, cmd.accel_mps2, cmd.brake_pct, cmd.turn_left, cmd.turn_right, cmd.engage,
                cmd.brake_light, 0};
    }

    MsgType type_of (const Message& m) noexcept { return static_cast<MsgType> (m.index () + 1); }

    std::vector<std::uint8_t> encode_frame (const Message& m)
    {
        std::vector<std::uint8_t> out (kLengthPrefix, 0);
        ByteWriter w (out);
        w.u8 (static_cast<std::uint8_t> (type_of (m)));
        std::visit (
            [&] (const auto& msg) {
                using T = std::decay_t<decltype (msg)>;
                if constexpr (std::is_same_v<T, Join>)
                {
                    w.u8 (static_cast<std::uint8_t> (msg.role));
                    w.u32 (msg.client_id);
                }
                else if constexpr (std::is_same_v<T, EgoState>)
                    write_entities (w, msg.entities);
                else if constexpr (std::is_same_v<T, GlobalWorldState>)
                {
                    w.u64 (msg.broadcast_seq);
                    w.u64 (msg.server_timestamp_us);
                    write_entities (w, msg.vehicles);
                }
                else if constexpr (std::is_same_v<T, Ping>)
                    w.u64 (msg.client_ts_us);
                else if constexpr (std::is_same_v<T, Pong>)
                {
                    w.u64 (msg.client_ts_us);
                    w.u64 (msg.server_ts_us);
                }
                else if constexpr (std::is_same_v<T, Control>)
                {
                    w.u32 (msg.target);
                    w.f64 (msg.steer_deg);
                    w.f64 (msg.accel);
                    w.f64 (msg.brake);
                    w.u8 (static_cast<std::uint8_t> ((msg.turn_left ? 1U : 0U) | (msg.turn_right ? 2U : 0U) |
                                                     (msg.engage ? 4U : 0U) | (msg.brake_light ? 8U : 0U)));
                    w.u64 (msg.issued_us);
                }
                else
                {
                    if (msg.datagram.size () != wire::kStateSize)
                        throw std::length_error ("RAW_STATE: datagram must be a STATE packet");
                    out.insert (out.end (), msg.datagram.begin (), msg.datagram.end ());
                }
            },
            m);
        detail::put_le (out.data (), static_cast<std::uint32_t> (out.size () - kLengthPrefix));
        return out;
    }

    DecodeResult decode_body (std::span<const std::uint8_t> body) noexcept
    {
        try
        {
            if (body.empty ())
                return error ("empty body");
            ByteReader r (body.subspan (1));
            switch (body[0])
            {
            case static_cast<std::uint8_t> (MsgType::Join): {
                const auto role = r.u8 ();
                const auto id = r.u32 ();
                if (!r.ok () || r.remaining () != 0)
                    return error ("JOIN: bad length");
                if (role != 1 && role != 2)
                    return error ("JOIN: unknown role");
                return Message{Join{static_cast<Role> (role), id}};
            }
            case static_cast<std::uint8_t> (MsgType::EgoState): {
                auto entities = read_entities (r);
                if (!entities)
                    return error ("EGO_STATE: malformed entity list");
                return Message{EgoState{std::move (*entities)}};
            }
            case static_cast<std::uint8_t> (MsgType::GlobalState): {
                GlobalWorldState g;
                g.broadcast_seq = r.u64 ();
                g.server_timestamp_us = r.u64 ();
                auto entities = read_entities (r);
                if (!entities)
                    return error ("GLOBAL_STATE: malformed entity list");
                g.vehicles = std::move (*entities);
                return Message{std::move (g)};
            }
            case static_cast<std::uint8_t> (MsgType::Ping): {
                const auto ts = r.u64 ();
                if (!r.ok () || r.remaining () != 0)
                    return error ("PING: bad length");
                return Message{Ping{ts}};
            }
            case static_cast<std::uint8_t> (MsgType::Pong): {
                Pong p;
                p.client_ts_us = r.u64 ();
                p.server_ts_us = r.u64 ();
                if (!r.ok () || r.remaining () != 0)
                    return error ("PONG: bad length");
                return Message{p};
            }
            case static_cast<std::uint8_t> (MsgType::Control): {
                Control c;
                c.target = r.u32 ();
                c.steer_deg = r.f64 ();
                c.accel = r.f64 ();
                c.brake = r.f64 ();
                const auto flags = r.u8 ();
                c.issued_us = r.u64 ();
                if (!r.ok () || r.remaining () != 0)
                    return error ("CONTROL: bad length");
                if (flags & 0xF0U)
                    return error ("CONTROL: reserved flag bits set");
                c.turn_left = flags & 1U;
                c.turn_right = flags & 2U;
                c.engage = flags & 4U;
                c.brake_light = flags & 8U;
                return Message{c};
            }
            case static_cast<std::uint8_t> (MsgType::RawState): {
                if (body.size () != 1 + wire::kStateSize)
                    return error ("RAW_STATE: bad length");
                return Message{RawState{std::vector<std::uint8_t> (body.begin () + 1, body.end ())}};
            }
            default: return error ("unknown message type " + std::to_string (body[0]));
            }
        }
        catch (const std::exception& e)
        {
            return error (e.what ());
        }
    }

    void FrameDecoder::feed (std::span<const std::uint8_t> bytes)
    {
        if (failed_)
            return;
        if (read_ > 0 && read_ == buffer_.size ())
        {
            buffer_.clear ();
            read_ = 0;
        }
        else if (read_ > 4096 && read_ * 2 > buffer_.size ())
        {
            buffer_.erase (buffer_.begin (), buffer_.begin () + static_cast<std::ptrdiff_t> (read_));
            read_ = 0;
        }
        buffer_.insert (buffer_.end (), bytes.begin (), bytes.end ());
    }

    std::optional<DecodeResult> FrameDecoder::next ()
    {
        if (failed_ || buffered () < kLengthPrefix)
            return std::nullopt;
        const auto length = detail::get_le<std::uint32_t> (buffer_.data () + read_);
        if (length == 0 || length > kMaxBody)
        {
            failed_ = true;
            return DecodeResult{FrameError{"frame length " + std::to_string (length) + " out of range"}};
        }
        if (buffered () < kLengthPrefix + length)
            return std::nullopt;
        const std::span<const std::uint8_t> body (buffer_.data () + read_ + kLengthPrefix, length);
        read_ += kLengthPrefix + length;
        auto result = decode_body (body);
        if (std::holds_alternative<FrameError> (result))
            failed_ = true;
        return result;
    }

    std::uint64_t fnv1a (std::span<const std::uint8_t> bytes) noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto b : bytes)
        {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::string to_json (const GlobalWorldState& g)
    {
        nlohmann::ordered_json j;
        j["type"] = "global_state";
        j["seq"] = g.broadcast_seq;
        j["server_ts"] = g.server_timestamp_us;
        auto& vehicles = j["vehicles"] = nlohmann::ordered_json::array ();
        for (const auto& e : g.vehicles)
            vehicles.push_back ({{"id", e.id},
                                 {"kind", to_string (e.kind)},
                                 {"x", e.x},
                                 {"y", e.y},
                                 {"yaw", e.yaw},
                                 {"v", e.v},
                                 {"source_ts", e.source_timestamp_us}});
        return j.dump ();
    }

    std::string to_json (const Control& c)
    {
        nlohmann::ordered_json j;
        j["type"] = "control";
        j["target"] = c.target;
        j["steer_deg"] = c.steer_deg;
        j["accel"] = c.accel;
        j["brake"] = c.brake;
        j["turn_left"] = c.turn_left;
        j["turn_right"] = c.turn_right;
        j["engage"] = c.engage;
        return j.dump ();
    }

    std::variant<Control, FrameError> control_from_json (std::string_view text)
    {
        const auto j = nlohmann::json::parse (text, nullptr, false);
        if (j.is_discarded () || !j.is_object ())
            return FrameError{"control: not a JSON object"};
        if (j.value ("type", std::string{}) != "control")
            return FrameError{"control: type must be \"control\""};
        const auto target = j.find ("target");
        if (target == j.end () || !target->is_number_unsigned () || target->get<std::uint64_t> () > 0xFFFFFFFFULL)
            return FrameError{"control: missing or invalid target"};

        Control c;
        c.target = target->get<std::uint32_t> ();
        auto number = [&] (const char* key, double& out) {
            const auto it = j.find (key);
            if (it == j.end ())
                return true;
            if (!it->is_number ())
                return false;
            out = it->get<double> ();
            return std::isfinite (out);
        };
        auto flag = [&] (const char* key, bool& out) {
            const auto it = j.find (key);
            if (it == j.end ())
                return true;
            if (!it->is_boolean ())
                return false;
            out = it->get<bool> ();
            return true;
        };
        if (!number ("steer_deg", c.steer_deg) || !number ("accel", c.accel) || !number ("brake", c.brake))
            return FrameError{"control: numeric field invalid"};
        if (!flag ("turn_left", c.turn_left) || !flag ("turn_right", c.turn_right) || !flag ("engage", c.engage))
            return FrameError{"control: flag field invalid"};
        c.brake_light = c.brake > 0.0;
        return c;
    }

} // namespace hdt::session

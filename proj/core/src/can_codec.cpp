#include "hdt/can_codec.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace hdt::can
{
    namespace
    {
        using nlohmann::json;

        // Signal names the codec knows how to source from a ControlCommand.
        const std::set<std::string, std::less<>> kKnownSignals{
            "IECU_Flag", "Steer_Valid", "Steer_AngleCmd", "Speed_Valid", "WorkMode", "Gear",
            "AccelCmd",  "Brake_Valid", "BrakeCmd",       "TurnLeft",    "TurnRight", "BrakeLight"};

        double signal_value (const ControlCommand& c, std::string_view name)
        {
            auto flag = [] (bool b) { return b ? 1.0 : 0.0; };
            if (name == "IECU_Flag") return flag (c.engage);
            if (name == "Steer_Valid") return flag (c.steer_valid);
            if (name == "Steer_AngleCmd") return c.steer_deg;
            if (name == "Speed_Valid") return flag (c.speed_valid);
            if (name == "WorkMode") return static_cast<double> (c.work_mode);
            if (name == "Gear") return static_cast<double> (c.gear);
            if (name == "AccelCmd") return c.accel_mps2;
            if (name == "Brake_Valid") return flag (c.brake_valid);
            if (name == "BrakeCmd") return c.brake_pct;
            if (name == "TurnLeft") return flag (c.turn_left);
            if (name == "TurnRight") return flag (c.turn_right);
            if (name == "BrakeLight") return flag (c.brake_light);
            throw ConfigError ("unknown signal '" + std::string (name) + "'");
        }

        SignalSpec flag_signal (std::string name, std::uint8_t start_bit, std::uint8_t len = 8)
        {
            const double max = len >= 8 ? 255.0 : static_cast<double> ((1U << len) - 1);
            return {std::move (name), static_cast<std::uint8_t> (start_bit / 8), start_bit, len, 0.0, 1.0, 0.0, max};
        }

        std::uint32_t parse_id (const json& j)
        {
            if (j.is_number_unsigned ())
                return j.get<std::uint32_t> ();
            if (j.is_string ())
            {
                const auto s = j.get<std::string> ();
                std::size_t used = 0;
                unsigned long v = 0;
                try
                {
                    v = std::stoul (s, &used, 0);
                }
                catch (const std::exception&)
                {
                    used = 0;
                }
                if (used == 0 || used != s.size () || v > 0xFFFFFFFFUL)
                    throw ConfigError ("bad can_id '" + s + "'");
                return static_cast<std::uint32_t> (v);
            }
            throw ConfigError ("can_id must be an unsigned number or a string");
        }

        std::string hex_id (std::uint32_t id)
        {
            char buf[16];
            std::snprintf (buf, sizeof buf, "0x%03X", id);
            return buf;
        }
    } // namespace

    CommunicationMatrix::CommunicationMatrix (std::vector<MessageSpec> messages) : messages_ (std::move (messages))
    {
        std::set<std::uint32_t> ids;
        std::set<std::string> signal_names;
        for (const auto& m : messages_)
        {
            if (m.can_id > kMaxStandardCanId)
                throw ConfigError ("message " + m.name + ": identifier exceeds 11 bits");
            if (!ids.insert (m.can_id).second)
                throw ConfigError ("message " + m.name + ": duplicate identifier " + hex_id (m.can_id));

            std::uint64_t used_bits = 0;
            for (const auto& s : m.signals)
            {
                const std::string where = m.name + "." + s.name;
                if (!kKnownSignals.contains (s.name))
                    throw ConfigError (where + ": unknown signal name");
                if (!signal_names.insert (s.name).second)
                    throw ConfigError (where + ": signal defined twice");
                if (s.bit_length == 0 || s.bit_length > 32 || s.start_bit + s.bit_length > 64)
                    throw ConfigError (where + ": does not fit in the 8-byte payload");
                if (s.start_bit / 8 != s.start_byte)
                    throw ConfigError (where + ": start_byte disagrees with start_bit");
                if (!(s.scale > 0.0) || !std::isfinite (s.offset))
                    throw ConfigError (where + ": scale must be positive and offset finite");
                if (!(s.min_physical <= s.max_physical))
                    throw ConfigError (where + ": empty physical range");
                const std::uint64_t mask = ((s.bit_length == 64) ? ~0ULL : ((1ULL << s.bit_length) - 1)) << s.start_bit;
                if (used_bits & mask)
                    throw ConfigError (where + ": overlaps another signal");
                used_bits |= mask;
            }
        }
    }

    const CommunicationMatrix& CommunicationMatrix::default_matrix ()
    {
        static const CommunicationMatrix matrix ({
            {"IECU_Flag", 0x501, {flag_signal ("IECU_Flag", 0)}},
            {"IECU_Steer", 0x502,
             {flag_signal ("Steer_Valid", 0), {"Steer_AngleCmd", 4, 32, 16, -30.0, 0.001, -30.0, 30.0}}},
            {"IECU_Speed", 0x503,
             {flag_signal ("Speed_Valid", 0), flag_signal ("WorkMode", 16), flag_signal ("Gear", 24),
              {"AccelCmd", 4, 32, 8, -5.0, 0.05, -5.0, 5.0}}},
            {"IECU_Brake", 0x504, {flag_signal ("Brake_Valid", 0), {"BrakeCmd", 1, 8, 8, 0.0, 1.0, 0.0, 100.0}}},
            {"Light_Flag", 0x505, {flag_signal ("TurnLeft", 0, 1), flag_signal ("TurnRight", 1, 1), flag_signal ("BrakeLight", 8)}},
        });
        return matrix;
    }

    CommunicationMatrix CommunicationMatrix::from_json_text (std::string_view text)
    {
        json doc;
        try
        {
            doc = json::parse (text);
        }
        catch (const json::parse_error& e)
        {
            throw ConfigError (std::string ("communication matrix: ") + e.what ());
        }

        try
        {
            std::vector<MessageSpec> messages;
            for (const auto& jm : doc.at ("messages"))
            {
                MessageSpec m;
                m.name = jm.at ("name").get<std::string> ();
                m.can_id = parse_id (jm.at ("can_id"));
                for (const auto& js : jm.at ("signals"))
                {
                    SignalSpec s;
                    s.name = js.at ("name").get<std::string> ();
                    s.start_bit = js.at ("start_bit").get<std::uint8_t> ();
                    s.start_byte = js.value ("start_byte", static_cast<std::uint8_t> (s.start_bit / 8));
                    s.bit_length = js.at ("length").get<std::uint8_t> ();
                    s.offset = js.value ("offset", 0.0);
                    s.scale = js.value ("scale", 1.0);
                    const double raw_span = static_cast<double> (s.max_raw ()) * s.scale;
                    s.min_physical = js.value ("min", s.offset);
                    s.max_physical = js.value ("max", s.offset + raw_span);
                    if (js.contains ("type"))
                    {
                        const auto type = js.at ("type").get<std::string> ();
                        if (type != "uint" + std::to_string (s.bit_length))
                            throw ConfigError (m.name + "." + s.name + ": type " + type + " disagrees with length");
                    }
                    m.signals.push_back (std::move (s));
                }
                messages.push_back (std::move (m));
            }
            return CommunicationMatrix (std::move (messages));
        }
        catch (const json::exception& e)
        {
            throw ConfigError (std::string ("communication matrix: ") + e.what ());
        }
    }

    CommunicationMatrix CommunicationMatrix::load_file (const std::string& path)
    {
        std::ifstream in (path);
        if (!in)
            throw ConfigError ("cannot open communication matrix '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf ();
        return from_json_text (ss.str ());
    }

    std::string CommunicationMatrix::to_json_text () const
    {
        json doc;
        doc["messages"] = json::array ();
        for (const auto& m : messages_)
        {
            json jm{{"name", m.name}, {"can_id", hex_id (m.can_id)}, {"signals", json::array ()}};
            for (const auto& s : m.signals)
                jm["signals"].push_back ({{"name", s.name},
                                          {"start_byte", s.start_byte},
                                          {"start_bit", s.start_bit},
                                          {"length", s.bit_length},
                                          {"type", "uint" + std::to_string (s.bit_length)},
                                          {"offset", s.offset},
                                          {"scale", s.scale},
                                          {"min", s.min_physical},
                                          {"max", s.max_physical}});
            doc["messages"].push_back (std::move (jm));
        }
        return doc.dump (2);
    }

    const MessageSpec* CommunicationMatrix::find (std::uint32_t can_id) const noexcept
    {
        const auto it = std::find_if (messages_.begin (), messages_.end (), [&] (const auto& m) { return m.can_id == can_id; });
        return it == messages_.end () ? nullptr : &*it;
    }

    const MessageSpec* CommunicationMatrix::find (std::string_view name) const noexcept
    {
        const auto it = std::find_if (messages_.begin (), messages_.end (), [&] (const auto& m) { return m.name == name; });
        return it == messages_.end () ? nullptr : &*it;
    }

    const SignalSpec* CommunicationMatrix::find_signal (std::string_view signal) const noexcept
    {
        for (const auto& m : messages_)
            for (const auto& s : m.signals)
                if (s.name == signal)
                    return &s;
        return nullptr;
    }

    std::uint64_t quantize (double physical, const SignalSpec& spec)
    {
        if (!std::isfinite (physical))
            throw std::invalid_argument ("quantize: non-finite value for " + spec.name);
        const double p = std::clamp (physical, spec.min_physical, spec.max_physical);
        const double r = std::round ((p - spec.offset) / spec.scale); // half away from zero
        if (r <= 0.0)
            return 0;
        const auto max = static_cast<double> (spec.max_raw ());
        return r >= max ? spec.max_raw () : static_cast<std::uint64_t> (r);
    }

    double dequantize (std::uint64_t raw, const SignalSpec& spec) noexcept
    {
        return static_cast<double> (raw) * spec.scale + spec.offset;
    }

    void insert_bits (std::span<std::uint8_t, 8> payload, unsigned start_bit, unsigned length, std::uint64_t raw) noexcept
    {
        for (unsigned i = 0; i < length; ++i)
        {
            const unsigned bit = start_bit + i;
            const auto mask = static_cast<std::uint8_t> (1U << (bit % 8));
            if ((raw >> i) & 1U)
                payload[bit / 8] |= mask;
            else
                payload[bit / 8] &= static_cast<std::uint8_t> (~mask);
        }
    }

    std::uint64_t extract_bits (std::span<const std::uint8_t, 8> payload, unsigned start_bit, unsigned length) noexcept
    {
        std::uint64_t raw = 0;
        for (unsigned i = 0; i < length; ++i)
        {
            const unsigned bit = start_bit + i;
            if ((payload[bit / 8] >> (bit % 8)) & 1U)
                raw |= std::uint64_t{1} << i;
        }
        return raw;
    }

    std::vector<CanFrame> encode_command (const ControlCommand& cmd, const CommunicationMatrix& matrix)
    {
        for (double f : {cmd.steer_deg, cmd.accel_mps2, cmd.brake_pct})
            if (!std::isfinite (f))
                throw std::invalid_argument ("encode_command: non-finite command field");

        std::vector<CanFrame> frames;
        frames.reserve (matrix.messages ().size ());
        for (const auto& m : matrix.messages ())
        {
            CanFrame frame;
            frame.can_id = m.can_id;
            frame.dlc = 8;
            for (const auto& s : m.signals)
                insert_bits (frame.data, s.start_bit, s.bit_length, quantize (signal_value (cmd, s.name), s));
            frames.push_back (frame);
        }
        return frames;
    }

    std::string_view to_string (FrameRejection r) noexcept
    {
        switch (r)
        {
        case FrameRejection::UnknownId: return "UnknownId";
        case FrameRejection::BadLength: return "BadLength";
        }
        return "Unknown";
    }

    std::variant<DecodedFrame, FrameRejection> decode_frame (const CanFrame& frame, const CommunicationMatrix& matrix)
    {
        const auto* m = matrix.find (frame.can_id);
        if (m == nullptr)
            return FrameRejection::UnknownId;
        if (frame.dlc != 8)
            return FrameRejection::BadLength;

        DecodedFrame out;
        out.message = m->name;
        out.can_id = m->can_id;
        for (const auto& s : m->signals)
            out.signals[s.name] = dequantize (extract_bits (frame.data, s.start_bit, s.bit_length), s);
        return out;
    }

    std::string payload_hex (const CanFrame& frame)
    {
        std::string out;
        char buf[4];
        for (std::size_t i = 0; i < frame.data.size (); ++i)
        {
            std::snprintf (buf, sizeof buf, "%02X", frame.data[i]);
            if (i)
                out += ' ';
            out += buf;
        }
        return out;
    }

} // namespace hdt::can

#include "hdt/wire.hpp"

#include "le_bytes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hdt::wire
{
    namespace
    {
        using detail::get_f64;
        using detail::get_le;
        using detail::put_f64;
        using detail::put_le;

        void write_header (std::uint8_t* out, MsgType type) noexcept
        {
            std::copy (kMagic.begin (), kMagic.end (), out);
            out[4] = kVersion;
            out[5] = static_cast<std::uint8_t> (type);
            out[6] = 0;
            out[7] = 0;
        }

        std::size_t expected_size (MsgType type) noexcept
        {
            switch (type)
            {
            case MsgType::State: return kStateSize;
            case MsgType::Command: return kCommandSize;
            case MsgType::Probe:
            case MsgType::ProbeEcho: return kProbeSize;
            }
            return 0;
        }
    } // namespace

    std::string_view to_string (RejectReason r) noexcept
    {
        switch (r)
        {
        case RejectReason::BadMagic: return "BadMagic";
        case RejectReason::BadVersion: return "BadVersion";
        case RejectReason::BadType: return "BadType";
        case RejectReason::BadLength: return "BadLength";
        case RejectReason::BadPayload: return "BadPayload";
        }
        return "Unknown";
    }

    std::array<std::uint8_t, kStateSize> encode_state (const VehicleState& s)
    {
        for (double f : {s.pose.x, s.pose.y, s.pose.theta, s.v, s.omega})
            if (!std::isfinite (f))
                throw std::invalid_argument ("encode_state: non-finite field");

        std::array<std::uint8_t, kStateSize> out{};
        write_header (out.data (), MsgType::State);
        put_le (out.data () + 8, s.timestamp_us);
        put_f64 (out.data () + 16, s.pose.x);
        put_f64 (out.data () + 24, s.pose.y);
        put_f64 (out.data () + 32, s.pose.theta);
        put_f64 (out.data () + 40, s.v);
        put_f64 (out.data () + 48, s.omega);
        put_le (out.data () + 56, s.seq);
        return out;
    }

    std::array<std::uint8_t, kCommandSize> encode_command_frame (const CanFrame& frame)
    {
        if (frame.dlc > 8)
            throw std::invalid_argument ("encode_command_frame: dlc above 8");
        if (frame.can_id > kMaxStandardCanId)
            throw std::invalid_argument ("encode_command_frame: identifier exceeds 11 bits");

        std::array<std::uint8_t, kCommandSize> out{};
        write_header (out.data (), MsgType::Command);
        put_le (out.data () + 8, frame.can_id);
        out[12] = frame.dlc;
        std::copy (frame.data.begin (), frame.data.end (), out.begin () + 13);
        return out;
    }

    std::array<std::uint8_t, kProbeSize> encode_probe (const ProbePacket& probe)
    {
        std::array<std::uint8_t, kProbeSize> out{};
        write_header (out.data (), probe.echo ? MsgType::ProbeEcho : MsgType::Probe);
        put_le (out.data () + 8, probe.probe_id);
        put_le (out.data () + 12, probe.send_time_us);
        return out;
    }

    Decoded decode_datagram (std::span<const std::uint8_t> bytes) noexcept
    {
        // Marker check first: anything that is not ours is filtered as cheaply as possible.
        if (bytes.size () < kMagic.size () || !std::equal (kMagic.begin (), kMagic.end (), bytes.begin ()))
            return Rejection{RejectReason::BadMagic};
        if (bytes.size () < kHeaderSize)
            return Rejection{RejectReason::BadLength};
        if (bytes[4] != kVersion || bytes[6] != 0 || bytes[7] != 0)
            return Rejection{RejectReason::BadVersion};
        if (bytes[5] < 1 || bytes[5] > 4)
            return Rejection{RejectReason::BadType};

        const auto type = static_cast<MsgType> (bytes[5]);
        if (bytes.size () != expected_size (type))
            return Rejection{RejectReason::BadLength};

        const std::uint8_t* p = bytes.data ();
        switch (type)
        {
        case MsgType::State: {
            VehicleState s;
            s.timestamp_us = get_le<std::uint64_t> (p + 8);
            s.pose.x = get_f64 (p + 16);
            s.pose.y = get_f64 (p + 24);
            s.pose.theta = get_f64 (p + 32);
            s.v = get_f64 (p + 40);
            s.omega = get_f64 (p + 48);
            s.seq = get_le<std::uint32_t> (p + 56);
            for (double f : {s.pose.x, s.pose.y, s.pose.theta, s.v, s.omega})
                if (!std::isfinite (f))
                    return Rejection{RejectReason::BadPayload};
            return s;
        }
        case MsgType::Command: {
            CanFrame f;
            f.can_id = get_le<std::uint32_t> (p + 8);
            f.dlc = p[12];
            if (f.can_id > kMaxStandardCanId || f.dlc > 8 || std::any_of (p + 21, p + 25, [] (auto b) { return b != 0; }))
                return Rejection{RejectReason::BadPayload};
            std::copy (p + 13, p + 21, f.data.begin ());
            return f;
        }
        case MsgType::Probe:
        case MsgType::ProbeEcho: {
            ProbePacket probe;
            probe.probe_id = get_le<std::uint32_t> (p + 8);
            probe.send_time_us = get_le<std::uint64_t> (p + 12);
            probe.echo = type == MsgType::ProbeEcho;
            return probe;
        }
        }
        return Rejection{RejectReason::BadType};
    }

} // namespace hdt::wire

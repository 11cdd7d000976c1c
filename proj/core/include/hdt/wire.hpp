#pragma once
/**
 * @file   wire.hpp
 * @brief  Marker-framed datagram format of the vehicle <-> workstation link.
 *
 * Every datagram starts with an 8-byte header:
 *
 *   off  size  field
 *   0    4     magic "HDT1"
 *   4    1     version (1)
 *   5    1     msg_type (1 STATE, 2 COMMAND, 3 PROBE, 4 PROBE_ECHO)
 *   6    2     reserved, zero
 *
 * STATE (60 bytes): timestamp_us u64, x, y, yaw, v, omega f64, seq u32.
 * COMMAND (25 bytes): can_id u32, length u8, payload[8].
 * PROBE / PROBE_ECHO (20 bytes): probe_id u32, send_time_us u64.
 *
 * All multi-byte fields are little-endian; doubles are IEEE-754 binary64.
 */

#include "hdt/can_frame.hpp"
#include "hdt/kinematics.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace hdt::wire
{
    inline constexpr std::array<std::uint8_t, 4> kMagic{'H', 'D', 'T', '1'};
    inline constexpr std::uint8_t kVersion = 1;

    inline constexpr std::size_t kHeaderSize = 8;
    inline constexpr std::size_t kStateSize = 60;
    inline constexpr std::size_t kCommandSize = 25;
    inline constexpr std::size_t kProbeSize = 20;
    /// Upper bound for any datagram produced by this format.
    inline constexpr std::size_t kMaxDatagram = 64;

    enum class MsgType : std::uint8_t
    {
        State = 1,
        Command = 2,
        Probe = 3,
        ProbeEcho = 4,
    };

    enum class RejectReason
    {
        BadMagic,
        BadVersion, ///< unknown version or non-zero reserved bytes
        BadType,    ///< unknown msg_type
        BadLength,
        BadPayload, ///< header fine, body fields invalid (non-finite, bad CAN length/id)
    };

    [[nodiscard]] std::string_view to_string (RejectReason r) noexcept;

    /// Header-level rejections are what the receiver counts as filtered noise.
    [[nodiscard]] constexpr bool is_header_rejection (RejectReason r) noexcept
    {
        return r == RejectReason::BadMagic || r == RejectReason::BadVersion || r == RejectReason::BadType;
    }

    struct Rejection
    {
        RejectReason reason;
    };

    struct ProbePacket
    {
        std::uint32_t probe_id{0};
        std::uint64_t send_time_us{0};
        bool echo{false};

        friend bool operator== (const ProbePacket&, const ProbePacket&) = default;
    };

    using Datagram = std::vector<std::uint8_t>;
    using Decoded = std::variant<Rejection, VehicleState, CanFrame, ProbePacket>;

    /// Throws std::invalid_argument if any kinematic field is non-finite.
    [[nodiscard]] std::array<std::uint8_t, kStateSize> encode_state (const VehicleState& state);
    /// Throws std::invalid_argument on a dlc above 8 or an id outside 11 bits.
    [[nodiscard]] std::array<std::uint8_t, kCommandSize> encode_command_frame (const CanFrame& frame);
    [[nodiscard]] std::array<std::uint8_t, kProbeSize> encode_probe (const ProbePacket& probe);

    /// Never throws; anything that does not validate comes back as a Rejection.
    [[nodiscard]] Decoded decode_datagram (std::span<const std::uint8_t> bytes) noexcept;

    template <std::size_t N> [[nodiscard]] Datagram to_datagram (const std::array<std::uint8_t, N>& a)
    {
        return Datagram (a.begin (), a.end ());
    }

} // namespace hdt::wire

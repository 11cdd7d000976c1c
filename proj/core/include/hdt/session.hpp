#pragma once
/**
 * @file   session.hpp
 * @brief  Relay session protocol: length-prefixed binary frames over TCP and
 *         the JSON mirror spoken on the WebSocket endpoint.
 *
 * Frame: u32 LE body length, then the body = type byte + payload.
 *
 *   type  name          payload
 *   1     JOIN          role u8 (1 leader, 2 user), client id u32
 *   2     EGO_STATE     count u16, count x entity
 *   3     GLOBAL_STATE  broadcast_seq u64, server_ts_us u64, count u16, count x entity
 *   4     PING          client_ts_us u64
 *   5     PONG          client_ts_us u64, server_ts_us u64
 *   6     CONTROL       target u32, steer_deg f64, accel f64, brake f64, flags u8, issued_us u64
 *   7     RAW_STATE     one gateway STATE datagram, verbatim (60 bytes)
 *
 * entity (45 bytes): id u32, kind u8, x f64, y f64, yaw f64, v f64, source_ts_us u64
 * CONTROL flags: bit0 turn_left, bit1 turn_right, bit2 engage, bit3 brake_light.
 */

#include "hdt/can_codec.hpp"
#include "hdt/entity.hpp"
#include "hdt/wire.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hdt::session
{
    inline constexpr std::size_t kLengthPrefix = 4;
    inline constexpr std::size_t kEntitySize = 45;
    inline constexpr std::size_t kMaxBody = 1U << 20;
    inline constexpr std::size_t kMaxEntities = 0xFFFF;

    enum class MsgType : std::uint8_t
    {
        Join = 1,
        EgoState = 2,
        GlobalState = 3,
        Ping = 4,
        Pong = 5,
        Control = 6,
        RawState = 7,
    };

    enum class Role : std::uint8_t
    {
        Leader = 1,
        User = 2,
    };

    [[nodiscard]] std::string_view to_string (Role r) noexcept;

    struct Join
    {
        Role role{Role::User};
        std::uint32_t client_id{0};

        friend bool operator== (const Join&, const Join&) = default;
    };

    struct EgoState
    {
        std::vector<EntityState> entities;

        friend bool operator== (const EgoState&, const EgoState&) = default;
    };

    struct GlobalWorldState
    {
        std::uint64_t broadcast_seq{0};
        std::uint64_t server_timestamp_us{0};
        std::vector<EntityState> vehicles; ///< sorted by id, ids unique

        friend bool operator== (const GlobalWorldState&, const GlobalWorldState&) = default;
    };

    struct Ping
    {
        std::uint64_t client_ts_us{0};

        friend bool operator== (const Ping&, const Ping&) = default;
    };

    struct Pong
    {
        std::uint64_t client_ts_us{0};
        std::uint64_t server_ts_us{0};

        friend bool operator== (const Pong&, const Pong&) = default;
    };

    struct Control
    {
        std::uint32_t target{0};
        double steer_deg{0.0};
        double accel{0.0};
        double brake{0.0};
        bool turn_left{false};
        bool turn_right{false};
        bool engage{false};
        bool brake_light{false};
        std::uint64_t issued_us{0}; ///< when the command was issued at its origin, 0 if unknown

        friend bool operator== (const Control&, const Control&) = default;

        [[nodiscard]] can::ControlCommand to_command () const noexcept;
        [[nodiscard]] static Control from_command (std::uint32_t target, const can::ControlCommand& cmd) noexcept;
    };

    /// Vehicle state forwarded unprocessed to a relay that hosts the world itself.
    struct RawState
    {
        std::vector<std::uint8_t> datagram;

        friend bool operator== (const RawState&, const RawState&) = default;
    };

    using Message = std::variant<Join, EgoState, GlobalWorldState, Ping, Pong, Control, RawState>;

    struct FrameError
    {
        std::string reason;
    };

    using DecodeResult = std::variant<Message, FrameError>;

    [[nodiscard]] MsgType type_of (const Message& m) noexcept;

    /// Complete frame including the length prefix. Throws std::length_error above kMaxEntities.
    [[nodiscard]] std::vector<std::uint8_t> encode_frame (const Message& m);

    /// Decodes one body (type byte + payload, no length prefix).
    [[nodiscard]] DecodeResult decode_body (std::span<const std::uint8_t> body) noexcept;

    /**
     * @brief Incremental splitter for a TCP byte stream.
     *
     * After the first error the decoder stays failed; the session that owns
     * it is expected to close.
     */
    class FrameDecoder
    {
    public:
        void feed (std::span<const std::uint8_t> bytes);

        /// Next complete frame, or nullopt if more bytes are needed.
        [[nodiscard]] std::optional<DecodeResult> next ();

        [[nodiscard]] bool failed () const noexcept { return failed_; }
        [[nodiscard]] std::size_t buffered () const noexcept { return buffer_.size () - read_; }

    private:
        std::vector<std::uint8_t> buffer_;
        std::size_t read_{0};
        bool failed_{false};
    };

    /// 64-bit FNV-1a.
    [[nodiscard]] std::uint64_t fnv1a (std::span<const std::uint8_t> bytes) noexcept;

    /// {"type":"global_state","seq":N,"server_ts":..,"vehicles":[{"id":..,"kind":"shadow",...}]}
    [[nodiscard]] std::string to_json (const GlobalWorldState& g);

    /// Parses a cockpit control message. Missing numeric fields default to 0, flags to false.
    [[nodiscard]] std::variant<Control, FrameError> control_from_json (std::string_view text);

    [[nodiscard]] std::string to_json (const Control& c);

} // namespace hdt::session

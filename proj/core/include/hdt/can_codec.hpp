#pragma once
/**
 * @file   can_codec.hpp
 * @brief  Command-to-CAN conversion: communication matrix, signal
 *         quantization and Intel (little-endian) bit packing.
 *
 * The default matrix ships five chassis messages:
 *
 *   msg          id     signal           byte  bit  len  offset  scale
 *   IECU_Flag    0x501  IECU_Flag        0     0    8    0       1
 *   IECU_Steer   0x502  Steer_Valid      0     0    8    0       1
 *                       Steer_AngleCmd   4     32   16   -30.0   0.001 deg
 *   IECU_Speed   0x503  Speed_Valid      0     0    8    0       1
 *                       WorkMode         2     16   8    0       1
 *                       Gear             3     24   8    0       1
 *                       AccelCmd         4     32   8    -5.0    0.05 m/s^2
 *   IECU_Brake   0x504  Brake_Valid      0     0    8    0       1
 *                       BrakeCmd         1     8    8    0       1 %
 *   Light_Flag   0x505  TurnLeft         0     0    1    0       1
 *                       TurnRight        0     1    1    0       1
 *                       BrakeLight       1     8    8    0       1
 */

#include "hdt/can_frame.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hdt::can
{
    enum class Gear : std::uint8_t
    {
        Drive = 1,
    };

    enum class WorkMode : std::uint8_t
    {
        Acceleration = 1,
    };

    struct ControlCommand
    {
        double steer_deg{0.0};  ///< road-wheel angle, positive = left, [-30, 30]
        double accel_mps2{0.0}; ///< [-5, 5]
        double brake_pct{0.0};  ///< [0, 100]
        Gear gear{Gear::Drive};
        WorkMode work_mode{WorkMode::Acceleration};
        bool turn_left{false};
        bool turn_right{false};
        bool brake_light{false};
        bool engage{false};
        bool steer_valid{true};
        bool speed_valid{true};
        bool brake_valid{true};

        friend bool operator== (const ControlCommand&, const ControlCommand&) = default;
    };

    struct SignalSpec
    {
        std::string name;
        std::uint8_t start_byte{0};
        std::uint8_t start_bit{0}; ///< absolute bit index in the payload (Intel numbering)
        std::uint8_t bit_length{8};
        double offset{0.0};
        double scale{1.0};
        double min_physical{0.0};
        double max_physical{0.0};

        [[nodiscard]] std::uint64_t max_raw () const noexcept
        {
            return bit_length >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bit_length) - 1;
        }
    };

    struct MessageSpec
    {
        std::string name;
        std::uint32_t can_id{0};
        std::vector<SignalSpec> signals;
    };

    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /**
     * @brief Per-vehicle table of message ids and signal layouts.
     *
     * Validation on construction: 11-bit unique ids, signals inside the
     * 8-byte payload, start_byte consistent with start_bit, no overlapping
     * bits, positive scales and known signal names.
     */
    class CommunicationMatrix
    {
    public:
        explicit CommunicationMatrix (std::vector<MessageSpec> messages);

        [[nodiscard]] static const CommunicationMatrix& default_matrix ();

        /// Parses the JSON matrix format (see README). Throws ConfigError.
        [[nodiscard]] static CommunicationMatrix from_json_text (std::string_view text);
        [[nodiscard]] static CommunicationMatrix load_file (const std::string& path);
        [[nodiscard]] std::string to_json_text () const;

        [[nodiscard]] const std::vector<MessageSpec>& messages () const noexcept { return messages_; }
        [[nodiscard]] const MessageSpec* find (std::uint32_t can_id) const noexcept;
        [[nodiscard]] const MessageSpec* find (std::string_view name) const noexcept;
        [[nodiscard]] const SignalSpec* find_signal (std::string_view signal) const noexcept;

    private:
        std::vector<MessageSpec> messages_;
    };

    /// Clamps to the physical range, rounds half away from zero, clamps to the raw range.
    [[nodiscard]] std::uint64_t quantize (double physical, const SignalSpec& spec);
    [[nodiscard]] double dequantize (std::uint64_t raw, const SignalSpec& spec) noexcept;

    /// Intel bit packing at an absolute start bit.
    void insert_bits (std::span<std::uint8_t, 8> payload, unsigned start_bit, unsigned length, std::uint64_t raw) noexcept;
    [[nodiscard]] std::uint64_t extract_bits (std::span<const std::uint8_t, 8> payload, unsigned start_bit,
                                              unsigned length) noexcept;

    /**
     * @brief Compiles a command into one frame per matrix message, in matrix order.
     *
     * Throws std::invalid_argument if a physical field is non-finite.
     */
    [[nodiscard]] std::vector<CanFrame> encode_command (const ControlCommand& cmd,
                                                        const CommunicationMatrix& matrix = CommunicationMatrix::default_matrix ());

    struct DecodedFrame
    {
        std::string message;
        std::uint32_t can_id{0};
        std::map<std::string, double> signals; ///< physical values keyed by signal name
    };

    enum class FrameRejection
    {
        UnknownId,
        BadLength,
    };

    [[nodiscard]] std::string_view to_string (FrameRejection r) noexcept;

    [[nodiscard]] std::variant<DecodedFrame, FrameRejection> decode_frame (
        const CanFrame& frame, const CommunicationMatrix& matrix = CommunicationMatrix::default_matrix ());

    /// Space-separated upper-case hex of the payload, e.g. "01 00 00 00 30 75 00 00".
    [[nodiscard]] std::string payload_hex (const CanFrame& frame);

} // namespace hdt::can

#pragma once

#include <array>
#include <cstdint>

namespace hdt
{
    /// Classic CAN data frame with an 11-bit identifier and an 8-byte payload.
    struct CanFrame
    {
        std::uint32_t can_id{0};
        std::uint8_t dlc{8};
        std::array<std::uint8_t, 8> data{};

        friend bool operator== (const CanFrame&, const CanFrame&) = default;
    };

    inline constexpr std::uint32_t kMaxStandardCanId = 0x7FF;

} // namespace hdt

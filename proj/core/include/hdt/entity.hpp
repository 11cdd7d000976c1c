#pragma once

#include <cstdint>
#include <string_view>

namespace hdt
{
    enum class EntityKind : std::uint8_t
    {
        Shadow = 0,
        Virtual = 1,
        User = 2,
    };

    [[nodiscard]] constexpr std::string_view to_string (EntityKind k) noexcept
    {
        switch (k)
        {
        case EntityKind::Shadow: return "shadow";
        case EntityKind::Virtual: return "virtual";
        case EntityKind::User: return "user";
        }
        return "unknown";
    }

    /// One vehicle as exported by a world and exchanged through the relay.
    struct EntityState
    {
        std::uint32_t id{0};
        EntityKind kind{EntityKind::Virtual};
        double x{0.0};
        double y{0.0};
        double yaw{0.0};
        double v{0.0};
        std::uint64_t source_timestamp_us{0};

        friend bool operator== (const EntityState&, const EntityState&) = default;
    };

} // namespace hdt

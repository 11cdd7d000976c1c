#pragma once
/**
 * @file   twin_world.hpp
 * @brief  Simulator-side world stepping at a fixed rate: the shadow vehicle
 *         follows the latest received state through horizon -> CTRV ->
 *         frame mapping -> heading EMA, and virtual vehicles follow their
 *         own controllers.
 */

#include "hdt/can_codec.hpp"
#include "hdt/entity.hpp"
#include "hdt/kinematics.hpp"
#include "hdt/state_store.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace hdt
{
    struct TwinConfig
    {
        double tick_hz{60.0};
        double alpha{kDefaultAlpha};
        double delta{0.0}; ///< lead margin added to the horizon, seconds
        double max_horizon{kHorizonMax};
        SiteToSimTransform transform{};
        Pose2D spawn{};
        std::uint32_t shadow_id{1};
        double virtual_wheelbase{2.5};
        double virtual_max_speed{15.0};
    };

    struct ShadowVehicle
    {
        std::uint32_t id{1};
        std::optional<StoredState> latest;
        SmootherState smoother{};
        SiteToSimTransform transform{};
        double delta{0.0};
        Pose2D current_pose{};
        bool synchronized{false};
    };

    enum class ControllerKind
    {
        Remote,
        Scripted,
    };

    struct VirtualVehicle
    {
        std::uint32_t id{0};
        Pose2D pose{};
        double v{0.0};
        double omega{0.0};
        ControllerKind controller{ControllerKind::Remote};
        can::ControlCommand command{};
        /// Scripted controllers are asked for a command every tick.
        std::function<can::ControlCommand (double t)> script;
    };

    struct TickResult
    {
        double t_k{0.0};
        Pose2D shadow_pose{};
        double horizon{0.0};
        double packet_age{0.0};
        bool synchronized{false};
        std::uint32_t seq{0};
    };

    class TwinWorld
    {
    public:
        explicit TwinWorld (TwinConfig config);

        /**
         * @brief Advances the world to simulation time t_k.
         *
         * `snapshot` is the latest-state store's content; a snapshot with an
         * older sequence number than the one already in use is ignored.
         * Without any packet the shadow stays at spawn, unsynchronized.
         * t_pkt is the receiver-local arrival time of the packet.
         */
        TickResult render_tick (double t_k, const std::optional<StoredState>& snapshot);

        /// Returns false if the id is already taken.
        bool spawn_virtual (VirtualVehicle vehicle);
        /// Returns false if no virtual vehicle has that id.
        bool apply_remote_control (std::uint32_t id, const can::ControlCommand& cmd);
        bool remove_virtual (std::uint32_t id);

        void set_delta (double delta) noexcept;
        void set_alpha (double alpha) noexcept;

        [[nodiscard]] const ShadowVehicle& shadow () const noexcept { return shadow_; }
        [[nodiscard]] const std::map<std::uint32_t, VirtualVehicle>& virtuals () const noexcept { return virtuals_; }
        [[nodiscard]] const TwinConfig& config () const noexcept { return config_; }

        /// Shadow (if synchronized) plus all virtual vehicles, sorted by id.
        [[nodiscard]] std::vector<EntityState> export_entities (std::uint64_t now_us) const;

        /// Ids of entity pairs closer than `distance` (overlap warning only, no physics).
        [[nodiscard]] std::vector<std::pair<std::uint32_t, std::uint32_t>> overlaps (double distance = 2.0) const;

    private:
        void step_virtual (VirtualVehicle& vehicle, double t, double dt) const;

        TwinConfig config_;
        ShadowVehicle shadow_;
        std::map<std::uint32_t, VirtualVehicle> virtuals_;
        std::optional<double> last_t_;
    };

} // namespace hdt

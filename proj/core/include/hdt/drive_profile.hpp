#pragma once

#include "hdt/can_codec.hpp"

#include <string>
#include <string_view>

namespace hdt
{
    enum class ProfileKind
    {
        Straight,
        Circle,
        FigureEight,
        StopAndGo,
    };

    [[nodiscard]] std::string_view to_string (ProfileKind k) noexcept;

    /**
     * @brief Open-loop scenario driver producing chassis commands over time.
     *
     * Steering is scheduled purely by time. Speed is held by a proportional
     * controller on the speed feedback the caller supplies (typically the
     * latest received vehicle state). A figure-eight alternates the steering
     * sign every 2*pi*R/v seconds, i.e. once per full loop.
     */
    class DriveProfile
    {
    public:
        /// Throws can::ConfigError for an unknown profile name.
        static DriveProfile make (std::string_view name, double target_speed, double turn_radius = 10.0,
                                  double wheelbase = 2.5);

        [[nodiscard]] can::ControlCommand command_at (double t, double current_speed) const;
        [[nodiscard]] double steer_deg_at (double t) const;
        [[nodiscard]] double target_speed_at (double t) const;

        [[nodiscard]] ProfileKind kind () const noexcept { return kind_; }
        [[nodiscard]] double loop_period () const noexcept;

    private:
        DriveProfile (ProfileKind kind, double speed, double radius, double wheelbase);

        ProfileKind kind_;
        double target_speed_;
        double turn_radius_;
        double wheelbase_;
    };

} // namespace hdt

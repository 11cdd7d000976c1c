#include "hdt/drive_profile.hpp"

#include "hdt/kinematics.hpp"

#include <algorithm>
#include <cmath>

namespace hdt
{
    namespace
    {
        constexpr double kSpeedGain = 1.5;
        constexpr double kStopBrakePct = 40.0;
        constexpr double kGoSeconds = 6.0;
        constexpr double kStopSeconds = 4.0;
    } // namespace

    std::string_view to_string (ProfileKind k) noexcept
    {
        switch (k)
        {
        case ProfileKind::Straight: return "straight";
        case ProfileKind::Circle: return "circle";
        case ProfileKind::FigureEight: return "figure-eight";
        case ProfileKind::StopAndGo: return "stop-and-go";
        }
        return "unknown";
    }

    DriveProfile::DriveProfile (ProfileKind kind, double speed, double radius, double wheelbase)
        : kind_ (kind), target_speed_ (speed), turn_radius_ (radius), wheelbase_ (wheelbase)
    {
    }

    DriveProfile DriveProfile::make (std::string_view name, double target_speed, double turn_radius, double wheelbase)
    {
        if (!(target_speed >= 0.0) || !(turn_radius > 0.0) || !(wheelbase > 0.0))
            throw can::ConfigError ("drive profile: speed, radius and wheelbase must be positive");
        for (auto k : {ProfileKind::Straight, ProfileKind::Circle, ProfileKind::FigureEight, ProfileKind::StopAndGo})
            if (to_string (k) == name)
                return DriveProfile (k, target_speed, turn_radius, wheelbase);
        throw can::ConfigError ("unknown drive profile '" + std::string (name) + "'");
    }

    double DriveProfile::loop_period () const noexcept
    {
        return target_speed_ > 0.0 ? kTwoPi * turn_radius_ / target_speed_ : 0.0;
    }

    double DriveProfile::steer_deg_at (double t) const
    {
        const double turn = std::atan (wheelbase_ / turn_radius_) * 180.0 / kPi;
        switch (kind_)
        {
        case ProfileKind::Straight:
        case ProfileKind::StopAndGo: return 0.0;
        case ProfileKind::Circle: return turn;
        case ProfileKind::FigureEight: {
            const double period = loop_period ();
            if (period <= 0.0)
                return 0.0;
            const auto lap = static_cast<long long> (std::floor (t / period));
            return lap % 2 == 0 ? turn : -turn;
        }
        }
        return 0.0;
    }

    double DriveProfile::target_speed_at (double t) const
    {
        if (kind_ != ProfileKind::StopAndGo)
            return target_speed_;
        const double phase = std::fmod (std::max (0.0, t), kGoSeconds + kStopSeconds);
        return phase < kGoSeconds ? target_speed_ : 0.0;
    }

    can::ControlCommand DriveProfile::command_at (double t, double current_speed) const
    {
        can::ControlCommand cmd;
        cmd.engage = true;
        cmd.steer_deg = steer_deg_at (t);

        const double target = target_speed_at (t);
        if (target <= 0.0 && current_speed > 0.05)
        {
            cmd.accel_mps2 = 0.0;
            cmd.brake_pct = kStopBrakePct;
        }
        else
        {
            cmd.accel_mps2 = std::clamp (kSpeedGain * (target - current_speed), -3.0, 2.0);
        }
        cmd.turn_left = cmd.steer_deg > 1.0;
        cmd.turn_right = cmd.steer_deg < -1.0;
        cmd.brake_light = cmd.brake_pct > 0.0 || cmd.accel_mps2 < -0.5;
        return cmd;
    }

} // namespace hdt

#include "hdt/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hdt
{
    namespace
    {
        double lag_gain (double dt, double tau) { return tau > 0.0 ? -std::expm1 (-dt / tau) : 1.0; }

        bool flag_set (const can::DecodedFrame& f, const char* name)
        {
            const auto it = f.signals.find (name);
            return it != f.signals.end () && it->second == 1.0;
        }

        const double* find (const can::DecodedFrame& f, const char* name)
        {
            const auto it = f.signals.find (name);
            return it == f.signals.end () ? nullptr : &it->second;
        }
    } // namespace

    void PlantConfig::validate () const
    {
        if (!(wheelbase > 0.0))
            throw std::invalid_argument ("plant: wheelbase must be positive");
        if (tau_steer < 0.0 || tau_accel < 0.0)
            throw std::invalid_argument ("plant: time constants must be non-negative");
        if (!(max_speed > 0.0))
            throw std::invalid_argument ("plant: max_speed must be positive");
        if (step_hz <= 0 || emit_hz <= 0 || step_hz < emit_hz)
            throw std::invalid_argument ("plant: need step_hz >= emit_hz > 0");
        if (pose_noise_std < 0.0 || heading_noise_std < 0.0)
            throw std::invalid_argument ("plant: noise std must be non-negative");
    }

    void CommandMailbox::post (const CanFrame& frame)
    {
        std::lock_guard lock (mutex_);
        slots_[frame.can_id] = frame;
    }

    std::vector<CanFrame> CommandMailbox::drain ()
    {
        std::lock_guard lock (mutex_);
        std::vector<CanFrame> out;
        out.reserve (slots_.size ());
        for (auto& [id, frame] : slots_)
            out.push_back (frame);
        slots_.clear ();
        return out;
    }

    VehiclePlant::VehiclePlant (PlantConfig config, const can::CommunicationMatrix& matrix)
        : config_ (config), matrix_ (&matrix), noise_rng_ (config.seed)
    {
        config_.validate ();
        state_.pose = config_.initial_pose;
        state_.commanded.steer_deg = 0.0;
        state_.commanded.accel_mps2 = 0.0;
        state_.commanded.brake_pct = 0.0;
    }

    void VehiclePlant::reset (const Pose2D& pose, double v, double steer_deg)
    {
        state_.pose = pose;
        state_.v = std::clamp (v, 0.0, config_.max_speed);
        state_.steer_actual = std::clamp (steer_deg, -kMaxSteerDeg, kMaxSteerDeg);
        state_.omega = state_.v / config_.wheelbase * std::tan (state_.steer_actual * kPi / 180.0);
    }

    void VehiclePlant::apply_frames (std::span<const CanFrame> frames)
    {
        std::vector<can::DecodedFrame> decoded;
        decoded.reserve (frames.size ());
        for (const auto& frame : frames)
        {
            auto result = can::decode_frame (frame, *matrix_);
            if (auto* d = std::get_if<can::DecodedFrame> (&result))
                decoded.push_back (std::move (*d));
            else
                ++rejected_frames_;
        }
        std::stable_partition (decoded.begin (), decoded.end (),
                               [] (const can::DecodedFrame& d) { return d.signals.contains ("IECU_Flag"); });

        auto& cmd = state_.commanded;
        for (const auto& d : decoded)
        {
            if (const auto* flag = find (d, "IECU_Flag"))
            {
                state_.engaged = *flag == 1.0;
                cmd.engage = state_.engaged;
                continue;
            }
            if (const auto* left = find (d, "TurnLeft"))
            {
                cmd.turn_left = *left == 1.0;
                cmd.turn_right = flag_set (d, "TurnRight");
                cmd.brake_light = flag_set (d, "BrakeLight");
                continue;
            }
            if (!state_.engaged)
                continue;

            if (const auto* steer = find (d, "Steer_AngleCmd"); steer && flag_set (d, "Steer_Valid"))
                cmd.steer_deg = std::clamp (*steer, -kMaxSteerDeg, kMaxSteerDeg);
            if (const auto* accel = find (d, "AccelCmd"); accel && flag_set (d, "Speed_Valid"))
            {
                cmd.accel_mps2 = *accel;
                if (const auto* gear = find (d, "Gear"))
                    cmd.gear = static_cast<can::Gear> (static_cast<int> (*gear));
                if (const auto* mode = find (d, "WorkMode"))
                    cmd.work_mode = static_cast<can::WorkMode> (static_cast<int> (*mode));
            }
            if (const auto* brake = find (d, "BrakeCmd"); brake && flag_set (d, "Brake_Valid"))
                cmd.brake_pct = std::clamp (*brake, 0.0, 100.0);
        }
    }

    double VehiclePlant::effective_accel_target () const noexcept
    {
        if (!state_.engaged)
            return -kFullBrakeDecel;
        const auto& cmd = state_.commanded;
        if (cmd.brake_pct > 0.0)
            return -(cmd.brake_pct / 100.0) * kFullBrakeDecel;
        return cmd.accel_mps2;
    }

    void VehiclePlant::step ()
    {
        const double dt = step_dt ();

        state_.steer_actual += (steer_target () - state_.steer_actual) * lag_gain (dt, config_.tau_steer);
        state_.steer_actual = std::clamp (state_.steer_actual, -kMaxSteerDeg, kMaxSteerDeg);
        state_.accel_actual += (effective_accel_target () - state_.accel_actual) * lag_gain (dt, config_.tau_accel);

        state_.v = std::clamp (state_.v + state_.accel_actual * dt, 0.0, config_.max_speed);
        state_.omega = state_.v / config_.wheelbase * std::tan (state_.steer_actual * kPi / 180.0);

        // Exact arc over the step for constant (v, omega).
        VehicleState s;
        s.pose = state_.pose;
        s.v = state_.v;
        s.omega = state_.omega;
        state_.pose = ctrv_extrapolate (s, dt);
        ++steps_;
        state_.clock = static_cast<double> (steps_) / config_.step_hz;
    }

    VehicleState VehiclePlant::truth () const
    {
        VehicleState s;
        s.pose = state_.pose;
        s.v = state_.v;
        s.omega = state_.omega;
        s.timestamp_us = static_cast<std::uint64_t> (std::llround (state_.clock * 1e6));
        s.seq = seq_;
        return s;
    }

    VehicleState VehiclePlant::sample_state ()
    {
        VehicleState s = truth ();
        if (config_.pose_noise_std > 0.0)
        {
            s.pose.x += config_.pose_noise_std * normal_ (noise_rng_);
            s.pose.y += config_.pose_noise_std * normal_ (noise_rng_);
        }
        if (config_.heading_noise_std > 0.0)
            s.pose.theta = wrap_angle (s.pose.theta + config_.heading_noise_std * normal_ (noise_rng_));
        s.seq = ++seq_;
        return s;
    }

} // namespace hdt

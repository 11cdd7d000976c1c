#include "hdt/twin_world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hdt
{
    TwinWorld::TwinWorld (TwinConfig config) : config_ (config)
    {
        if (!(config_.tick_hz > 0.0))
            throw std::invalid_argument ("twin world: tick rate must be positive");
        shadow_.id = config_.shadow_id;
        shadow_.transform = config_.transform;
        shadow_.delta = config_.delta;
        shadow_.smoother.alpha = std::clamp (config_.alpha, 0.0, 1.0);
        shadow_.current_pose = config_.spawn;
    }

    void TwinWorld::set_delta (double delta) noexcept
    {
        config_.delta = delta;
        shadow_.delta = delta;
    }

    void TwinWorld::set_alpha (double alpha) noexcept
    {
        config_.alpha = std::clamp (alpha, 0.0, 1.0);
        shadow_.smoother.alpha = config_.alpha;
    }

    TickResult TwinWorld::render_tick (double t_k, const std::optional<StoredState>& snapshot)
    {
        const double dt = last_t_ ? std::max (0.0, t_k - *last_t_) : 0.0;
        last_t_ = t_k;

        if (snapshot && (!shadow_.latest || snapshot->state.seq >= shadow_.latest->state.seq))
            shadow_.latest = snapshot;

        TickResult result;
        result.t_k = t_k;
        if (shadow_.latest)
        {
            const auto& latest = *shadow_.latest;
            const double t_pkt = static_cast<double> (latest.arrival_us) * 1e-6;
            result.horizon = compute_horizon (t_k, t_pkt, shadow_.delta, config_.max_horizon);
            result.packet_age = t_k - t_pkt;
            result.seq = latest.state.seq;

            const Pose2D raw = ctrv_extrapolate (latest.state, result.horizon);
            const Pose2D sim = site_to_sim (raw, shadow_.transform);
            shadow_.smoother = ema_heading (shadow_.smoother, sim.theta);
            shadow_.current_pose = {sim.x, sim.y, shadow_.smoother.theta_hat};
            shadow_.synchronized = true;
        }
        result.shadow_pose = shadow_.current_pose;
        result.synchronized = shadow_.synchronized;

        for (auto& [id, vehicle] : virtuals_)
            step_virtual (vehicle, t_k, dt);
        return result;
    }

    void TwinWorld::step_virtual (VirtualVehicle& vehicle, double t, double dt) const
    {
        if (vehicle.controller == ControllerKind::Scripted && vehicle.script)
            vehicle.command = vehicle.script (t);
        if (dt <= 0.0)
            return;

        const auto& cmd = vehicle.command;
        double accel = cmd.accel_mps2;
        if (!cmd.engage)
            accel = -5.0;
        else if (cmd.brake_pct > 0.0)
            accel = -(cmd.brake_pct / 100.0) * 5.0;
        vehicle.v = std::clamp (vehicle.v + accel * dt, 0.0, config_.virtual_max_speed);

        const double steer = std::clamp (cmd.steer_deg, -30.0, 30.0) * kPi / 180.0;
        vehicle.omega = vehicle.v * std::tan (steer) / config_.virtual_wheelbase;

        VehicleState s;
        s.pose = vehicle.pose;
        s.v = vehicle.v;
        s.omega = vehicle.omega;
        vehicle.pose = ctrv_extrapolate (s, dt);
    }

    bool TwinWorld::spawn_virtual (VirtualVehicle vehicle)
    {
        if (vehicle.id == shadow_.id || virtuals_.contains (vehicle.id))
            return false;
        vehicle.pose.theta = wrap_angle (vehicle.pose.theta);
        const auto id = vehicle.id;
        virtuals_.emplace (id, std::move (vehicle));
        return true;
    }

    bool TwinWorld::apply_remote_control (std::uint32_t id, const can::ControlCommand& cmd)
    {
        const auto it = virtuals_.find (id);
        if (it == virtuals_.end () || it->second.controller != ControllerKind::Remote)
            return false;
        it->second.command = cmd;
        return true;
    }

    bool TwinWorld::remove_virtual (std::uint32_t id) { return virtuals_.erase (id) > 0; }

    std::vector<EntityState> TwinWorld::export_entities (std::uint64_t now_us) const
    {
        std::vector<EntityState> out;
        if (shadow_.synchronized && shadow_.latest)
        {
            const auto& p = shadow_.current_pose;
            out.push_back ({shadow_.id, EntityKind::Shadow, p.x, p.y, p.theta, shadow_.latest->state.v,
                            shadow_.latest->state.timestamp_us});
        }
        for (const auto& [id, v] : virtuals_)
            out.push_back ({id, EntityKind::Virtual, v.pose.x, v.pose.y, v.pose.theta, v.v, now_us});
        std::sort (out.begin (), out.end (), [] (const auto& a, const auto& b) { return a.id < b.id; });
        return out;
    }

    std::vector<std::pair<std::uint32_t, std::uint32_t>> TwinWorld::overlaps (double distance) const
    {
        std::vector<std::pair<std::uint32_t, Pose2D>> poses;
        if (shadow_.synchronized)
            poses.emplace_back (shadow_.id, shadow_.current_pose);
        for (const auto& [id, v] : virtuals_)
            poses.emplace_back (id, v.pose);

        std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
        for (std::size_t i = 0; i < poses.size (); ++i)
            for (std::size_t j = i + 1; j < poses.size (); ++j)
                if (sync_error (poses[i].second, poses[j].second) < distance)
                    out.emplace_back (poses[i].first, poses[j].first);
        return out;
    }

} // namespace hdt

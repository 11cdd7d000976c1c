#include "hdt/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hdt
{
    double wrap_angle (double phi)
    {
        if (!std::isfinite (phi))
            throw std::domain_error ("wrap_angle: non-finite angle");

        // remainder() is exact and lands in [-pi, pi]; -pi is folded onto pi.
        double r = std::remainder (phi, kTwoPi);
        if (r <= -kPi)
            r += kTwoPi;
        if (r > kPi)
            r = kPi;
        return r;
    }

    double compute_horizon (double t_k, double t_pkt, double delta, double max_horizon)
    {
        if (!std::isfinite (t_k) || !std::isfinite (t_pkt) || !std::isfinite (delta) || !std::isfinite (max_horizon))
            throw std::domain_error ("compute_horizon: non-finite input");
        const double raw = t_k - t_pkt + delta;
        return std::clamp (raw, 0.0, std::max (0.0, max_horizon));
    }

    Pose2D ctrv_extrapolate (const VehicleState& state, double dt)
    {
        if (!std::isfinite (dt) || dt < 0.0)
            throw std::invalid_argument ("ctrv_extrapolate: dt must be finite and non-negative");
        const auto& p = state.pose;
        if (!std::isfinite (p.x) || !std::isfinite (p.y) || !std::isfinite (p.theta) || !std::isfinite (state.v) ||
            !std::isfinite (state.omega))
            throw std::invalid_argument ("ctrv_extrapolate: non-finite state");

        if (dt == 0.0)
            return p;

        const double v = state.v;
        const double w = state.omega;
        // Product form of sin(a+b)-sin(a) and cos(a+b)-cos(a); avoids the
        // cancellation of the difference form at small w*dt. Below kOmegaMin
        // the chord is taken as v*dt (sinc -> 1) but still laid along the
        // mid-arc heading, so both branches agree at the threshold.
        const double half = 0.5 * w * dt;
        const double chord = std::abs (w) < kOmegaMin ? v * dt : 2.0 * v / w * std::sin (half);
        const double mid = p.theta + half;
        return {p.x + chord * std::cos (mid), p.y + chord * std::sin (mid), wrap_angle (p.theta + w * dt)};
    }

    SmootherState ema_heading (SmootherState smoother, double theta_raw)
    {
        if (!std::isfinite (theta_raw))
            throw std::domain_error ("ema_heading: non-finite heading");
        if (!smoother.initialized)
        {
            smoother.theta_hat = wrap_angle (theta_raw);
            smoother.initialized = true;
            return smoother;
        }
        const double alpha = std::clamp (smoother.alpha, 0.0, 1.0);
        smoother.theta_hat = wrap_angle (smoother.theta_hat + alpha * wrap_angle (theta_raw - smoother.theta_hat));
        return smoother;
    }

    Pose2D site_to_sim (const Pose2D& pose, const SiteToSimTransform& t)
    {
        const double c = std::cos (t.rotation);
        const double s = std::sin (t.rotation);
        const double sign = t.yaw_sign < 0 ? -1.0 : 1.0;
        const double xm = pose.x;
        const double ym = sign * pose.y;
        return {c * xm - s * ym + t.translation_x, s * xm + c * ym + t.translation_y,
                wrap_angle (sign * pose.theta + t.rotation)};
    }

    Pose2D sim_to_site (const Pose2D& pose, const SiteToSimTransform& t)
    {
        const double c = std::cos (t.rotation);
        const double s = std::sin (t.rotation);
        const double sign = t.yaw_sign < 0 ? -1.0 : 1.0;
        const double dx = pose.x - t.translation_x;
        const double dy = pose.y - t.translation_y;
        const double xm = c * dx + s * dy;
        const double ym = -s * dx + c * dy;
        return {xm, sign * ym, wrap_angle (sign * (pose.theta - t.rotation))};
    }

    double sync_error (const Pose2D& real, const Pose2D& shadow) noexcept
    {
        return std::hypot (real.x - shadow.x, real.y - shadow.y);
    }

} // namespace hdt

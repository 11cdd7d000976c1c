#pragma once
/**
 * @file   kinematics.hpp
 * @brief  Planar pose algebra used by shadow-vehicle synchronization:
 *         angle wrapping, prediction horizon, CTRV extrapolation,
 *         circular EMA heading smoothing and site/sim frame mapping.
 *
 * Every function here is pure. Angles are radians, distances meters,
 * time seconds. Headings returned by this module are canonical, i.e.
 * inside (-pi, pi].
 */

#include <cstdint>
#include <numbers>

namespace hdt
{
    inline constexpr double kPi = std::numbers::pi;
    inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

    /// Below this yaw rate the CTRV arc is replaced by a chord of length v*dt.
    inline constexpr double kOmegaMin = 1e-4;
    /// Upper clamp on the prediction horizon.
    inline constexpr double kHorizonMax = 0.5;
    inline constexpr double kDefaultAlpha = 0.3;

    struct Pose2D
    {
        double x{0.0};
        double y{0.0};
        double theta{0.0};

        friend bool operator== (const Pose2D&, const Pose2D&) = default;
    };

    /**
     * @brief Timestamped kinematic state of the physical vehicle.
     *
     * The timestamp is kept as integer microseconds so that it survives the
     * wire format bit-exactly.
     */
    struct VehicleState
    {
        Pose2D pose{};
        double v{0.0};     ///< m/s, forward positive
        double omega{0.0}; ///< rad/s, CCW positive
        std::uint64_t timestamp_us{0};
        std::uint32_t seq{0};

        [[nodiscard]] double timestamp_s () const noexcept { return static_cast<double> (timestamp_us) * 1e-6; }

        friend bool operator== (const VehicleState&, const VehicleState&) = default;
    };

    /// Planar rigid transform from test-site coordinates into simulator coordinates.
    /// With yaw_sign = -1 the site frame is mirrored (y -> -y) before rotating.
    struct SiteToSimTransform
    {
        double rotation{0.0};
        double translation_x{0.0};
        double translation_y{0.0};
        int yaw_sign{1};

        [[nodiscard]] static SiteToSimTransform identity () noexcept { return {}; }

        friend bool operator== (const SiteToSimTransform&, const SiteToSimTransform&) = default;
    };

    struct SmootherState
    {
        double theta_hat{0.0};
        double alpha{kDefaultAlpha};
        bool initialized{false};
    };

    /// Maps any finite angle to (-pi, pi]. Throws std::domain_error on non-finite input.
    [[nodiscard]] double wrap_angle (double phi);

    /// Shortest signed angular distance from `from` to `to`.
    [[nodiscard]] inline double angle_diff (double to, double from) { return wrap_angle (to - from); }

    /**
     * @brief Prediction horizon dt = t_k - t_pkt + delta, clamped to [0, max_horizon].
     */
    [[nodiscard]] double compute_horizon (double t_k, double t_pkt, double delta, double max_horizon = kHorizonMax);

    /**
     * @brief Constant-turn-rate-and-velocity extrapolation of `state.pose` by `dt`.
     *
     * For |omega| < kOmegaMin the arc is replaced by a chord of length
     * v*dt along the mid-arc heading (a straight line when omega is 0). dt == 0
     * returns state.pose unchanged. Throws std::invalid_argument on
     * negative or non-finite dt and on non-finite state fields.
     */
    [[nodiscard]] Pose2D ctrv_extrapolate (const VehicleState& state, double dt);

    /**
     * @brief One step of the circular exponential moving average.
     *
     * An uninitialized smoother is seeded with wrap_angle(theta_raw).
     * The smoothed heading is the returned state's theta_hat.
     */
    [[nodiscard]] SmootherState ema_heading (SmootherState smoother, double theta_raw);

    [[nodiscard]] Pose2D site_to_sim (const Pose2D& pose, const SiteToSimTransform& t);
    [[nodiscard]] Pose2D sim_to_site (const Pose2D& pose, const SiteToSimTransform& t);

    /// Euclidean position error between two poses in the same frame.
    [[nodiscard]] double sync_error (const Pose2D& real, const Pose2D& shadow) noexcept;

} // namespace hdt

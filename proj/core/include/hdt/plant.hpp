#pragma once
/**
 * @file   plant.hpp
 * @brief  Simulated vehicle + on-board computer: kinematic bicycle with
 *         first-order actuator lag, driven by decoded chassis CAN frames.
 */

#include "hdt/can_codec.hpp"
#include "hdt/can_frame.hpp"
#include "hdt/kinematics.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <vector>

namespace hdt
{
    /// Deceleration commanded by 100 % brake.
    inline constexpr double kFullBrakeDecel = 5.0;
    inline constexpr double kMaxSteerDeg = 30.0;

    struct PlantConfig
    {
        double wheelbase{2.5};
        double tau_steer{0.2};
        double tau_accel{0.3};
        double max_speed{10.0};
        int step_hz{100};
        int emit_hz{10};
        double pose_noise_std{0.0};
        double heading_noise_std{0.0};
        std::uint64_t seed{1};
        Pose2D initial_pose{};

        /// Throws std::invalid_argument when rates or constants are out of range.
        void validate () const;
    };

    struct PlantState
    {
        Pose2D pose{}; ///< site frame
        double v{0.0};
        double omega{0.0};
        double steer_actual{0.0}; ///< degrees
        double accel_actual{0.0};
        can::ControlCommand commanded{};
        bool engaged{false};
        double clock{0.0};

        friend bool operator== (const PlantState&, const PlantState&) = default;
    };

    /**
     * @brief Latest-wins mailbox of received CAN frames, one slot per identifier.
     *
     * Filled by the network receive path, drained by the stepper.
     */
    class CommandMailbox
    {
    public:
        void post (const CanFrame& frame);
        [[nodiscard]] std::vector<CanFrame> drain ();

    private:
        std::mutex mutex_;
        std::map<std::uint32_t, CanFrame> slots_;
    };

    class VehiclePlant
    {
    public:
        explicit VehiclePlant (PlantConfig config, const can::CommunicationMatrix& matrix = can::CommunicationMatrix::default_matrix ());

        /**
         * @brief Applies chassis frames to the actuation targets.
         *
         * IECU_Flag is applied first within a batch. Actuation messages are
         * honoured only while engaged and only if their validity signal is 1.
         * Undecodable frames are counted and otherwise ignored.
         */
        void apply_frames (std::span<const CanFrame> frames);

        /// Advances the plant by one step of 1/step_hz seconds.
        void step ();

        /// Emission sample: pose with configured noise, fresh sequence number.
        [[nodiscard]] VehicleState sample_state ();

        /// Noiseless state at the current clock (does not consume a sequence number).
        [[nodiscard]] VehicleState truth () const;

        /// Acceleration the lag filter is converging to (brake overrides, disengage = full brake).
        [[nodiscard]] double effective_accel_target () const noexcept;
        [[nodiscard]] double steer_target () const noexcept { return state_.commanded.steer_deg; }

        [[nodiscard]] const PlantState& state () const noexcept { return state_; }
        [[nodiscard]] const PlantConfig& config () const noexcept { return config_; }
        [[nodiscard]] std::uint64_t rejected_frames () const noexcept { return rejected_frames_; }
        [[nodiscard]] double step_dt () const noexcept { return 1.0 / config_.step_hz; }

        /// Directly sets kinematic state; for scenario setup and tests.
        void reset (const Pose2D& pose, double v, double steer_deg = 0.0);

    private:
        PlantConfig config_;
        const can::CommunicationMatrix* matrix_;
        PlantState state_;
        std::uint32_t seq_{0};
        std::uint64_t steps_{0};
        std::uint64_t rejected_frames_{0};
        std::mt19937_64 noise_rng_;
        std::normal_distribution<double> normal_{0.0, 1.0};
    };

} // namespace hdt

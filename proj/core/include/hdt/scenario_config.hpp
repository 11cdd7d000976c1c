#pragma once
/**
 * @file   scenario_config.hpp
 * @brief  Harness configuration. JSON on disk; any subset of keys may be
 *         given and the rest fall back to the defaults. Keys starting with
 *         '_' are annotations and are ignored.
 */

#include "hdt/impairment.hpp"
#include "hdt/kinematics.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hdt
{
    class ScenarioConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class ClockMode
    {
        Fast,
        Realtime,
    };

    enum class Topology
    {
        Standalone,
        CloudEdge,
        CloudCentric,
    };

    [[nodiscard]] std::string_view to_string (ClockMode m) noexcept;
    [[nodiscard]] std::string_view to_string (Topology t) noexcept;
    /// Throws ScenarioConfigError.
    [[nodiscard]] ClockMode parse_clock_mode (std::string_view s);
    [[nodiscard]] Topology parse_topology (std::string_view s);

    struct Band
    {
        double lo{0.0};
        double hi{0.0};

        [[nodiscard]] bool contains (double v) const noexcept { return v >= lo && v <= hi; }
        friend bool operator== (const Band&, const Band&) = default;
    };

    struct Thresholds
    {
        double mean_ep_m{0.05};
        double max_ep_m{0.10};
        double gateway_latency_ms{50.0};
        Band cloud_edge_total_ms{100.0, 300.0};
        Band cloud_centric_total_ms{400.0, 1000.0};

        friend bool operator== (const Thresholds&, const Thresholds&) = default;
    };

    struct ScenarioConfig
    {
        // scenario
        std::string name{"figure-eight-desk"};
        double duration_s{60.0};
        std::uint64_t seed{1};
        ClockMode clock{ClockMode::Fast};
        Topology topology{Topology::Standalone};

        // profile
        std::string profile{"figure-eight"};
        double speed_mps{3.0};
        double turn_radius_m{10.0};

        // plant
        double wheelbase_m{2.5};
        double tau_steer_s{0.2};
        double tau_accel_s{0.3};
        double max_speed_mps{10.0};
        int step_hz{100};
        double packet_rate_hz{10.0};
        double pose_noise_std_m{0.0};
        double heading_noise_std_rad{0.0};

        // links
        LinkImpairment car_to_local{20.0, 5.0, 0.0, 0.0};
        LinkImpairment local_to_car{20.0, 5.0, 0.0, 0.0};
        LinkImpairment local_to_cloud{75.0, 10.0, 0.0, 0.0};
        LinkImpairment cloud_to_local{125.0, 10.0, 0.0, 0.0};
        LinkImpairment cloud_to_local_centric{175.0, 10.0, 0.0, 0.0};

        // twin world
        double tick_hz{60.0};
        double alpha{kDefaultAlpha};
        std::optional<double> delta_fixed_s; ///< nullopt = auto-calibrate from probes
        double delta_fallback_s{0.0};
        double max_horizon_s{kHorizonMax};
        double match_window_s{0.010};
        int probe_count{20};
        SiteToSimTransform transform{};

        // cloud
        double broadcast_hz{20.0};
        double upload_hz{10.0};
        double staleness_ms{300.0};
        int users{3};
        double ping_hz{1.0};

        Thresholds thresholds{};

        /// Throws ScenarioConfigError.
        void validate () const;

        friend bool operator== (const ScenarioConfig&, const ScenarioConfig&) = default;
    };

    /// Overlays `text` on the defaults. Throws ScenarioConfigError on bad JSON, unknown keys or invalid values.
    [[nodiscard]] ScenarioConfig config_from_json (std::string_view text);
    [[nodiscard]] ScenarioConfig load_config (const std::string& path);

    /// Complete config as JSON; `annotated` adds "_doc" entries per section.
    [[nodiscard]] std::string config_to_json (const ScenarioConfig& config, bool annotated = false);

} // namespace hdt

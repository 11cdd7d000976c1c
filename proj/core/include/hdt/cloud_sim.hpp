#pragma once
/**
 * @file   cloud_sim.hpp
 * @brief  Multi-run experiments on top of run_scenario: seeded latency
 *         trials comparing both cloud architectures, and the user
 *         disconnect isolation check.
 */

#include "hdt/scenario.hpp"

#include <cstdint>
#include <vector>

namespace hdt
{
    /// Per-hop injections used for the architecture comparison: 25 / 75 / 125 ms, 175 ms downlink for the baseline.
    [[nodiscard]] ScenarioConfig architecture_comparison_config (ScenarioConfig base);

    struct LatencyTrial
    {
        std::uint64_t seed{0};
        LatencyTable cloud_edge;
        LatencyTable cloud_centric;

        [[nodiscard]] bool edge_in_band (const Thresholds& t) const noexcept;
        [[nodiscard]] bool centric_in_band (const Thresholds& t) const noexcept;
        [[nodiscard]] bool ordered () const noexcept;
    };

    struct LatencyTrials
    {
        Thresholds thresholds;
        std::vector<LatencyTrial> trials;

        [[nodiscard]] bool pass () const noexcept;
    };

    /// Runs `count` trials with seeds base.seed, base.seed + 1, ... Each trial runs both architectures.
    [[nodiscard]] LatencyTrials run_latency_trials (const ScenarioConfig& base, int count);

    struct IsolationResult
    {
        RunReport baseline;
        RunReport disconnected;
        double relative_change{0.0}; ///< |mean e_p difference| / baseline mean e_p

        [[nodiscard]] bool pass (double tolerance = 0.05) const noexcept;
    };

    /// Runs the cloud-edge scenario twice with the same seed, disconnecting user 0 at `at_s` in the second run.
    [[nodiscard]] IsolationResult run_isolation_check (const ScenarioConfig& base, double at_s);

} // namespace hdt

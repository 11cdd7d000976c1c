#pragma once
/**
 * @file   scenario.hpp
 * @brief  Scenario runner: composes plant, impaired links, twin world and
 *         (for the cloud topologies) relay and user clients on one event
 *         loop, and collects the run report.
 *
 * Total data-transfer time is measured per user as the time from plant
 * emission of a state to the user displaying a frame that contains both
 * that state and the user's own reaction to it. With a local world the
 * reaction is immediate; in the cloud-centric baseline it needs a control
 * round trip through the relay.
 */

#include "hdt/impaired_link.hpp"
#include "hdt/metrics.hpp"
#include "hdt/scenario_config.hpp"
#include "hdt/state_store.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hdt
{
    struct CalibrationResult
    {
        double delta_s{0.0};
        bool calibrated{false}; ///< false = fixed delta or fallback after probe failure
        int probes_sent{0};
        int probes_answered{0};
        std::optional<double> median_one_way_s;
    };

    struct HopStats
    {
        std::size_t samples{0};
        double mean_ms{0.0};
        double min_ms{0.0};
        double max_ms{0.0};
        double p95_ms{0.0};
    };

    /// Nullopt for an empty sample set.
    [[nodiscard]] std::optional<HopStats> hop_stats (const std::vector<double>& samples_ms);

    struct LatencyTable
    {
        Topology topology{Topology::Standalone};
        std::optional<HopStats> car_to_local;   ///< gateway probe, RTT/2
        std::optional<HopStats> local_to_cloud; ///< PING/PONG up leg
        std::optional<HopStats> cloud_to_local; ///< PING/PONG down leg
        std::optional<HopStats> total;          ///< carried timestamp, per applied state
        std::optional<double> hop_sum_ms;       ///< sum of hop means along the data path
    };

    struct ConsistencyReport
    {
        std::size_t users{0};
        std::size_t seqs_compared{0};
        std::size_t mismatches{0};
        std::map<std::uint32_t, std::uint64_t> received; ///< broadcasts per user id

        [[nodiscard]] bool consistent () const noexcept { return mismatches == 0 && seqs_compared > 0; }
    };

    struct RunOptions
    {
        /// For cloud topologies, also run the other architecture with the same seed for comparison.
        bool compare_topologies{true};
        /// Disconnect user index `disconnect_user` at this scenario time.
        std::optional<double> disconnect_at_s;
        std::size_t disconnect_user{0};
    };

    struct RunReport
    {
        ScenarioConfig config;
        CalibrationResult calibration;
        SyncSummary sync;
        MetricsLog log;
        StoreCounters gateway;
        LinkStats car_to_local;
        LinkStats local_to_car;
        std::optional<HopStats> gateway_latency; ///< emission to gateway arrival, carried timestamp
        std::vector<LatencyTable> latency;       ///< own topology first
        std::optional<ConsistencyReport> consistency;
        std::uint64_t plant_rejected_frames{0};
        std::vector<std::string> failures;

        [[nodiscard]] bool pass () const noexcept { return failures.empty (); }
        [[nodiscard]] const LatencyTable* latency_for (Topology t) const noexcept;
    };

    /// Throws ScenarioConfigError for an invalid config.
    [[nodiscard]] RunReport run_scenario (const ScenarioConfig& config, const RunOptions& options = {});

    /// Lead margin from probe results: median one-way estimate, or `fallback` if no probe was answered.
    [[nodiscard]] CalibrationResult delta_from_probes (const std::vector<double>& one_way_s, int sent, double fallback);

    /// splitmix64 step; used to derive independent per-component seeds.
    [[nodiscard]] std::uint64_t derive_seed (std::uint64_t seed, std::uint64_t stream) noexcept;

} // namespace hdt

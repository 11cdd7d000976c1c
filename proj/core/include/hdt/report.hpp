#pragma once
/**
 * @file   report.hpp
 * @brief  Report rendering: metrics.csv, summary.json, latency.json and the
 *         human-readable synchronization and latency tables.
 */

#include "hdt/cloud_sim.hpp"
#include "hdt/scenario.hpp"

#include <filesystem>
#include <string>

namespace hdt
{
    /// Stated in every latency report.
    inline constexpr const char* kTotalDefinition =
        "total = plant emission of a state until a user displays a frame that contains that state "
        "and the user's own reaction to it";

    [[nodiscard]] std::string summary_document (const RunReport& report);
    [[nodiscard]] std::string latency_document (const RunReport& report);

    /// Per-second error row plus the latency table.
    [[nodiscard]] std::string render_text (const RunReport& report);
    [[nodiscard]] std::string render_latency_table (const std::vector<LatencyTable>& tables);
    [[nodiscard]] std::string render_trials (const LatencyTrials& trials);

    /// Writes metrics.csv, summary.json and latency.json into `dir` (created if needed).
    void write_outputs (const RunReport& report, const std::filesystem::path& dir);

} // namespace hdt

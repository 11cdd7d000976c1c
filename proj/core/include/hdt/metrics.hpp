#pragma once
/**
 * @file   metrics.hpp
 * @brief  Synchronization-error metrology: ground-truth matching, the
 *         per-tick metrics log and its summary (mean / max / p95 plus one
 *         sample per integer second).
 */

#include "hdt/kinematics.hpp"
#include "hdt/twin_world.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hdt
{
    inline constexpr double kDefaultMatchWindow = 0.010;

    /// Time-ordered noiseless plant states (site frame) from the truth side channel.
    class TruthBuffer
    {
    public:
        explicit TruthBuffer (double retention_s = 2.0) : retention_ (retention_s) {}

        /// Samples must arrive in non-decreasing time order.
        void push (double t, const VehicleState& state);

        /// Sample closest to t if it lies within +-window.
        [[nodiscard]] std::optional<std::pair<double, VehicleState>> nearest (double t, double window) const;

        /// Nearest sample propagated along its own arc to exactly t (offset compensation).
        [[nodiscard]] std::optional<Pose2D> pose_at (double t, double window) const;

        [[nodiscard]] std::size_t size () const noexcept { return samples_.size (); }

    private:
        double retention_;
        std::deque<std::pair<double, VehicleState>> samples_;
    };

    struct MetricsRow
    {
        double t{0.0};
        double x_r{0.0};
        double y_r{0.0};
        double x_s{0.0};
        double y_s{0.0};
        double e_p{0.0};
        double dt_horizon{0.0};
        double packet_age{0.0};

        friend bool operator== (const MetricsRow&, const MetricsRow&) = default;
    };

    class MetricsLog
    {
    public:
        /// Throws std::invalid_argument unless row.t is strictly after the last row.
        void append (const MetricsRow& row);
        void count_skipped () noexcept { ++skipped_; }

        [[nodiscard]] const std::vector<MetricsRow>& rows () const noexcept { return rows_; }
        [[nodiscard]] std::uint64_t skipped () const noexcept { return skipped_; }
        [[nodiscard]] bool empty () const noexcept { return rows_.empty (); }

    private:
        std::vector<MetricsRow> rows_;
        std::uint64_t skipped_{0};
    };

    /**
     * @brief Matches one tick against ground truth and appends a row.
     *
     * The matched truth sample is propagated to t_k and mapped into the
     * simulation frame with the same transform the shadow uses. `t_report` is the time written to the row.
     * Returns false (and counts a skip) if no truth sample is in the window
     * or the shadow is not yet synchronized.
     */
    bool record_metrics (MetricsLog& log, const TickResult& tick, double t_report, const TruthBuffer& truth,
                         const SiteToSimTransform& transform, double window = kDefaultMatchWindow);

    struct SyncSummary
    {
        bool empty{true};
        std::size_t count{0};
        double mean{0.0};
        double max{0.0};
        double p95{0.0};
        std::uint64_t skipped{0};
        std::vector<std::pair<double, double>> per_second; ///< (row time, e_p) nearest each integer second
    };

    [[nodiscard]] SyncSummary summarize (const MetricsLog& log);

    /// CSV with header t,x_r,y_r,x_s,y_s,e_p,dt_horizon,packet_age; fixed 6-decimal formatting.
    [[nodiscard]] std::string metrics_csv (const MetricsLog& log);

    /// {"empty":..,"count":..,"mean":..,"max":..,"p95":..,"skipped":..,"per_second":[{"t":..,"e_p":..}]}
    [[nodiscard]] std::string summary_json (const SyncSummary& summary);

    /// Two-row table "t (s) | 1 | 2 | ..." / "e_p(t) (m) | ...".
    [[nodiscard]] std::string per_second_table (const SyncSummary& summary);

} // namespace hdt

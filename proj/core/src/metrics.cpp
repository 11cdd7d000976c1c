#include "hdt/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace hdt
{
    void TruthBuffer::push (double t, const VehicleState& state)
    {
        if (!samples_.empty () && t < samples_.back ().first)
            throw std::invalid_argument ("truth samples must be time ordered");
        samples_.emplace_back (t, state);
        while (!samples_.empty () && samples_.front ().first < t - retention_)
            samples_.pop_front ();
    }

    std::optional<std::pair<double, VehicleState>> TruthBuffer::nearest (double t, double window) const
    {
        if (samples_.empty ())
            return std::nullopt;
        const auto it = std::lower_bound (samples_.begin (), samples_.end (), t,
                                          [] (const auto& s, double value) { return s.first < value; });
        std::optional<std::pair<double, VehicleState>> best;
        auto consider = [&] (auto i) {
            if (std::abs (i->first - t) <= window + 1e-9 && (!best || std::abs (i->first - t) < std::abs (best->first - t)))
                best = *i;
        };
        if (it != samples_.end ())
            consider (it);
        if (it != samples_.begin ())
            consider (std::prev (it));
        return best;
    }

    std::optional<Pose2D> TruthBuffer::pose_at (double t, double window) const
    {
        const auto match = nearest (t, window);
        if (!match)
            return std::nullopt;
        auto [ts, state] = *match;
        if (t >= ts)
            return ctrv_extrapolate (state, t - ts);
        // Backward along the same arc: reverse both rates.
        state.v = -state.v;
        state.omega = -state.omega;
        return ctrv_extrapolate (state, ts - t);
    }

    void MetricsLog::append (const MetricsRow& row)
    {
        if (!rows_.empty () && !(row.t > rows_.back ().t))
            throw std::invalid_argument ("metrics rows must be strictly increasing in time");
        rows_.push_back (row);
    }

    bool record_metrics (MetricsLog& log, const TickResult& tick, double t_report, const TruthBuffer& truth,
                         const SiteToSimTransform& transform, double window)
    {
        const auto truth_pose = tick.synchronized ? truth.pose_at (tick.t_k, window) : std::nullopt;
        if (!truth_pose)
        {
            log.count_skipped ();
            return false;
        }
        const Pose2D real = site_to_sim (*truth_pose, transform);
        const Pose2D& shadow = tick.shadow_pose;
        log.append ({t_report, real.x, real.y, shadow.x, shadow.y, sync_error (real, shadow), tick.horizon, tick.packet_age});
        return true;
    }

    SyncSummary summarize (const MetricsLog& log)
    {
        SyncSummary s;
        s.skipped = log.skipped ();
        const auto& rows = log.rows ();
        if (rows.empty ())
            return s;

        s.empty = false;
        s.count = rows.size ();
        std::vector<double> errors;
        errors.reserve (rows.size ());
        for (const auto& r : rows)
            errors.push_back (r.e_p);
        s.mean = std::accumulate (errors.begin (), errors.end (), 0.0) / static_cast<double> (errors.size ());
        s.max = *std::max_element (errors.begin (), errors.end ());

        auto sorted = errors;
        std::sort (sorted.begin (), sorted.end ());
        const auto rank = static_cast<std::size_t> (std::ceil (0.95 * static_cast<double> (sorted.size ())));
        s.p95 = sorted[std::max<std::size_t> (rank, 1) - 1];

        const auto last_second = static_cast<int> (std::floor (rows.back ().t));
        for (int sec = 1; sec <= last_second; ++sec)
        {
            const auto it = std::lower_bound (rows.begin (), rows.end (), static_cast<double> (sec),
                                              [] (const MetricsRow& r, double value) { return r.t < value; });
            auto best = it == rows.end () ? std::prev (it) : it;
            if (it != rows.begin () && it != rows.end () &&
                std::abs (std::prev (it)->t - sec) <= std::abs (it->t - sec))
                best = std::prev (it);
            s.per_second.emplace_back (best->t, best->e_p);
        }
        return s;
    }

    std::string metrics_csv (const MetricsLog& log)
    {
        std::string out = "t,x_r,y_r,x_s,y_s,e_p,dt_horizon,packet_age\n";
        char buf[256];
        for (const auto& r : log.rows ())
        {
            std::snprintf (buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.t, r.x_r, r.y_r, r.x_s, r.y_s,
                           r.e_p, r.dt_horizon, r.packet_age);
            out += buf;
        }
        return out;
    }

    std::string summary_json (const SyncSummary& s)
    {
        nlohmann::ordered_json j;
        j["empty"] = s.empty;
        j["count"] = s.count;
        j["mean"] = s.mean;
        j["max"] = s.max;
        j["p95"] = s.p95;
        j["skipped"] = s.skipped;
        j["per_second"] = nlohmann::ordered_json::array ();
        for (const auto& [t, e] : s.per_second)
            j["per_second"].push_back ({{"t", t}, {"e_p", e}});
        return j.dump (2);
    }

    std::string per_second_table (const SyncSummary& s)
    {
        if (s.empty)
            return "(no synchronization samples)\n";
        std::string head = "t (s)      ";
        std::string vals = "e_p(t) (m) ";
        char buf[32];
        for (std::size_t i = 0; i < s.per_second.size (); ++i)
        {
            std::snprintf (buf, sizeof buf, "| %5zu ", i + 1);
            head += buf;
            std::snprintf (buf, sizeof buf, "| %5.3f ", s.per_second[i].second);
            vals += buf;
        }
        return head + "|\n" + vals + "|\n";
    }

} // namespace hdt

#include "hdt/cloud_sim.hpp"

#include <cmath>

namespace hdt
{
    ScenarioConfig architecture_comparison_config (ScenarioConfig base)
    {
        base.car_to_local = {25.0, 5.0, 0.0, 0.0};
        base.local_to_car = {25.0, 5.0, 0.0, 0.0};
        base.local_to_cloud = {75.0, 10.0, 0.0, 0.0};
        base.cloud_to_local = {125.0, 10.0, 0.0, 0.0};
        base.cloud_to_local_centric = {175.0, 10.0, 0.0, 0.0};
        return base;
    }

    namespace
    {
        bool in_band (const LatencyTable& t, const Band& band) noexcept
        {
            return t.total && band.contains (t.total->mean_ms);
        }
    } // namespace

    bool LatencyTrial::edge_in_band (const Thresholds& t) const noexcept { return in_band (cloud_edge, t.cloud_edge_total_ms); }

    bool LatencyTrial::centric_in_band (const Thresholds& t) const noexcept
    {
        return in_band (cloud_centric, t.cloud_centric_total_ms);
    }

    bool LatencyTrial::ordered () const noexcept
    {
        return cloud_edge.total && cloud_centric.total && cloud_edge.total->mean_ms < cloud_centric.total->mean_ms;
    }

    bool LatencyTrials::pass () const noexcept
    {
        if (trials.empty ())
            return false;
        for (const auto& t : trials)
            if (!t.edge_in_band (thresholds) || !t.centric_in_band (thresholds) || !t.ordered ())
                return false;
        return true;
    }

    LatencyTrials run_latency_trials (const ScenarioConfig& base, int count)
    {
        LatencyTrials out;
        out.thresholds = base.thresholds;
        for (int i = 0; i < count; ++i)
        {
            auto cfg = base;
            cfg.seed = base.seed + static_cast<std::uint64_t> (i);
            cfg.topology = Topology::CloudEdge;
            const auto report = run_scenario (cfg);
            LatencyTrial trial;
            trial.seed = cfg.seed;
            if (const auto* e = report.latency_for (Topology::CloudEdge))
                trial.cloud_edge = *e;
            if (const auto* c = report.latency_for (Topology::CloudCentric))
                trial.cloud_centric = *c;
            out.trials.push_back (std::move (trial));
        }
        return out;
    }

    bool IsolationResult::pass (double tolerance) const noexcept
    {
        return !baseline.sync.empty && !disconnected.sync.empty && relative_change < tolerance;
    }

    IsolationResult run_isolation_check (const ScenarioConfig& base, double at_s)
    {
        auto cfg = base;
        cfg.topology = Topology::CloudEdge;
        RunOptions plain;
        plain.compare_topologies = false;
        RunOptions cut = plain;
        cut.disconnect_at_s = at_s;
        cut.disconnect_user = 0;

        IsolationResult r;
        r.baseline = run_scenario (cfg, plain);
        r.disconnected = run_scenario (cfg, cut);
        if (r.baseline.sync.mean > 0.0)
            r.relative_change = std::abs (r.disconnected.sync.mean - r.baseline.sync.mean) / r.baseline.sync.mean;
        return r;
    }

} // namespace hdt

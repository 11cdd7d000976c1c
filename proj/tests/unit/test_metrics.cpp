#include "hdt/metrics.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

using namespace hdt;

namespace
{
    VehicleState moving (double x, double v)
    {
        VehicleState s;
        s.pose.x = x;
        s.v = v;
        return s;
    }

    TickResult tick (double t, double x)
    {
        TickResult r;
        r.t_k = t;
        r.shadow_pose = {x, 0.0, 0.0};
        r.synchronized = true;
        return r;
    }
} // namespace

TEST (TruthBuffer, NearestWithinWindow)
{
    TruthBuffer b;
    b.push (1.00, moving (1.0, 1.0));
    b.push (1.01, moving (1.01, 1.0));
    EXPECT_EQ (b.nearest (1.004, 0.01)->first, 1.00);
    EXPECT_EQ (b.nearest (1.006, 0.01)->first, 1.01);
    EXPECT_TRUE (b.nearest (1.02, 0.01));
    EXPECT_FALSE (b.nearest (1.03, 0.01));
    EXPECT_FALSE (b.nearest (0.98, 0.01));
    EXPECT_THROW (b.push (0.5, {}), std::invalid_argument);
}

TEST (TruthBuffer, PropagatesToTickTime)
{
    TruthBuffer b;
    b.push (2.0, moving (5.0, 2.0));
    EXPECT_NEAR (b.pose_at (2.004, 0.01)->x, 5.008, 1e-12);
    EXPECT_NEAR (b.pose_at (1.996, 0.01)->x, 4.992, 1e-12);
}

TEST (TruthBuffer, Retention)
{
    TruthBuffer b (1.0);
    for (int i = 0; i <= 300; ++i)
        b.push (i * 0.01, {});
    EXPECT_LE (b.size (), 102u);
    EXPECT_FALSE (b.nearest (0.5, 0.01));
}

TEST (Metrics, RecordRowAndSkips)
{
    TruthBuffer truth;
    truth.push (1.0, moving (0.0, 0.0));
    MetricsLog log;
    EXPECT_TRUE (record_metrics (log, tick (1.0, 0.03), 1.0, truth, {}));
    auto unsync = tick (1.001, 0.0);
    unsync.synchronized = false;
    EXPECT_FALSE (record_metrics (log, unsync, 1.001, truth, {}));
    EXPECT_FALSE (record_metrics (log, tick (2.0, 0.0), 2.0, truth, {}));
    ASSERT_EQ (log.rows ().size (), 1u);
    EXPECT_NEAR (log.rows ()[0].e_p, 0.03, 1e-12);
    EXPECT_EQ (log.skipped (), 2u);
    EXPECT_THROW (log.append ({1.0}), std::invalid_argument);
}

TEST (Metrics, TruthMappedThroughTransform)
{
    TruthBuffer truth;
    truth.push (0.0, moving (1.0, 0.0));
    MetricsLog log;
    const SiteToSimTransform t{kPi / 2, 0.0, 0.0, 1};
    TickResult r = tick (0.0, 0.0);
    r.shadow_pose = {0.0, 1.0, 0.0};
    ASSERT_TRUE (record_metrics (log, r, 0.0, truth, t));
    EXPECT_NEAR (log.rows ()[0].e_p, 0.0, 1e-12);
}

TEST (Metrics, SummaryStatistics)
{
    MetricsLog log;
    for (int i = 1; i <= 100; ++i)
        log.append ({i * 0.05, 0, 0, 0, 0, i / 1000.0});
    const auto s = summarize (log);
    EXPECT_FALSE (s.empty);
    EXPECT_EQ (s.count, 100u);
    EXPECT_NEAR (s.mean, 0.0505, 1e-12);
    EXPECT_EQ (s.max, 0.1);
    EXPECT_EQ (s.p95, 0.095);
    ASSERT_EQ (s.per_second.size (), 5u);
    EXPECT_NEAR (s.per_second[0].first, 1.0, 1e-12);
    EXPECT_NEAR (s.per_second[0].second, 0.02, 1e-12);

    const auto j = nlohmann::json::parse (summary_json (s));
    EXPECT_EQ (j["count"], 100);
    EXPECT_EQ (j["per_second"].size (), 5u);
    const auto table = per_second_table (s);
    EXPECT_NE (table.find ("|     5 "), std::string::npos);
    EXPECT_NE (table.find ("0.020"), std::string::npos);
}

TEST (Metrics, EmptySummary)
{
    const auto s = summarize (MetricsLog{});
    EXPECT_TRUE (s.empty);
    EXPECT_TRUE (nlohmann::json::parse (summary_json (s))["empty"].get<bool> ());
}

TEST (Metrics, CsvFormat)
{
    MetricsLog log;
    log.append ({0.5, 1, 2, 3, 4, 0.25, 0.1, 0.05});
    EXPECT_EQ (metrics_csv (log), "t,x_r,y_r,x_s,y_s,e_p,dt_horizon,packet_age\n"
                                  "0.500000,1.000000,2.000000,3.000000,4.000000,0.250000,0.100000,0.050000\n");
}

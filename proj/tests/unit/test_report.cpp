#include "hdt/report.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hdt;

namespace
{
    const RunReport& edge_report ()
    {
        static const RunReport r = [] {
            ScenarioConfig c;
            c.duration_s = 8.0;
            c.topology = Topology::CloudEdge;
            return run_scenario (c);
        }();
        return r;
    }

    std::string slurp (const std::filesystem::path& p)
    {
        std::ifstream in (p);
        std::stringstream ss;
        ss << in.rdbuf ();
        return ss.str ();
    }
} // namespace

TEST (Report, SummaryDocument)
{
    const auto& r = edge_report ();
    const auto j = nlohmann::json::parse (summary_document (r));
    EXPECT_EQ (j["topology"], "cloud-edge");
    EXPECT_EQ (j["pass"], r.pass ());
    EXPECT_EQ (j["sync"]["count"], r.sync.count);
    EXPECT_TRUE (j["sync"].contains ("max_packet_age"));
    EXPECT_EQ (j["gateway"]["accepted"], r.gateway.accepted);
    EXPECT_EQ (j["consistency"]["mismatches"], 0);
    EXPECT_EQ (config_from_json (j["config"].dump ()), r.config);
}

TEST (Report, LatencyDocumentStatesDefinition)
{
    const auto j = nlohmann::json::parse (latency_document (edge_report ()));
    EXPECT_EQ (j["definition"], kTotalDefinition);
    ASSERT_EQ (j["architectures"].size (), 2u);
    EXPECT_EQ (j["architectures"][0]["topology"], "cloud-edge");
    EXPECT_TRUE (j["architectures"][0]["total"].is_object ());
    EXPECT_TRUE (j["architectures"][0]["hop_sum_ms"].is_number ());
}

TEST (Report, TextContainsTables)
{
    const auto text = render_text (edge_report ());
    EXPECT_NE (text.find ("e_p(t) (m)"), std::string::npos);
    EXPECT_NE (text.find ("cloud-centric"), std::string::npos);
    EXPECT_NE (text.find ("total"), std::string::npos);

    ScenarioConfig solo;
    solo.duration_s = 3.0;
    const auto table = render_latency_table (run_scenario (solo).latency);
    EXPECT_NE (table.find ("unavailable"), std::string::npos);
}

TEST (Report, WritesOutputFiles)
{
    const auto dir = std::filesystem::temp_directory_path () / "hdt-report-test";
    std::filesystem::remove_all (dir);
    const auto& r = edge_report ();
    write_outputs (r, dir);
    EXPECT_EQ (slurp (dir / "metrics.csv"), metrics_csv (r.log));
    EXPECT_EQ (slurp (dir / "summary.json"), summary_document (r));
    EXPECT_EQ (slurp (dir / "latency.json"), latency_document (r));
    std::filesystem::remove_all (dir);
}

TEST (Report, TrialsTable)
{
    ScenarioConfig c;
    c.duration_s = 5.0;
    const auto trials = run_latency_trials (architecture_comparison_config (c), 2);
    const auto text = render_trials (trials);
    EXPECT_NE (text.find (std::to_string (c.seed + 1)), std::string::npos);
    EXPECT_NE (text.find (trials.pass () ? "PASS" : "FAIL"), std::string::npos);
}

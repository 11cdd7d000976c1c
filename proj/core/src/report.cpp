#include "hdt/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace hdt
{
    using ojson = nlohmann::ordered_json;

    namespace
    {
        ojson hop_json (const std::optional<HopStats>& h)
        {
            if (!h)
                return nullptr;
            return ojson{{"samples", h->samples}, {"mean_ms", h->mean_ms}, {"min_ms", h->min_ms},
                         {"max_ms", h->max_ms},   {"p95_ms", h->p95_ms}};
        }

        std::string cell (const std::optional<HopStats>& h)
        {
            if (!h)
                return "unavailable";
            char buf[64];
            std::snprintf (buf, sizeof buf, "%.1f ms (p95 %.1f)", h->mean_ms, h->p95_ms);
            return buf;
        }

        void write_file (const std::filesystem::path& path, const std::string& text)
        {
            std::ofstream out (path, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error ("cannot write " + path.string ());
            out << text;
        }
    } // namespace

    std::string summary_document (const RunReport& r)
    {
        ojson j;
        j["scenario"] = r.config.name;
        j["topology"] = std::string (to_string (r.config.topology));
        j["seed"] = r.config.seed;
        j["pass"] = r.pass ();
        j["failures"] = r.failures;
        j["sync"] = ojson::parse (summary_json (r.sync));
        double max_age = 0.0;
        for (const auto& row : r.log.rows ())
            max_age = std::max (max_age, row.packet_age);
        j["sync"]["max_packet_age"] = max_age;
        j["calibration"] = {{"delta_s", r.calibration.delta_s},
                            {"calibrated", r.calibration.calibrated},
                            {"probes_sent", r.calibration.probes_sent},
                            {"probes_answered", r.calibration.probes_answered}};
        j["gateway"] = {{"received", r.gateway.received},   {"accepted", r.gateway.accepted},
                        {"dropped", r.gateway.dropped},     {"filtered", r.gateway.filtered},
                        {"malformed", r.gateway.malformed}, {"latency", hop_json (r.gateway_latency)}};
        j["links"] = {{"car_to_local", {{"sent", r.car_to_local.sent}, {"lost", r.car_to_local.lost}, {"noise", r.car_to_local.noise}}},
                      {"local_to_car", {{"sent", r.local_to_car.sent}, {"lost", r.local_to_car.lost}, {"noise", r.local_to_car.noise}}}};
        j["plant_rejected_frames"] = r.plant_rejected_frames;
        if (r.consistency)
        {
            ojson received = ojson::object ();
            for (const auto& [id, n] : r.consistency->received)
                received[std::to_string (id)] = n;
            j["consistency"] = {{"users", r.consistency->users},
                                {"seqs_compared", r.consistency->seqs_compared},
                                {"mismatches", r.consistency->mismatches},
                                {"received", received}};
        }
        j["config"] = ojson::parse (config_to_json (r.config));
        return j.dump (2) + "\n";
    }

    std::string latency_document (const RunReport& r)
    {
        ojson j;
        j["definition"] = kTotalDefinition;
        j["architectures"] = ojson::array ();
        for (const auto& t : r.latency)
        {
            ojson a;
            a["topology"] = std::string (to_string (t.topology));
            a["car_to_local"] = hop_json (t.car_to_local);
            a["local_to_cloud"] = hop_json (t.local_to_cloud);
            a["cloud_to_local"] = hop_json (t.cloud_to_local);
            a["total"] = hop_json (t.total);
            a["hop_sum_ms"] = t.hop_sum_ms ? ojson (*t.hop_sum_ms) : ojson (nullptr);
            j["architectures"].push_back (std::move (a));
        }
        return j.dump (2) + "\n";
    }

    std::string render_latency_table (const std::vector<LatencyTable>& tables)
    {
        std::string out = std::string ("Latency (") + kTotalDefinition + ")\n";
        char buf[256];
        std::snprintf (buf, sizeof buf, "%-24s", "");
        out += buf;
        for (const auto& t : tables)
        {
            std::snprintf (buf, sizeof buf, "| %-26s", std::string (to_string (t.topology)).c_str ());
            out += buf;
        }
        out += "|\n";
        auto row = [&] (const char* name, auto pick) {
            std::snprintf (buf, sizeof buf, "%-24s", name);
            out += buf;
            for (const auto& t : tables)
            {
                std::snprintf (buf, sizeof buf, "| %-26s", cell (pick (t)).c_str ());
                out += buf;
            }
            out += "|\n";
        };
        row ("real car -> local", [] (const LatencyTable& t) { return t.car_to_local; });
        row ("local -> cloud", [] (const LatencyTable& t) { return t.local_to_cloud; });
        row ("cloud -> local", [] (const LatencyTable& t) { return t.cloud_to_local; });
        row ("total data transfer", [] (const LatencyTable& t) { return t.total; });
        std::snprintf (buf, sizeof buf, "%-24s", "sum of hop means");
        out += buf;
        for (const auto& t : tables)
        {
            if (t.hop_sum_ms)
                std::snprintf (buf, sizeof buf, "| %-26s", (std::to_string (static_cast<int> (std::lround (*t.hop_sum_ms))) + " ms").c_str ());
            else
                std::snprintf (buf, sizeof buf, "| %-26s", "unavailable");
            out += buf;
        }
        out += "|\n";
        return out;
    }

    std::string render_text (const RunReport& r)
    {
        std::string out;
        char buf[256];
        std::snprintf (buf, sizeof buf, "scenario %s, topology %s, seed %llu, %.0f s\n", r.config.name.c_str (),
                       std::string (to_string (r.config.topology)).c_str (),
                       static_cast<unsigned long long> (r.config.seed), r.config.duration_s);
        out += buf;
        std::snprintf (buf, sizeof buf, "delta %.4f s (%s, %d/%d probes)\n", r.calibration.delta_s,
                       r.calibration.calibrated ? "calibrated" : "fixed or fallback", r.calibration.probes_answered,
                       r.calibration.probes_sent);
        out += buf;
        out += "\nPosition error of the shadow vehicle\n";
        out += per_second_table (r.sync);
        if (!r.sync.empty)
        {
            std::snprintf (buf, sizeof buf, "mean %.4f m, max %.4f m, p95 %.4f m over %zu ticks (%llu skipped)\n",
                           r.sync.mean, r.sync.max, r.sync.p95, r.sync.count,
                           static_cast<unsigned long long> (r.sync.skipped));
            out += buf;
        }
        std::snprintf (buf, sizeof buf,
                       "\ngateway: received %llu, accepted %llu, dropped %llu, filtered %llu, malformed %llu\n",
                       static_cast<unsigned long long> (r.gateway.received),
                       static_cast<unsigned long long> (r.gateway.accepted),
                       static_cast<unsigned long long> (r.gateway.dropped),
                       static_cast<unsigned long long> (r.gateway.filtered),
                       static_cast<unsigned long long> (r.gateway.malformed));
        out += buf;
        if (r.gateway_latency)
        {
            std::snprintf (buf, sizeof buf, "gateway latency: mean %.1f ms, max %.1f ms\n", r.gateway_latency->mean_ms,
                           r.gateway_latency->max_ms);
            out += buf;
        }
        out += "\n" + render_latency_table (r.latency);
        if (r.consistency)
        {
            std::snprintf (buf, sizeof buf, "\nconsistency: %zu users, %zu sequences, %zu mismatches\n", r.consistency->users,
                           r.consistency->seqs_compared, r.consistency->mismatches);
            out += buf;
        }
        out += r.pass () ? "\nPASS\n" : "\nFAIL\n";
        for (const auto& f : r.failures)
            out += "  " + f + "\n";
        return out;
    }

    std::string render_trials (const LatencyTrials& trials)
    {
        std::string out = std::string ("Architecture comparison (") + kTotalDefinition + ")\n";
        out += "seed  | cloud-edge total | cloud-centric total | ordered\n";
        char buf[160];
        for (const auto& t : trials.trials)
        {
            const double e = t.cloud_edge.total ? t.cloud_edge.total->mean_ms : -1.0;
            const double c = t.cloud_centric.total ? t.cloud_centric.total->mean_ms : -1.0;
            std::snprintf (buf, sizeof buf, "%-5llu | %9.1f ms%s | %12.1f ms%s | %s\n",
                           static_cast<unsigned long long> (t.seed), e, t.edge_in_band (trials.thresholds) ? "  " : " !",
                           c, t.centric_in_band (trials.thresholds) ? "  " : " !", t.ordered () ? "yes" : "no");
            out += buf;
        }
        out += trials.pass () ? "PASS\n" : "FAIL\n";
        return out;
    }

    void write_outputs (const RunReport& report, const std::filesystem::path& dir)
    {
        std::filesystem::create_directories (dir);
        write_file (dir / "metrics.csv", metrics_csv (report.log));
        write_file (dir / "summary.json", summary_document (report));
        write_file (dir / "latency.json", latency_document (report));
    }

} // namespace hdt

#include "hdt/can_codec.hpp"
#include "hdt/cloud_sim.hpp"
#include "hdt/drive_profile.hpp"
#include "hdt/gateway.hpp"
#include "hdt/plant.hpp"
#include "hdt/relay_server.hpp"
#include "hdt/report.hpp"
#include "hdt/scenario.hpp"
#include "hdt/session_client.hpp"
#include "hdt/twin_world.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace
{
    using namespace hdt;
    using Clock = std::chrono::steady_clock;

    std::atomic<bool> g_stop{false};

    void install_signal_handlers ()
    {
        std::signal (SIGINT, [] (int) { g_stop = true; });
        std::signal (SIGTERM, [] (int) { g_stop = true; });
    }

    struct Overrides
    {
        std::string config_path;
        std::optional<std::uint64_t> seed;
        std::optional<double> duration;
        std::optional<std::string> topology;
        std::optional<std::string> clock;

        void attach (CLI::App* app)
        {
            app->add_option ("-c,--config", config_path, "scenario config file (JSON)");
            app->add_option ("--seed", seed, "override scenario seed");
            app->add_option ("--duration", duration, "override duration in seconds");
            app->add_option ("--topology", topology, "standalone | cloud-edge | cloud-centric");
            app->add_option ("--clock", clock, "fast | realtime");
        }

        [[nodiscard]] ScenarioConfig load () const
        {
            auto cfg = config_path.empty () ? ScenarioConfig{} : load_config (config_path);
            if (seed)
                cfg.seed = *seed;
            if (duration)
                cfg.duration_s = *duration;
            if (topology)
                cfg.topology = parse_topology (*topology);
            if (clock)
                cfg.clock = parse_clock_mode (*clock);
            cfg.validate ();
            return cfg;
        }
    };

    std::filesystem::path output_dir (const std::string& flag)
    {
        if (!flag.empty ())
            return flag;
        if (const char* env = std::getenv ("HDT_OUTPUT_DIR"); env && *env)
            return env;
        return "hdt-out";
    }

    std::string read_file (const std::filesystem::path& p)
    {
        std::ifstream in (p, std::ios::binary);
        if (!in)
            throw std::runtime_error ("cannot read " + p.string ());
        std::stringstream ss;
        ss << in.rdbuf ();
        return ss.str ();
    }

    int cmd_run (const Overrides& o, const std::string& out_flag, bool quiet)
    {
        const auto cfg = o.load ();
        const auto report = run_scenario (cfg);
        const auto dir = output_dir (out_flag);
        write_outputs (report, dir);
        if (!quiet)
            std::cout << render_text (report) << "outputs in " << dir.string () << "\n";
        return report.pass () ? 0 : 1;
    }

    int cmd_trials (const Overrides& o, int count, double duration)
    {
        auto cfg = architecture_comparison_config (o.load ());
        if (!o.duration)
            cfg.duration_s = duration;
        const auto trials = run_latency_trials (cfg, count);
        std::cout << render_trials (trials);
        return trials.pass () ? 0 : 1;
    }

    int cmd_probe (const std::string& peer, int count, int timeout_ms)
    {
        ProbeOptions opts;
        opts.count = count;
        opts.timeout = std::chrono::milliseconds (timeout_ms);
        const auto r = probe_roundtrip (Endpoint::parse (peer), opts);
        std::printf ("probes sent %d, answered %zu, timeouts %d\n", r.sent, r.one_way_s.size (), r.timeouts);
        if (const auto m = r.median ())
        {
            std::printf ("one-way median %.3f ms\n", *m * 1e3);
            return 0;
        }
        return 1;
    }

    int cmd_calibrate (const std::string& peer, int count, double fallback)
    {
        ProbeOptions opts;
        opts.count = count;
        const auto r = probe_roundtrip (Endpoint::parse (peer), opts);
        const auto c = delta_from_probes (r.one_way_s, r.sent, fallback);
        if (!c.calibrated)
            spdlog::warn ("no probe answered, using fallback delta");
        std::printf ("%.6f\n", c.delta_s);
        return c.calibrated ? 0 : 1;
    }

    int cmd_can_dump (const std::string& matrix_path, const can::ControlCommand& cmd, const std::vector<std::string>& decode,
                      bool print_matrix)
    {
        const auto matrix = matrix_path.empty () ? can::CommunicationMatrix::default_matrix ()
                                                 : can::CommunicationMatrix::load_file (matrix_path);
        if (print_matrix)
        {
            std::cout << matrix.to_json_text () << "\n";
            return 0;
        }
        if (!decode.empty ())
        {
            int rc = 0;
            for (const auto& text : decode)
            {
                const auto colon = text.find (':');
                if (colon == std::string::npos)
                    throw CLI::ValidationError ("--decode", "expected ID:HEX");
                CanFrame f;
                f.can_id = static_cast<std::uint32_t> (std::stoul (text.substr (0, colon), nullptr, 0));
                const auto hex = text.substr (colon + 1);
                std::string digits;
                for (char ch : hex)
                    if (std::isxdigit (static_cast<unsigned char> (ch)))
                        digits += ch;
                f.dlc = static_cast<std::uint8_t> (std::min<std::size_t> (digits.size () / 2, 8));
                for (std::size_t i = 0; i < f.dlc; ++i)
                    f.data[i] = static_cast<std::uint8_t> (std::stoul (digits.substr (2 * i, 2), nullptr, 16));
                const auto d = can::decode_frame (f, matrix);
                if (const auto* ok = std::get_if<can::DecodedFrame> (&d))
                {
                    std::printf ("0x%03X %s", ok->can_id, ok->message.c_str ());
                    for (const auto& [name, value] : ok->signals)
                        std::printf (" %s=%g", name.c_str (), value);
                    std::printf ("\n");
                }
                else
                {
                    std::printf ("0x%03X rejected: %s\n", f.can_id,
                                 std::string (can::to_string (std::get<can::FrameRejection> (d))).c_str ());
                    rc = 1;
                }
            }
            return rc;
        }
        for (const auto& f : can::encode_command (cmd, matrix))
        {
            const auto* spec = matrix.find (f.can_id);
            std::printf ("0x%03X %-12s %s\n", f.can_id, spec ? spec->name.c_str () : "?", can::payload_hex (f).c_str ());
        }
        return 0;
    }

    int cmd_report (const std::string& dir_flag)
    {
        const auto dir = output_dir (dir_flag);
        const auto summary = nlohmann::json::parse (read_file (dir / "summary.json"));
        const auto latency = nlohmann::json::parse (read_file (dir / "latency.json"));

        SyncSummary s;
        const auto& sync = summary.at ("sync");
        s.empty = sync.at ("empty").get<bool> ();
        s.count = sync.at ("count").get<std::size_t> ();
        s.mean = sync.at ("mean").get<double> ();
        s.max = sync.at ("max").get<double> ();
        s.p95 = sync.at ("p95").get<double> ();
        for (const auto& p : sync.at ("per_second"))
            s.per_second.emplace_back (p.at ("t").get<double> (), p.at ("e_p").get<double> ());
        std::cout << "Position error of the shadow vehicle\n" << per_second_table (s);
        if (!s.empty)
            std::printf ("mean %.4f m, max %.4f m, p95 %.4f m\n\n", s.mean, s.max, s.p95);

        auto hop = [] (const nlohmann::json& j) -> std::optional<HopStats> {
            if (j.is_null ())
                return std::nullopt;
            HopStats h;
            h.samples = j.at ("samples").get<std::size_t> ();
            h.mean_ms = j.at ("mean_ms").get<double> ();
            h.min_ms = j.at ("min_ms").get<double> ();
            h.max_ms = j.at ("max_ms").get<double> ();
            h.p95_ms = j.at ("p95_ms").get<double> ();
            return h;
        };
        std::vector<LatencyTable> tables;
        for (const auto& a : latency.at ("architectures"))
        {
            LatencyTable t;
            t.topology = parse_topology (a.at ("topology").get<std::string> ());
            t.car_to_local = hop (a.at ("car_to_local"));
            t.local_to_cloud = hop (a.at ("local_to_cloud"));
            t.cloud_to_local = hop (a.at ("cloud_to_local"));
            t.total = hop (a.at ("total"));
            if (!a.at ("hop_sum_ms").is_null ())
                t.hop_sum_ms = a.at ("hop_sum_ms").get<double> ();
            tables.push_back (t);
        }
        std::cout << render_latency_table (tables);
        const bool pass = summary.at ("pass").get<bool> ();
        std::cout << (pass ? "PASS\n" : "FAIL\n");
        return pass ? 0 : 1;
    }

    int cmd_relay (const std::string& bind, std::uint16_t port, int ws_port, double broadcast_hz, double staleness_ms)
    {
        RelayServerOptions opts;
        opts.bind_host = bind;
        opts.tcp_port = port;
        opts.ws_port = ws_port < 0 ? std::nullopt : std::optional<std::uint16_t> (static_cast<std::uint16_t> (ws_port));
        opts.relay.broadcast_hz = broadcast_hz;
        opts.relay.staleness_us = static_cast<std::uint64_t> (staleness_ms * 1000.0);
        RelayServer server (opts);
        server.start ();
        std::printf ("relay tcp %s:%u", bind.c_str (), server.tcp_port ());
        if (opts.ws_port)
            std::printf (", websocket %s:%u", bind.c_str (), server.ws_port ());
        std::printf ("\n");
        std::fflush (stdout);
        install_signal_handlers ();
        while (!g_stop)
            std::this_thread::sleep_for (std::chrono::milliseconds (100));
        server.stop ();
        const auto st = server.stats ();
        std::printf ("broadcasts %llu, ego updates %llu, protocol errors %llu\n",
                     static_cast<unsigned long long> (st.broadcasts), static_cast<unsigned long long> (st.ego_updates),
                     static_cast<unsigned long long> (st.protocol_errors));
        return 0;
    }

    // Real-time vehicle stand-in: steps the plant, executes COMMAND datagrams, sends STATE datagrams.
    int cmd_plant (const Overrides& o, const std::string& listen, const std::string& gateway)
    {
        const auto cfg = o.load ();
        PlantConfig pc;
        pc.wheelbase = cfg.wheelbase_m;
        pc.tau_steer = cfg.tau_steer_s;
        pc.tau_accel = cfg.tau_accel_s;
        pc.max_speed = cfg.max_speed_mps;
        pc.step_hz = cfg.step_hz;
        pc.emit_hz = static_cast<int> (cfg.packet_rate_hz);
        pc.pose_noise_std = cfg.pose_noise_std_m;
        pc.heading_noise_std = cfg.heading_noise_std_rad;
        pc.seed = derive_seed (cfg.seed, 1);

        VehiclePlant plant (pc);
        std::mutex plant_mutex;
        CommandMailbox mailbox;
        GatewayEndpoint endpoint (Endpoint::parse (listen), nullptr, [&] (const CanFrame& f) { mailbox.post (f); });
        StateSender sender (
            [&] {
                std::lock_guard lock (plant_mutex);
                auto s = plant.sample_state ();
                s.timestamp_us = monotonic_us ();
                return s;
            },
            cfg.packet_rate_hz, Endpoint::parse (gateway));
        std::printf ("plant listening on port %u, sending to %s\n", endpoint.port (), gateway.c_str ());
        std::fflush (stdout);

        install_signal_handlers ();
        const auto period = std::chrono::duration_cast<Clock::duration> (std::chrono::duration<double> (1.0 / cfg.step_hz));
        auto next = Clock::now ();
        const auto end = next + std::chrono::duration_cast<Clock::duration> (std::chrono::duration<double> (cfg.duration_s));
        while (!g_stop && Clock::now () < end)
        {
            next += period;
            std::this_thread::sleep_until (next);
            const auto frames = mailbox.drain ();
            std::lock_guard lock (plant_mutex);
            if (!frames.empty ())
                plant.apply_frames (frames);
            plant.step ();
        }
        sender.stop ();
        endpoint.stop ();
        std::printf ("sent %llu states\n", static_cast<unsigned long long> (sender.sent ()));
        return 0;
    }

    // Real-time edge node: gateway, twin world, profile driver, optional leader upload.
    int cmd_twin (const Overrides& o, const std::string& listen, const std::string& plant_peer, const std::string& relay)
    {
        const auto cfg = o.load ();
        LatestStateStore store;
        GatewayEndpoint endpoint (Endpoint::parse (listen), &store);
        const auto peer = Endpoint::parse (plant_peer);

        double delta = cfg.delta_fallback_s;
        if (cfg.delta_fixed_s)
            delta = *cfg.delta_fixed_s;
        else
        {
            ProbeOptions po;
            po.count = cfg.probe_count;
            const auto r = endpoint.probe (peer, po);
            const auto c = delta_from_probes (r.one_way_s, r.sent, cfg.delta_fallback_s);
            if (!c.calibrated)
                spdlog::warn ("calibration failed, using fallback delta {:.3f} s", delta);
            delta = c.delta_s;
        }
        std::printf ("gateway on port %u, delta %.4f s\n", endpoint.port (), delta);
        std::fflush (stdout);

        TwinConfig tc;
        tc.tick_hz = cfg.tick_hz;
        tc.alpha = cfg.alpha;
        tc.delta = delta;
        tc.max_horizon = cfg.max_horizon_s;
        tc.transform = cfg.transform;
        TwinWorld world (tc);
        const auto profile = DriveProfile::make (cfg.profile, cfg.speed_mps, cfg.turn_radius_m, cfg.wheelbase_m);

        std::unique_ptr<SessionClient> leader;
        if (!relay.empty ())
        {
            const auto ep = Endpoint::parse (relay);
            SessionClientOptions so;
            so.host = ep.host;
            so.port = ep.port;
            so.role = session::Role::Leader;
            so.client_id = 1;
            leader = std::make_unique<SessionClient> (so);
            leader->on_control ([&] (const session::Control& c) { (void) world.apply_remote_control (c.target, c.to_command ()); });
            leader->start ();
        }

        install_signal_handlers ();
        const auto t_start = Clock::now ();
        const auto tick = std::chrono::duration_cast<Clock::duration> (std::chrono::duration<double> (1.0 / cfg.tick_hz));
        auto next = t_start;
        std::int64_t k = 0;
        const auto ticks_per_cmd = std::max<std::int64_t> (1, std::llround (cfg.tick_hz / 10.0));
        const auto ticks_per_upload = std::max<std::int64_t> (1, std::llround (cfg.tick_hz / cfg.upload_hz));
        while (!g_stop && std::chrono::duration<double> (Clock::now () - t_start).count () < cfg.duration_s)
        {
            const double t = static_cast<double> (monotonic_us ()) * 1e-6;
            const double elapsed = std::chrono::duration<double> (Clock::now () - t_start).count ();
            const auto latest = store.snapshot ();
            const auto r = world.render_tick (t, latest);
            if (k % ticks_per_cmd == 0)
            {
                const auto cmd = profile.command_at (elapsed, latest ? latest->state.v : 0.0);
                for (const auto& f : can::encode_command (cmd))
                    endpoint.send_to (wire::encode_command_frame (f), peer);
            }
            if (leader && r.synchronized && k % ticks_per_upload == 0)
                leader->send_ego (world.export_entities (monotonic_us ()));
            if (k % static_cast<std::int64_t> (cfg.tick_hz) == 0)
                std::printf ("t=%.1f seq=%u x=%.3f y=%.3f yaw=%.3f horizon=%.3f\n", elapsed, r.seq, r.shadow_pose.x,
                             r.shadow_pose.y, r.shadow_pose.theta, r.horizon);
            ++k;
            next += tick;
            std::this_thread::sleep_until (next);
        }
        if (leader)
            leader->stop ();
        endpoint.stop ();
        const auto c = store.counters ();
        std::printf ("received %llu, accepted %llu, dropped %llu, filtered %llu, malformed %llu\n",
                     static_cast<unsigned long long> (c.received), static_cast<unsigned long long> (c.accepted),
                     static_cast<unsigned long long> (c.dropped), static_cast<unsigned long long> (c.filtered),
                     static_cast<unsigned long long> (c.malformed));
        return 0;
    }

} // namespace

int main (int argc, char** argv)
{
    CLI::App app{"hybrid digital twin harness"};
    app.require_subcommand (0, 1);
    bool print_default = false;
    std::string log_level = "warn";
    app.add_flag ("--print-default-config", print_default, "print the annotated default scenario config");
    app.add_option ("--log-level", log_level, "trace | debug | info | warn | error");

    Overrides run_o;
    std::string run_out;
    bool run_quiet = false;
    auto* run = app.add_subcommand ("run", "run a scenario and write metrics.csv, summary.json, latency.json");
    run_o.attach (run);
    run->add_option ("-o,--out", run_out, "output directory (default: $HDT_OUTPUT_DIR or ./hdt-out)");
    run->add_flag ("-q,--quiet", run_quiet, "do not print the report");

    Overrides trials_o;
    int trials_count = 20;
    double trials_duration = 20.0;
    auto* trials = app.add_subcommand ("trials", "seeded comparison of both cloud architectures");
    trials_o.attach (trials);
    trials->add_option ("-n,--count", trials_count, "number of seeds")->check (CLI::PositiveNumber);
    trials->add_option ("--trial-duration", trials_duration, "seconds per trial when --duration is not given");

    std::string probe_peer;
    int probe_count = 20;
    int probe_timeout = 1000;
    auto* probe = app.add_subcommand ("probe", "measure one-way latency to a UDP peer by probe echo");
    probe->add_option ("peer", probe_peer, "host:port")->required ();
    probe->add_option ("-n,--count", probe_count, "probes to send");
    probe->add_option ("--timeout-ms", probe_timeout, "per-probe timeout");

    std::string cal_peer;
    int cal_count = 20;
    double cal_fallback = 0.0;
    auto* calibrate = app.add_subcommand ("calibrate", "print the lead margin for a UDP peer in seconds");
    calibrate->add_option ("peer", cal_peer, "host:port")->required ();
    calibrate->add_option ("-n,--count", cal_count, "probes to send");
    calibrate->add_option ("--fallback", cal_fallback, "delta to use when no probe is answered");

    auto* can_cmd = app.add_subcommand ("can", "CAN codec utilities");
    can_cmd->require_subcommand (1);
    std::string matrix_path;
    can::ControlCommand dump_cmd;
    std::vector<std::string> decode;
    bool print_matrix = false;
    auto* dump = can_cmd->add_subcommand ("dump", "encode a command (or decode frames) and print the payloads");
    dump->add_option ("--matrix", matrix_path, "communication matrix JSON");
    dump->add_option ("--steer", dump_cmd.steer_deg, "steering angle, degrees");
    dump->add_option ("--accel", dump_cmd.accel_mps2, "acceleration, m/s^2");
    dump->add_option ("--brake", dump_cmd.brake_pct, "brake pedal, percent");
    dump->add_flag ("--left", dump_cmd.turn_left, "left turn signal");
    dump->add_flag ("--right", dump_cmd.turn_right, "right turn signal");
    dump->add_flag ("--brake-light", dump_cmd.brake_light, "brake light");
    dump->add_flag ("--engage", dump_cmd.engage, "engage the drive-by-wire interface");
    dump->add_option ("--decode", decode, "decode ID:HEX frames instead of encoding");
    dump->add_flag ("--print-matrix", print_matrix, "print the communication matrix as JSON");

    std::string report_dir;
    auto* report = app.add_subcommand ("report", "render tables from a run's output directory");
    report->add_option ("dir", report_dir, "output directory (default: $HDT_OUTPUT_DIR or ./hdt-out)");

    std::string relay_bind = "127.0.0.1";
    std::uint16_t relay_port = 7700;
    int relay_ws = 7701;
    double relay_hz = 20.0;
    double relay_stale = 300.0;
    auto* relay = app.add_subcommand ("relay", "run the cloud relay until interrupted");
    relay->add_option ("--bind", relay_bind, "bind address");
    relay->add_option ("--port", relay_port, "TCP port (0 = ephemeral)");
    relay->add_option ("--ws-port", relay_ws, "WebSocket port (0 = ephemeral, -1 = disabled)");
    relay->add_option ("--broadcast-hz", relay_hz, "broadcast rate");
    relay->add_option ("--staleness-ms", relay_stale, "drop entities not updated for this long");

    Overrides plant_o;
    std::string plant_listen = ":7600";
    std::string plant_gateway = "127.0.0.1:7601";
    auto* plant = app.add_subcommand ("plant", "real-time vehicle stand-in over UDP");
    plant_o.attach (plant);
    plant->add_option ("--listen", plant_listen, "command/probe port");
    plant->add_option ("--gateway", plant_gateway, "where to send STATE datagrams");

    Overrides twin_o;
    std::string twin_listen = ":7601";
    std::string twin_plant = "127.0.0.1:7600";
    std::string twin_relay;
    auto* twin = app.add_subcommand ("twin", "real-time edge node: gateway, twin world and profile driver");
    twin_o.attach (twin);
    twin->add_option ("--listen", twin_listen, "gateway port");
    twin->add_option ("--plant", twin_plant, "plant command port");
    twin->add_option ("--relay", twin_relay, "relay host:port to upload the shadow vehicle as leader");

    CLI11_PARSE (app, argc, argv);
    spdlog::set_level (spdlog::level::from_str (log_level));

    try
    {
        if (print_default)
        {
            std::cout << config_to_json (ScenarioConfig{}, true) << "\n";
            return 0;
        }
        if (*run)
            return cmd_run (run_o, run_out, run_quiet);
        if (*trials)
            return cmd_trials (trials_o, trials_count, trials_duration);
        if (*probe)
            return cmd_probe (probe_peer, probe_count, probe_timeout);
        if (*calibrate)
            return cmd_calibrate (cal_peer, cal_count, cal_fallback);
        if (*dump)
            return cmd_can_dump (matrix_path, dump_cmd, decode, print_matrix);
        if (*report)
            return cmd_report (report_dir);
        if (*relay)
            return cmd_relay (relay_bind, relay_port, relay_ws, relay_hz, relay_stale);
        if (*plant)
            return cmd_plant (plant_o, plant_listen, plant_gateway);
        if (*twin)
            return cmd_twin (twin_o, twin_listen, twin_plant, twin_relay);
        std::cout << app.help ();
        return 0;
    }
    catch (const CLI::Error& e)
    {
        return app.exit (e);
    }
    catch (const std::exception& e)
    {
        std::cerr << "hdt: " << e.what () << "\n";
        return 2;
    }
}

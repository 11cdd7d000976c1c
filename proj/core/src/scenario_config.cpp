#include "hdt/scenario_config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hdt
{
    using json = nlohmann::ordered_json;

    std::string_view to_string (ClockMode m) noexcept { return m == ClockMode::Fast ? "fast" : "realtime"; }

    std::string_view to_string (Topology t) noexcept
    {
        switch (t)
        {
        case Topology::Standalone: return "standalone";
        case Topology::CloudEdge: return "cloud-edge";
        case Topology::CloudCentric: return "cloud-centric";
        }
        return "standalone";
    }

    ClockMode parse_clock_mode (std::string_view s)
    {
        if (s == "fast")
            return ClockMode::Fast;
        if (s == "realtime")
            return ClockMode::Realtime;
        throw ScenarioConfigError ("unknown clock mode '" + std::string (s) + "' (fast | realtime)");
    }

    Topology parse_topology (std::string_view s)
    {
        if (s == "standalone")
            return Topology::Standalone;
        if (s == "cloud-edge")
            return Topology::CloudEdge;
        if (s == "cloud-centric")
            return Topology::CloudCentric;
        throw ScenarioConfigError ("unknown topology '" + std::string (s) + "' (standalone | cloud-edge | cloud-centric)");
    }

    namespace
    {
        void require (bool ok, const std::string& what)
        {
            if (!ok)
                throw ScenarioConfigError ("invalid config: " + what);
        }

        void check_link (const LinkImpairment& l, const std::string& name)
        {
            require (std::isfinite (l.delay_ms) && l.delay_ms >= 0.0, name + ".delay_ms must be >= 0");
            require (std::isfinite (l.jitter_ms) && l.jitter_ms >= 0.0, name + ".jitter_ms must be >= 0");
            require (l.loss >= 0.0 && l.loss < 1.0, name + ".loss must be in [0, 1)");
            require (std::isfinite (l.noise_rate_hz) && l.noise_rate_hz >= 0.0, name + ".noise_rate_hz must be >= 0");
        }

        /// Reads the keys of one section, rejecting unknown ones.
        class Section
        {
        public:
            Section (const json& root, const char* name) : name_ (name)
            {
                const auto it = root.find (name);
                if (it == root.end ())
                    return;
                if (!it->is_object ())
                    throw ScenarioConfigError (std::string ("section '") + name + "' must be an object");
                obj_ = &*it;
            }

            /// Rejects keys nobody asked for.
            void done () const
            {
                if (!obj_)
                    return;
                for (const auto& [key, value] : obj_->items ())
                    if (!key.empty () && key[0] != '_' && !seen_.contains (key))
                        throw ScenarioConfigError ("unknown key '" + name_ + "." + key + "'");
            }

            template <typename T> void get (const char* key, T& out)
            {
                seen_.insert (key);
                if (!obj_)
                    return;
                const auto it = obj_->find (key);
                if (it == obj_->end ())
                    return;
                try
                {
                    out = it->template get<T> ();
                }
                catch (const json::exception&)
                {
                    throw ScenarioConfigError ("bad type for '" + name_ + "." + key + "'");
                }
            }

            const json* raw (const char* key)
            {
                seen_.insert (key);
                if (!obj_)
                    return nullptr;
                const auto it = obj_->find (key);
                return it == obj_->end () ? nullptr : &*it;
            }

            void link (const char* key, LinkImpairment& out)
            {
                const json* j = raw (key);
                if (!j)
                    return;
                if (!j->is_object ())
                    throw ScenarioConfigError (std::string ("link '") + key + "' must be an object");
                for (const auto& [k, v] : j->items ())
                {
                    if (!k.empty () && k[0] == '_')
                        continue;
                    if (!v.is_number ())
                        throw ScenarioConfigError ("bad type for '" + name_ + "." + key + "." + k + "'");
                    if (k == "delay_ms")
                        out.delay_ms = v.get<double> ();
                    else if (k == "jitter_ms")
                        out.jitter_ms = v.get<double> ();
                    else if (k == "loss")
                        out.loss = v.get<double> ();
                    else if (k == "noise_rate_hz")
                        out.noise_rate_hz = v.get<double> ();
                    else
                        throw ScenarioConfigError ("unknown key '" + name_ + "." + key + "." + k + "'");
                }
            }

        private:
            std::string name_;
            const json* obj_{nullptr};
            std::set<std::string> seen_;
        };

        json link_json (const LinkImpairment& l)
        {
            return {{"delay_ms", l.delay_ms}, {"jitter_ms", l.jitter_ms}, {"loss", l.loss}, {"noise_rate_hz", l.noise_rate_hz}};
        }

        Band parse_band (const json* j, Band fallback, const char* key)
        {
            if (!j)
                return fallback;
            if (!j->is_array () || j->size () != 2 || !(*j)[0].is_number () || !(*j)[1].is_number ())
                throw ScenarioConfigError (std::string ("thresholds.") + key + " must be [lo, hi]");
            return {(*j)[0].get<double> (), (*j)[1].get<double> ()};
        }
    } // namespace

    void ScenarioConfig::validate () const
    {
        require (std::isfinite (duration_s) && duration_s > 0.0, "scenario.duration_s must be > 0");
        require (std::isfinite (speed_mps) && speed_mps >= 0.0, "profile.speed_mps must be >= 0");
        require (std::isfinite (turn_radius_m) && turn_radius_m > 0.0, "profile.turn_radius_m must be > 0");
        require (wheelbase_m > 0.0, "plant.wheelbase_m must be > 0");
        require (tau_steer_s >= 0.0 && tau_accel_s >= 0.0, "plant time constants must be >= 0");
        require (max_speed_mps > 0.0, "plant.max_speed_mps must be > 0");
        require (step_hz > 0, "plant.step_hz must be > 0");
        require (std::isfinite (packet_rate_hz) && packet_rate_hz > 0.0, "plant.packet_rate_hz must be > 0");
        require (packet_rate_hz <= step_hz, "plant.packet_rate_hz must not exceed plant.step_hz");
        require (pose_noise_std_m >= 0.0 && heading_noise_std_rad >= 0.0, "noise std must be >= 0");
        check_link (car_to_local, "links.car_to_local");
        check_link (local_to_car, "links.local_to_car");
        check_link (local_to_cloud, "links.local_to_cloud");
        check_link (cloud_to_local, "links.cloud_to_local");
        check_link (cloud_to_local_centric, "links.cloud_to_local_centric");
        require (std::isfinite (tick_hz) && tick_hz > 0.0, "twin.tick_hz must be > 0");
        require (alpha >= 0.0 && alpha <= 1.0, "twin.alpha must be in [0, 1]");
        require (!delta_fixed_s || (std::isfinite (*delta_fixed_s) && *delta_fixed_s >= 0.0), "twin.delta must be >= 0");
        require (std::isfinite (delta_fallback_s) && delta_fallback_s >= 0.0, "twin.delta_fallback_s must be >= 0");
        require (max_horizon_s > 0.0, "twin.max_horizon_s must be > 0");
        require (match_window_s > 0.0, "twin.match_window_s must be > 0");
        require (probe_count >= 0, "twin.probe_count must be >= 0");
        require (transform.yaw_sign == 1 || transform.yaw_sign == -1, "twin.transform.yaw_sign must be +1 or -1");
        require (broadcast_hz > 0.0 && upload_hz > 0.0 && ping_hz > 0.0, "cloud rates must be > 0");
        require (staleness_ms > 0.0, "cloud.staleness_ms must be > 0");
        require (users >= 0 && users <= 16, "cloud.users must be in [0, 16]");
        require (thresholds.cloud_edge_total_ms.lo <= thresholds.cloud_edge_total_ms.hi &&
                     thresholds.cloud_centric_total_ms.lo <= thresholds.cloud_centric_total_ms.hi,
                 "threshold bands must be [lo, hi] with lo <= hi");
    }

    ScenarioConfig config_from_json (std::string_view text)
    {
        const auto root = json::parse (text, nullptr, false, true);
        if (root.is_discarded () || !root.is_object ())
            throw ScenarioConfigError ("config is not a JSON object");

        static const std::set<std::string> sections{"scenario", "profile", "plant", "links", "twin", "cloud", "thresholds"};
        for (const auto& [key, value] : root.items ())
            if (!key.empty () && key[0] != '_' && !sections.contains (key))
                throw ScenarioConfigError ("unknown section '" + key + "'");

        ScenarioConfig c;
        {
            Section s (root, "scenario");
            s.get ("name", c.name);
            s.get ("duration_s", c.duration_s);
            s.get ("seed", c.seed);
            std::string clock{to_string (c.clock)};
            std::string topology{to_string (c.topology)};
            s.get ("clock", clock);
            s.get ("topology", topology);
            c.clock = parse_clock_mode (clock);
            c.topology = parse_topology (topology);
            s.done ();
        }
        {
            Section s (root, "profile");
            s.get ("kind", c.profile);
            s.get ("speed_mps", c.speed_mps);
            s.get ("turn_radius_m", c.turn_radius_m);
            s.done ();
        }
        {
            Section s (root, "plant");
            s.get ("wheelbase_m", c.wheelbase_m);
            s.get ("tau_steer_s", c.tau_steer_s);
            s.get ("tau_accel_s", c.tau_accel_s);
            s.get ("max_speed_mps", c.max_speed_mps);
            s.get ("step_hz", c.step_hz);
            s.get ("packet_rate_hz", c.packet_rate_hz);
            s.get ("pose_noise_std_m", c.pose_noise_std_m);
            s.get ("heading_noise_std_rad", c.heading_noise_std_rad);
            s.done ();
        }
        {
            Section s (root, "links");
            s.link ("car_to_local", c.car_to_local);
            s.link ("local_to_car", c.local_to_car);
            s.link ("local_to_cloud", c.local_to_cloud);
            s.link ("cloud_to_local", c.cloud_to_local);
            s.link ("cloud_to_local_centric", c.cloud_to_local_centric);
            s.done ();
        }
        {
            Section s (root, "twin");
            s.get ("tick_hz", c.tick_hz);
            s.get ("alpha", c.alpha);
            if (const json* d = s.raw ("delta"))
            {
                if (d->is_string () && d->get<std::string> () == "auto")
                    c.delta_fixed_s.reset ();
                else if (d->is_number ())
                    c.delta_fixed_s = d->get<double> ();
                else
                    throw ScenarioConfigError ("twin.delta must be \"auto\" or seconds");
            }
            s.get ("delta_fallback_s", c.delta_fallback_s);
            s.get ("max_horizon_s", c.max_horizon_s);
            s.get ("match_window_s", c.match_window_s);
            s.get ("probe_count", c.probe_count);
            if (const json* t = s.raw ("transform"))
            {
                if (!t->is_object ())
                    throw ScenarioConfigError ("twin.transform must be an object");
                try
                {
                    c.transform.rotation = t->value ("rotation_rad", c.transform.rotation);
                    c.transform.translation_x = t->value ("translation_x", c.transform.translation_x);
                    c.transform.translation_y = t->value ("translation_y", c.transform.translation_y);
                    c.transform.yaw_sign = t->value ("yaw_sign", c.transform.yaw_sign);
                }
                catch (const json::exception&)
                {
                    throw ScenarioConfigError ("bad type in twin.transform");
                }
            }
            s.done ();
        }
        {
            Section s (root, "cloud");
            s.get ("broadcast_hz", c.broadcast_hz);
            s.get ("upload_hz", c.upload_hz);
            s.get ("staleness_ms", c.staleness_ms);
            s.get ("users", c.users);
            s.get ("ping_hz", c.ping_hz);
            s.done ();
        }
        {
            Section s (root, "thresholds");
            s.get ("mean_ep_m", c.thresholds.mean_ep_m);
            s.get ("max_ep_m", c.thresholds.max_ep_m);
            s.get ("gateway_latency_ms", c.thresholds.gateway_latency_ms);
            c.thresholds.cloud_edge_total_ms =
                parse_band (s.raw ("cloud_edge_total_ms"), c.thresholds.cloud_edge_total_ms, "cloud_edge_total_ms");
            c.thresholds.cloud_centric_total_ms =
                parse_band (s.raw ("cloud_centric_total_ms"), c.thresholds.cloud_centric_total_ms, "cloud_centric_total_ms");
            s.done ();
        }
        c.validate ();
        return c;
    }

    ScenarioConfig load_config (const std::string& path)
    {
        std::ifstream in (path);
        if (!in)
            throw ScenarioConfigError ("cannot open config '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf ();
        return config_from_json (ss.str ());
    }

    std::string config_to_json (const ScenarioConfig& c, bool annotated)
    {
        json root;
        auto doc = [&] (json& section, const char* text) {
            if (annotated)
                section["_doc"] = text;
        };

        json scenario;
        doc (scenario, "duration in seconds of simulated time; clock fast = virtual time, realtime = paced to wall "
                       "clock; topology standalone | cloud-edge | cloud-centric");
        scenario["name"] = c.name;
        scenario["duration_s"] = c.duration_s;
        scenario["seed"] = c.seed;
        scenario["clock"] = to_string (c.clock);
        scenario["topology"] = to_string (c.topology);
        root["scenario"] = scenario;

        json profile;
        doc (profile, "kind straight | circle | figure-eight | stop-and-go");
        profile["kind"] = c.profile;
        profile["speed_mps"] = c.speed_mps;
        profile["turn_radius_m"] = c.turn_radius_m;
        root["profile"] = profile;

        json plant;
        doc (plant, "kinematic bicycle with first-order steering and acceleration lag; state packets at packet_rate_hz");
        plant["wheelbase_m"] = c.wheelbase_m;
        plant["tau_steer_s"] = c.tau_steer_s;
        plant["tau_accel_s"] = c.tau_accel_s;
        plant["max_speed_mps"] = c.max_speed_mps;
        plant["step_hz"] = c.step_hz;
        plant["packet_rate_hz"] = c.packet_rate_hz;
        plant["pose_noise_std_m"] = c.pose_noise_std_m;
        plant["heading_noise_std_rad"] = c.heading_noise_std_rad;
        root["plant"] = plant;

        json links;
        doc (links, "per-hop impairment: fixed delay plus uniform +-jitter, Bernoulli loss, foreign datagrams per "
                    "second; cloud_to_local_centric is the downlink of the cloud-centric baseline");
        links["car_to_local"] = link_json (c.car_to_local);
        links["local_to_car"] = link_json (c.local_to_car);
        links["local_to_cloud"] = link_json (c.local_to_cloud);
        links["cloud_to_local"] = link_json (c.cloud_to_local);
        links["cloud_to_local_centric"] = link_json (c.cloud_to_local_centric);
        root["links"] = links;

        json twin;
        doc (twin, "delta is \"auto\" (median probe one-way latency) or a fixed lead margin in seconds; "
                   "delta_fallback_s is used when every probe is lost");
        twin["tick_hz"] = c.tick_hz;
        twin["alpha"] = c.alpha;
        if (c.delta_fixed_s)
            twin["delta"] = *c.delta_fixed_s;
        else
            twin["delta"] = "auto";
        twin["delta_fallback_s"] = c.delta_fallback_s;
        twin["max_horizon_s"] = c.max_horizon_s;
        twin["match_window_s"] = c.match_window_s;
        twin["probe_count"] = c.probe_count;
        twin["transform"] = {{"rotation_rad", c.transform.rotation},
                             {"translation_x", c.transform.translation_x},
                             {"translation_y", c.transform.translation_y},
                             {"yaw_sign", c.transform.yaw_sign}};
        root["twin"] = twin;

        json cloud;
        doc (cloud, "relay broadcast rate, leader/user upload rate, entity staleness window and number of user clients");
        cloud["broadcast_hz"] = c.broadcast_hz;
        cloud["upload_hz"] = c.upload_hz;
        cloud["staleness_ms"] = c.staleness_ms;
        cloud["users"] = c.users;
        cloud["ping_hz"] = c.ping_hz;
        root["cloud"] = cloud;

        json thresholds;
        doc (thresholds, "pass/fail limits applied to the run report; bands are [lo, hi] in milliseconds");
        thresholds["mean_ep_m"] = c.thresholds.mean_ep_m;
        thresholds["max_ep_m"] = c.thresholds.max_ep_m;
        thresholds["gateway_latency_ms"] = c.thresholds.gateway_latency_ms;
        thresholds["cloud_edge_total_ms"] = {c.thresholds.cloud_edge_total_ms.lo, c.thresholds.cloud_edge_total_ms.hi};
        thresholds["cloud_centric_total_ms"] = {c.thresholds.cloud_centric_total_ms.lo, c.thresholds.cloud_centric_total_ms.hi};
        root["thresholds"] = thresholds;

        return root.dump (2) + "\n";
    }

} // namespace hdt

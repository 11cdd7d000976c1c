#include "hdt/scenario.hpp"

#include "hdt/drive_profile.hpp"
#include "hdt/gateway.hpp"
#include "hdt/plant.hpp"
#include "hdt/relay_core.hpp"
#include "hdt/session.hpp"
#include "hdt/twin_world.hpp"
#include "hdt/wire.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace hdt
{
    std::uint64_t derive_seed (std::uint64_t seed, std::uint64_t stream) noexcept
    {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::optional<HopStats> hop_stats (const std::vector<double>& samples_ms)
    {
        if (samples_ms.empty ())
            return std::nullopt;
        auto sorted = samples_ms;
        std::sort (sorted.begin (), sorted.end ());
        HopStats h;
        h.samples = sorted.size ();
        h.mean_ms = std::accumulate (sorted.begin (), sorted.end (), 0.0) / static_cast<double> (sorted.size ());
        h.min_ms = sorted.front ();
        h.max_ms = sorted.back ();
        const auto rank = static_cast<std::size_t> (std::ceil (0.95 * static_cast<double> (sorted.size ())));
        h.p95_ms = sorted[std::max<std::size_t> (rank, 1) - 1];
        return h;
    }

    CalibrationResult delta_from_probes (const std::vector<double>& one_way_s, int sent, double fallback)
    {
        CalibrationResult c;
        c.probes_sent = sent;
        c.probes_answered = static_cast<int> (one_way_s.size ());
        if (one_way_s.empty ())
        {
            c.delta_s = fallback;
            return c;
        }
        auto sorted = one_way_s;
        std::sort (sorted.begin (), sorted.end ());
        const auto n = sorted.size ();
        const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        c.median_one_way_s = median;
        c.delta_s = median;
        c.calibrated = true;
        return c;
    }

    const LatencyTable* RunReport::latency_for (Topology t) const noexcept
    {
        for (const auto& l : latency)
            if (l.topology == t)
                return &l;
        return nullptr;
    }

    namespace
    {
        constexpr Micros kProbeSpacing = 20'000;
        constexpr Micros kProbeTimeout = 1'000'000;
        constexpr double kDriverHz = 10.0;
        constexpr std::uint32_t kLeaderClientId = 1;
        constexpr std::uint32_t kUserClientBase = 100;
        constexpr std::uint32_t kUserVehicleBase = 1000;
        constexpr SessionId kLeaderSession = 1;

        double median_of (std::vector<double> v)
        {
            std::sort (v.begin (), v.end ());
            const auto n = v.size ();
            return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }

        LinkImpairment stream_link (LinkImpairment l)
        {
            l.noise_rate_hz = 0.0; // foreign datagrams have no meaning inside a TCP stream
            return l;
        }

        struct UserNode
        {
            std::size_t index{0};
            std::uint32_t client_id{0};
            std::uint32_t vehicle_id{0};
            SessionId sid{0};
            std::unique_ptr<ImpairedLink> up;
            std::unique_ptr<ImpairedLink> down;
            session::FrameDecoder relay_side;
            session::FrameDecoder client_side;
            std::optional<session::GlobalWorldState> pending;
            std::uint64_t last_applied_seq{0};
            std::unique_ptr<TwinWorld> world;
            std::map<std::uint32_t, EntityState> mirror;
            std::uint64_t last_shadow_src{0};
            std::map<std::uint64_t, std::uint64_t> stimulus; // control issued_us -> shadow source ts
            std::uint64_t last_own_tag{0};
            std::map<std::uint64_t, std::uint64_t> hashes;   // broadcast seq -> frame hash
            std::uint64_t received{0};
            bool connected{true};
        };

        class Simulation
        {
        public:
            Simulation (const ScenarioConfig& cfg, Topology topology, const RunOptions& options)
                : cfg_ (cfg),
                  topology_ (topology),
                  options_ (options),
                  loop_ (cfg.clock == ClockMode::Realtime),
                  plant_ (plant_config (cfg)),
                  profile_ (DriveProfile::make (cfg.profile, cfg.speed_mps, cfg.turn_radius_m, cfg.wheelbase_m)),
                  truth_ (5.0)
            {
            }

            RunReport run ();

        private:
            static PlantConfig plant_config (const ScenarioConfig& cfg)
            {
                PlantConfig p;
                p.wheelbase = cfg.wheelbase_m;
                p.tau_steer = cfg.tau_steer_s;
                p.tau_accel = cfg.tau_accel_s;
                p.max_speed = cfg.max_speed_mps;
                p.step_hz = cfg.step_hz;
                p.emit_hz = std::max (1, static_cast<int> (std::lround (cfg.packet_rate_hz)));
                p.pose_noise_std = cfg.pose_noise_std_m;
                p.heading_noise_std = cfg.heading_noise_std_rad;
                p.seed = derive_seed (cfg.seed, 1);
                return p;
            }

            [[nodiscard]] bool cloud () const noexcept { return topology_ != Topology::Standalone; }
            [[nodiscard]] bool centric () const noexcept { return topology_ == Topology::CloudCentric; }
            [[nodiscard]] std::uint64_t now_us () const noexcept { return static_cast<std::uint64_t> (loop_.now ()); }
            [[nodiscard]] double now_s () const noexcept { return us_to_seconds (loop_.now ()); }

            void build_links ();
            void calibrate ();
            void start ();
            void plant_step (std::int64_t k);
            void plant_receive (const std::vector<std::uint8_t>& bytes);
            void local_receive (const std::vector<std::uint8_t>& bytes);
            void drive ();
            void world_tick ();
            void leader_receive (const std::vector<std::uint8_t>& bytes);
            void relay_receive (SessionId sid, session::FrameDecoder& decoder, const std::vector<std::uint8_t>& bytes);
            void relay_send (SessionId sid, std::vector<std::uint8_t> frame);
            void relay_disconnect (SessionId sid);
            void host_message (const HostMessage& m);
            void broadcast ();
            void user_receive (UserNode& u, const std::vector<std::uint8_t>& bytes);
            void user_tick (UserNode& u);
            void user_upload (UserNode& u);
            void disconnect_user (std::size_t index);
            [[nodiscard]] std::vector<EntityState> hosted_entities () const;
            RunReport finish ();

            ScenarioConfig cfg_;
            Topology topology_;
            RunOptions options_;
            EventLoop loop_;
            Micros t0_{0};

            // vehicle side
            VehiclePlant plant_;
            CommandMailbox mailbox_;
            DriveProfile profile_;
            TruthBuffer truth_;
            std::int64_t emitted_{-1};

            // car <-> local node
            std::unique_ptr<ImpairedLink> car_up_;
            std::unique_ptr<ImpairedLink> car_down_;
            LatestStateStore local_store_;
            std::vector<double> probe_one_way_s_;
            int probes_sent_{0};
            std::vector<double> gateway_ms_;

            // world host: local node, or the relay in the cloud-centric baseline
            std::unique_ptr<TwinWorld> world_;
            LatestStateStore cloud_store_;
            MetricsLog log_;
            CalibrationResult calibration_;

            // leader session
            std::optional<RelayCore> relay_;
            std::unique_ptr<ImpairedLink> leader_up_;
            std::unique_ptr<ImpairedLink> leader_down_;
            session::FrameDecoder leader_relay_side_;
            session::FrameDecoder leader_client_side_;
            std::uint32_t last_uploaded_seq_{0};
            Micros last_upload_{-1};
            std::vector<double> ping_up_ms_;
            std::vector<double> ping_down_ms_;

            // cloud-hosted user vehicles: pending and applied control tags
            std::map<std::uint32_t, std::uint64_t> pending_tags_;
            std::map<std::uint32_t, std::uint64_t> applied_tags_;

            std::vector<std::unique_ptr<UserNode>> users_;
            std::vector<double> total_ms_;
        };

        void Simulation::build_links ()
        {
            car_up_ = std::make_unique<ImpairedLink> (loop_, cfg_.car_to_local, derive_seed (cfg_.seed, 2),
                                                      [this] (const auto& b) { local_receive (b); });
            car_down_ = std::make_unique<ImpairedLink> (loop_, cfg_.local_to_car, derive_seed (cfg_.seed, 3),
                                                        [this] (const auto& b) { plant_receive (b); });
            if (!cloud ())
                return;

            relay_.emplace (RelayConfig{cfg_.broadcast_hz, static_cast<std::uint64_t> (cfg_.staleness_ms * 1000.0)});
            const auto down_cfg = stream_link (centric () ? cfg_.cloud_to_local_centric : cfg_.cloud_to_local);
            const auto up_cfg = stream_link (cfg_.local_to_cloud);
            leader_up_ = std::make_unique<ImpairedLink> (
                loop_, up_cfg, derive_seed (cfg_.seed, 4),
                [this] (const auto& b) { relay_receive (kLeaderSession, leader_relay_side_, b); }, true);
            leader_down_ = std::make_unique<ImpairedLink> (loop_, down_cfg, derive_seed (cfg_.seed, 5),
                                                           [this] (const auto& b) { leader_receive (b); }, true);
            relay_->on_connect (kLeaderSession);

            for (int i = 0; i < cfg_.users; ++i)
            {
                auto u = std::make_unique<UserNode> ();
                u->index = static_cast<std::size_t> (i);
                u->client_id = kUserClientBase + static_cast<std::uint32_t> (i);
                u->vehicle_id = kUserVehicleBase + static_cast<std::uint32_t> (i);
                u->sid = kLeaderSession + 1 + static_cast<SessionId> (i);
                auto* raw = u.get ();
                u->up = std::make_unique<ImpairedLink> (
                    loop_, up_cfg, derive_seed (cfg_.seed, 10 + 2 * static_cast<std::uint64_t> (i)),
                    [this, raw] (const auto& b) { relay_receive (raw->sid, raw->relay_side, b); }, true);
                u->down = std::make_unique<ImpairedLink> (
                    loop_, down_cfg, derive_seed (cfg_.seed, 11 + 2 * static_cast<std::uint64_t> (i)),
                    [this, raw] (const auto& b) { user_receive (*raw, b); }, true);
                relay_->on_connect (u->sid);
                users_.push_back (std::move (u));
            }
        }

        void Simulation::calibrate ()
        {
            for (int i = 0; i < cfg_.probe_count; ++i)
                loop_.at (kProbeSpacing * i, [this, i] {
                    ++probes_sent_;
                    car_down_->send (wire::to_datagram (
                        wire::encode_probe ({static_cast<std::uint32_t> (i), now_us (), false})));
                });
            if (cloud ())
            {
                leader_up_->send (session::encode_frame (session::Join{session::Role::Leader, kLeaderClientId}));
                for (auto& u : users_)
                    u->up->send (session::encode_frame (session::Join{session::Role::User, u->client_id}));
                loop_.every (cfg_.ping_hz, 0, [this] (std::int64_t) {
                    leader_up_->send (session::encode_frame (session::Ping{now_us ()}));
                    return true;
                });
            }

            const Micros preamble = cfg_.probe_count > 0 ? kProbeSpacing * cfg_.probe_count + kProbeTimeout : 0;
            loop_.run_until (preamble);
            t0_ = preamble;

            calibration_ = delta_from_probes (probe_one_way_s_, probes_sent_, cfg_.delta_fallback_s);
            if (cfg_.delta_fixed_s)
            {
                calibration_.delta_s = *cfg_.delta_fixed_s;
                calibration_.calibrated = false;
            }
            else if (!calibration_.calibrated)
                spdlog::warn ("calibration: no probe answered, using fallback delta {:.3f} s", cfg_.delta_fallback_s);
            else if (centric () && !ping_up_ms_.empty ())
                calibration_.delta_s += median_of (ping_up_ms_) * 1e-3; // the world sits one more hop away
        }

        void Simulation::start ()
        {
            TwinConfig tc;
            tc.tick_hz = cfg_.tick_hz;
            tc.alpha = cfg_.alpha;
            tc.delta = calibration_.delta_s;
            tc.max_horizon = cfg_.max_horizon_s;
            tc.transform = cfg_.transform;
            tc.spawn = site_to_sim ({0.0, 0.0, 0.0}, cfg_.transform);
            world_ = std::make_unique<TwinWorld> (tc);

            if (centric ())
                for (const auto& u : users_)
                {
                    VirtualVehicle v;
                    v.id = u->vehicle_id;
                    v.pose = {20.0 * static_cast<double> (u->index + 1), 30.0, 0.0};
                    v.controller = ControllerKind::Remote;
                    world_->spawn_virtual (std::move (v));
                }

            // The vehicle is already driving the profile when measurement starts.
            const auto initial = profile_.command_at (0.0, cfg_.speed_mps);
            plant_.apply_frames (can::encode_command (initial));
            plant_.reset ({0.0, 0.0, 0.0}, profile_.target_speed_at (0.0), initial.steer_deg);

            loop_.every (cfg_.step_hz, t0_, [this] (std::int64_t k) {
                plant_step (k);
                return true;
            });
            loop_.every (kDriverHz, t0_, [this] (std::int64_t) {
                drive ();
                return true;
            });
            loop_.every (cfg_.tick_hz, t0_, [this] (std::int64_t) {
                world_tick ();
                return true;
            });
            if (!cloud ())
                return;

            loop_.every (cfg_.broadcast_hz, t0_, [this] (std::int64_t) {
                broadcast ();
                return true;
            });
            for (auto& u : users_)
            {
                auto* raw = u.get ();
                if (!centric ())
                {
                    TwinConfig uc = tc;
                    uc.delta = 0.0;
                    raw->world = std::make_unique<TwinWorld> (uc);
                    VirtualVehicle ego;
                    ego.id = raw->vehicle_id;
                    ego.pose = {20.0 * static_cast<double> (raw->index + 1), 30.0, 0.0};
                    ego.v = 2.0;
                    ego.controller = ControllerKind::Scripted;
                    ego.script = [] (double) {
                        can::ControlCommand c;
                        c.engage = true;
                        c.steer_deg = 10.0;
                        return c;
                    };
                    raw->world->spawn_virtual (std::move (ego));
                    loop_.every (cfg_.upload_hz, t0_, [this, raw] (std::int64_t) {
                        user_upload (*raw);
                        return raw->connected;
                    });
                }
                loop_.every (cfg_.tick_hz, t0_, [this, raw] (std::int64_t) {
                    user_tick (*raw);
                    return raw->connected;
                });
            }
            if (options_.disconnect_at_s && options_.disconnect_user < users_.size ())
                loop_.at (t0_ + seconds_to_us (*options_.disconnect_at_s),
                          [this] { disconnect_user (options_.disconnect_user); });
        }

        void Simulation::plant_step (std::int64_t k)
        {
            if (k > 0)
                plant_.step ();
            const auto frames = mailbox_.drain ();
            if (!frames.empty ())
                plant_.apply_frames (frames);

            auto truth = plant_.truth ();
            truth_.push (now_s (), truth);

            // Emission is aligned to plant steps so a packet always carries the state of its own instant.
            const auto slot = [this] (std::int64_t step) {
                return static_cast<std::int64_t> (std::floor (static_cast<double> (step) * cfg_.packet_rate_hz / cfg_.step_hz + 1e-9));
            };
            if (slot (k) > emitted_)
            {
                emitted_ = slot (k);
                auto s = plant_.sample_state ();
                s.timestamp_us = now_us ();
                car_up_->send (wire::to_datagram (wire::encode_state (s)));
            }
        }

        void Simulation::plant_receive (const std::vector<std::uint8_t>& bytes)
        {
            const auto decoded = wire::decode_datagram (bytes);
            if (const auto* frame = std::get_if<CanFrame> (&decoded))
                mailbox_.post (*frame);
            else if (const auto* probe = std::get_if<wire::ProbePacket> (&decoded); probe && !probe->echo)
                car_up_->send (wire::to_datagram (wire::encode_probe ({probe->probe_id, probe->send_time_us, true})));
        }

        void Simulation::local_receive (const std::vector<std::uint8_t>& bytes)
        {
            const auto decoded = ingest_datagram (local_store_, bytes, now_us ());
            if (const auto* s = std::get_if<VehicleState> (&decoded))
            {
                gateway_ms_.push_back (static_cast<double> (now_us () - s->timestamp_us) * 1e-3);
                if (centric ())
                    leader_up_->send (session::encode_frame (session::RawState{bytes}));
            }
            else if (const auto* probe = std::get_if<wire::ProbePacket> (&decoded); probe && probe->echo)
                probe_one_way_s_.push_back (static_cast<double> (now_us () - probe->send_time_us) * 0.5e-6);
        }

        void Simulation::drive ()
        {
            const auto latest = local_store_.snapshot ();
            const double v = latest ? latest->state.v : cfg_.speed_mps;
            const auto cmd = profile_.command_at (now_s () - us_to_seconds (t0_), v);
            for (const auto& frame : can::encode_command (cmd))
                car_down_->send (wire::to_datagram (wire::encode_command_frame (frame)));
        }

        void Simulation::world_tick ()
        {
            auto& store = centric () ? cloud_store_ : local_store_;
            const auto tick = world_->render_tick (now_s (), store.snapshot ());
            record_metrics (log_, tick, now_s () - us_to_seconds (t0_), truth_, cfg_.transform, cfg_.match_window_s);

            if (centric ())
            {
                // Controls that arrived before this tick are now reflected in the world.
                for (const auto& [id, tag] : pending_tags_)
                    applied_tags_[id] = tag;
                pending_tags_.clear ();
                return;
            }
            if (!cloud () || !tick.synchronized)
                return;
            const Micros keepalive = seconds_to_us (1.0 / cfg_.upload_hz);
            if (tick.seq != last_uploaded_seq_ || loop_.now () - last_upload_ >= keepalive)
            {
                last_uploaded_seq_ = tick.seq;
                last_upload_ = loop_.now ();
                leader_up_->send (session::encode_frame (session::EgoState{world_->export_entities (now_us ())}));
            }
        }

        void Simulation::leader_receive (const std::vector<std::uint8_t>& bytes)
        {
            leader_client_side_.feed (bytes);
            while (auto r = leader_client_side_.next ())
            {
                const auto* msg = std::get_if<session::Message> (&*r);
                if (!msg)
                    continue;
                if (const auto* pong = std::get_if<session::Pong> (msg))
                {
                    ping_up_ms_.push_back (static_cast<double> (pong->server_ts_us - pong->client_ts_us) * 1e-3);
                    ping_down_ms_.push_back (static_cast<double> (now_us () - pong->server_ts_us) * 1e-3);
                }
                else if (const auto* control = std::get_if<session::Control> (msg); control && world_)
                    world_->apply_remote_control (control->target, control->to_command ());
            }
        }

        void Simulation::relay_receive (SessionId sid, session::FrameDecoder& decoder, const std::vector<std::uint8_t>& bytes)
        {
            decoder.feed (bytes);
            while (auto r = decoder.next ())
            {
                std::vector<RelayAction> actions;
                if (const auto* err = std::get_if<session::FrameError> (&*r))
                    actions.push_back (relay_->on_frame_error (sid, *err));
                else
                    actions = relay_->on_message (sid, std::get<session::Message> (*r), now_us ());
                for (auto& a : actions)
                {
                    if (auto* out = std::get_if<Outgoing> (&a))
                        relay_send (out->to, std::move (out->frame));
                    else if (std::holds_alternative<CloseSession> (a))
                        relay_disconnect (sid);
                    else
                        host_message (std::get<HostMessage> (a));
                }
            }
        }

        void Simulation::relay_send (SessionId sid, std::vector<std::uint8_t> frame)
        {
            if (sid == kLeaderSession)
            {
                leader_down_->send (std::move (frame));
                return;
            }
            for (auto& u : users_)
                if (u->sid == sid && u->connected)
                    u->down->send (frame);
        }

        void Simulation::relay_disconnect (SessionId sid)
        {
            relay_->on_disconnect (sid);
            for (auto& u : users_)
                if (u->sid == sid)
                {
                    u->connected = false;
                    u->up->close ();
                    u->down->close ();
                }
        }

        void Simulation::host_message (const HostMessage& m)
        {
            if (!centric ())
                return;
            if (const auto* raw = std::get_if<session::RawState> (&m.message))
                ingest_datagram (cloud_store_, raw->datagram, now_us ());
            else if (const auto* control = std::get_if<session::Control> (&m.message))
            {
                if (world_ && world_->apply_remote_control (control->target, control->to_command ()))
                    pending_tags_[control->target] = control->issued_us;
            }
        }

        std::vector<EntityState> Simulation::hosted_entities () const
        {
            if (!centric () || !world_)
                return {};
            auto entities = world_->export_entities (now_us ());
            for (auto& e : entities)
            {
                if (e.kind != EntityKind::Virtual)
                    continue;
                const auto it = applied_tags_.find (e.id);
                e.kind = EntityKind::User;
                e.source_timestamp_us = it == applied_tags_.end () ? 0 : it->second;
            }
            return entities;
        }

        void Simulation::broadcast ()
        {
            const auto hosted = hosted_entities ();
            auto b = relay_->make_broadcast (now_us (), hosted);
            for (const auto sid : b.recipients)
                relay_send (sid, b.frame);
        }

        void Simulation::user_receive (UserNode& u, const std::vector<std::uint8_t>& bytes)
        {
            if (!u.connected)
                return;
            u.client_side.feed (bytes);
            while (auto r = u.client_side.next ())
            {
                const auto* msg = std::get_if<session::Message> (&*r);
                if (!msg)
                    continue;
                if (const auto* g = std::get_if<session::GlobalWorldState> (msg))
                {
                    if (g->broadcast_seq <= u.last_applied_seq || (u.pending && g->broadcast_seq <= u.pending->broadcast_seq))
                        continue; // stale
                    ++u.received;
                    u.hashes[g->broadcast_seq] = session::fnv1a (session::encode_frame (*g));
                    u.pending = *g;
                }
            }
        }

        void Simulation::user_tick (UserNode& u)
        {
            if (!u.connected)
                return;
            if (u.world)
                (void) u.world->render_tick (now_s (), std::nullopt);
            if (!u.pending)
                return;

            const auto g = std::move (*u.pending);
            u.pending.reset ();
            u.last_applied_seq = g.broadcast_seq;
            u.mirror.clear ();
            for (const auto& e : g.vehicles)
                u.mirror[e.id] = e;

            for (const auto& e : g.vehicles)
            {
                if (e.kind == EntityKind::Shadow && e.source_timestamp_us > u.last_shadow_src)
                {
                    u.last_shadow_src = e.source_timestamp_us;
                    if (!centric ())
                        total_ms_.push_back (static_cast<double> (now_us () - e.source_timestamp_us) * 1e-3);
                    else
                    {
                        // React to the new state; the result only becomes visible through the relay.
                        session::Control c;
                        c.target = u.vehicle_id;
                        c.steer_deg = 10.0;
                        c.engage = true;
                        c.issued_us = now_us ();
                        u.stimulus[c.issued_us] = e.source_timestamp_us;
                        u.up->send (session::encode_frame (c));
                    }
                }
                if (centric () && e.id == u.vehicle_id && e.source_timestamp_us > u.last_own_tag)
                {
                    u.last_own_tag = e.source_timestamp_us;
                    if (const auto it = u.stimulus.find (e.source_timestamp_us); it != u.stimulus.end ())
                        total_ms_.push_back (static_cast<double> (now_us () - it->second) * 1e-3);
                    u.stimulus.erase (u.stimulus.begin (), u.stimulus.upper_bound (e.source_timestamp_us));
                }
            }
        }

        void Simulation::user_upload (UserNode& u)
        {
            if (!u.connected || !u.world)
                return;
            const auto& v = u.world->virtuals ().at (u.vehicle_id);
            EntityState e{u.vehicle_id, EntityKind::User, v.pose.x, v.pose.y, v.pose.theta, v.v, now_us ()};
            u.up->send (session::encode_frame (session::EgoState{{e}}));
        }

        void Simulation::disconnect_user (std::size_t index)
        {
            auto& u = *users_.at (index);
            if (!u.connected)
                return;
            spdlog::debug ("scenario: user {} disconnects at {:.3f} s", u.client_id, now_s ());
            relay_disconnect (u.sid);
        }

        RunReport Simulation::run ()
        {
            build_links ();
            calibrate ();
            start ();
            loop_.run_until (t0_ + seconds_to_us (cfg_.duration_s));
            return finish ();
        }

        RunReport Simulation::finish ()
        {
            RunReport r;
            r.config = cfg_;
            r.config.topology = topology_;
            r.calibration = calibration_;
            r.sync = summarize (log_);
            r.log = log_;
            r.gateway = local_store_.counters ();
            r.car_to_local = car_up_->stats ();
            r.local_to_car = car_down_->stats ();
            r.gateway_latency = hop_stats (gateway_ms_);
            r.plant_rejected_frames = plant_.rejected_frames ();

            LatencyTable t;
            t.topology = topology_;
            std::vector<double> probe_ms;
            for (const double s : probe_one_way_s_)
                probe_ms.push_back (s * 1e3);
            t.car_to_local = hop_stats (probe_ms);
            t.local_to_cloud = hop_stats (ping_up_ms_);
            t.cloud_to_local = hop_stats (ping_down_ms_);
            t.total = hop_stats (total_ms_);
            if (t.car_to_local && t.local_to_cloud && t.cloud_to_local)
            {
                t.hop_sum_ms = t.car_to_local->mean_ms + t.local_to_cloud->mean_ms + t.cloud_to_local->mean_ms;
                if (centric ())
                    *t.hop_sum_ms += t.local_to_cloud->mean_ms + t.cloud_to_local->mean_ms; // control round trip
            }
            else if (!cloud () && t.car_to_local)
                t.hop_sum_ms = t.car_to_local->mean_ms;
            r.latency.push_back (t);

            if (cloud () && !users_.empty ())
            {
                ConsistencyReport c;
                c.users = users_.size ();
                std::map<std::uint64_t, std::uint64_t> reference;
                for (const auto& u : users_)
                {
                    c.received[u->client_id] = u->received;
                    for (const auto& [seq, hash] : u->hashes)
                    {
                        const auto [it, inserted] = reference.emplace (seq, hash);
                        if (!inserted && it->second != hash)
                            ++c.mismatches;
                    }
                }
                c.seqs_compared = reference.size ();
                r.consistency = c;
            }
            return r;
        }

        void evaluate (RunReport& r)
        {
            const auto& th = r.config.thresholds;
            char buf[160];
            if (r.sync.empty)
                r.failures.emplace_back ("no synchronization samples recorded");
            else
            {
                if (r.sync.mean > th.mean_ep_m)
                {
                    std::snprintf (buf, sizeof buf, "mean e_p %.4f m exceeds %.4f m", r.sync.mean, th.mean_ep_m);
                    r.failures.emplace_back (buf);
                }
                if (r.sync.max > th.max_ep_m)
                {
                    std::snprintf (buf, sizeof buf, "max e_p %.4f m exceeds %.4f m", r.sync.max, th.max_ep_m);
                    r.failures.emplace_back (buf);
                }
            }
            if (r.gateway_latency && r.gateway_latency->mean_ms > th.gateway_latency_ms)
            {
                std::snprintf (buf, sizeof buf, "gateway latency %.1f ms exceeds %.1f ms", r.gateway_latency->mean_ms,
                               th.gateway_latency_ms);
                r.failures.emplace_back (buf);
            }
            auto check_band = [&] (Topology t, const Band& band) {
                const auto* l = r.latency_for (t);
                if (!l)
                    return;
                if (!l->total)
                {
                    r.failures.emplace_back (std::string (to_string (t)) + " total latency unavailable");
                    return;
                }
                if (!band.contains (l->total->mean_ms))
                {
                    std::snprintf (buf, sizeof buf, "%s total %.1f ms outside [%.0f, %.0f] ms",
                                   std::string (to_string (t)).c_str (), l->total->mean_ms, band.lo, band.hi);
                    r.failures.emplace_back (buf);
                }
            };
            check_band (Topology::CloudEdge, th.cloud_edge_total_ms);
            check_band (Topology::CloudCentric, th.cloud_centric_total_ms);
            const auto* edge = r.latency_for (Topology::CloudEdge);
            const auto* centric = r.latency_for (Topology::CloudCentric);
            if (edge && centric && edge->total && centric->total && !(edge->total->mean_ms < centric->total->mean_ms))
                r.failures.emplace_back ("cloud-edge total is not below the cloud-centric total");
            if (r.consistency && !r.consistency->consistent ())
                r.failures.emplace_back ("users observed different payloads for the same broadcast sequence");
        }
    } // namespace

    RunReport run_scenario (const ScenarioConfig& config, const RunOptions& options)
    {
        config.validate ();
        Simulation sim (config, config.topology, options);
        auto report = sim.run ();

        if (options.compare_topologies && config.topology != Topology::Standalone)
        {
            const auto other = config.topology == Topology::CloudEdge ? Topology::CloudCentric : Topology::CloudEdge;
            RunOptions quiet;
            quiet.compare_topologies = false;
            Simulation baseline (config, other, quiet);
            auto b = baseline.run ();
            report.latency.push_back (b.latency.front ());
        }
        evaluate (report);
        return report;
    }

} // namespace hdt

#include "hdt/gateway.hpp"
#include "hdt/relay_server.hpp"
#include "hdt/session_client.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

using namespace hdt;
using namespace std::chrono_literals;
namespace asio = boost::asio;
namespace beast = boost::beast;
using tcp = asio::ip::tcp;

namespace
{
    RelayServerOptions options (double hz = 50.0)
    {
        RelayServerOptions o;
        o.relay.broadcast_hz = hz;
        o.relay.staleness_us = 1'000'000;
        return o;
    }

    SessionClientOptions client (const RelayServer& s, session::Role role, std::uint32_t id)
    {
        SessionClientOptions o;
        o.port = s.tcp_port ();
        o.role = role;
        o.client_id = id;
        o.backoff_initial = 20ms;
        return o;
    }

    struct Recorder
    {
        std::mutex m;
        std::condition_variable cv;
        std::map<std::uint64_t, std::uint64_t> hashes;
        std::vector<session::GlobalWorldState> states;

        void attach (SessionClient& c)
        {
            c.on_global_state ([this] (const session::GlobalWorldState& g, const std::vector<std::uint8_t>& frame) {
                std::lock_guard lock (m);
                hashes[g.broadcast_seq] = session::fnv1a (frame);
                states.push_back (g);
                cv.notify_all ();
            });
        }

        template <class Pred> bool wait (Pred pred, std::chrono::milliseconds timeout = 3000ms)
        {
            std::unique_lock lock (m);
            return cv.wait_for (lock, timeout, [&] { return pred (*this); });
        }
    };

    EntityState ego (std::uint32_t id, double x, std::uint64_t ts = 0)
    {
        return {id, EntityKind::Shadow, x, 0.0, 0.0, 1.0, ts};
    }
} // namespace

TEST (RelayServer, AllUsersReceiveIdenticalBroadcasts)
{
    RelayServer server (options ());
    server.start ();

    SessionClient leader (client (server, session::Role::Leader, 1));
    std::vector<std::unique_ptr<SessionClient>> users;
    std::vector<std::unique_ptr<Recorder>> recs;
    for (std::uint32_t i = 0; i < 3; ++i)
    {
        users.push_back (std::make_unique<SessionClient> (client (server, session::Role::User, 100 + i)));
        recs.push_back (std::make_unique<Recorder> ());
        recs.back ()->attach (*users.back ());
        users.back ()->start ();
    }
    leader.start ();
    ASSERT_TRUE (leader.wait_connected (3s));
    for (auto& u : users)
        ASSERT_TRUE (u->wait_connected (3s));

    for (int k = 0; k < 40; ++k)
    {
        leader.send_ego ({ego (1, k * 0.1)});
        users[k % 3]->send_ego ({ego (200 + k % 3, -k * 0.1)});
        std::this_thread::sleep_for (10ms);
    }
    for (auto& r : recs)
        ASSERT_TRUE (r->wait ([] (Recorder& x) { return x.hashes.size () >= 20; }));
    server.stop ();

    std::size_t compared = 0;
    for (const auto& [seq, h] : recs[0]->hashes)
        for (std::size_t i = 1; i < recs.size (); ++i)
            if (const auto it = recs[i]->hashes.find (seq); it != recs[i]->hashes.end ())
            {
                EXPECT_EQ (it->second, h) << "seq " << seq;
                ++compared;
            }
    EXPECT_GE (compared, 20u);

    const auto& last = recs[0]->states.back ();
    EXPECT_TRUE (std::is_sorted (last.vehicles.begin (), last.vehicles.end (),
                                 [] (const auto& a, const auto& b) { return a.id < b.id; }));
    EXPECT_GE (last.vehicles.size (), 2u);
}

TEST (RelayServer, PingPong)
{
    RelayServer server (options ());
    server.start ();
    SessionClient c (client (server, session::Role::User, 5));
    c.start ();
    ASSERT_TRUE (c.wait_connected (3s));
    const auto before = monotonic_us ();
    const auto pong = c.ping (1s);
    ASSERT_TRUE (pong);
    EXPECT_GE (pong->server_ts_us, before);
    EXPECT_LE (pong->server_ts_us, monotonic_us ());
    EXPECT_LE (pong->client_ts_us, pong->server_ts_us);
}

TEST (RelayServer, MalformedFrameClosesOnlyThatSession)
{
    RelayServer server (options ());
    server.start ();
    SessionClient good (client (server, session::Role::User, 7));
    Recorder rec;
    rec.attach (good);
    good.start ();
    ASSERT_TRUE (good.wait_connected (3s));

    asio::io_context io;
    tcp::socket raw (io);
    raw.connect ({asio::ip::make_address ("127.0.0.1"), server.tcp_port ()});
    const std::uint8_t junk[] = {0xFF, 0xFF, 0xFF, 0xFF, 1, 2, 3};
    asio::write (raw, asio::buffer (junk));
    std::array<std::uint8_t, 64> buf{};
    boost::system::error_code ec;
    for (int i = 0; i < 100 && !ec; ++i)
        (void) raw.read_some (asio::buffer (buf), ec);
    EXPECT_TRUE (ec == asio::error::eof || ec == asio::error::connection_reset) << ec.message ();

    const auto seen = [&] {
        std::lock_guard lock (rec.m);
        return rec.hashes.size ();
    }();
    EXPECT_TRUE (rec.wait ([&] (Recorder& r) { return r.hashes.size () >= seen + 5; }));
    EXPECT_TRUE (good.connected ());
    EXPECT_GE (server.stats ().protocol_errors, 1u);
}

TEST (RelayServer, ClientReconnectsAfterRestart)
{
    auto o = options ();
    RelayServer first (o);
    first.start ();
    o.tcp_port = first.tcp_port ();
    SessionClient c (client (first, session::Role::Leader, 1));
    c.start ();
    ASSERT_TRUE (c.wait_connected (3s));
    first.stop ();
    std::this_thread::sleep_for (100ms);
    RelayServer second (o);
    second.start ();
    std::this_thread::sleep_for (50ms);
    bool back = false;
    for (int i = 0; i < 100 && !back; ++i)
    {
        back = c.connected () && second.session_count () == 1;
        std::this_thread::sleep_for (30ms);
    }
    EXPECT_TRUE (back);
    EXPECT_GE (c.stats ().connects, 2u);
}

TEST (RelayServer, WebSocketMirrorAndControl)
{
    RelayServer server (options ());
    server.start ();
    ASSERT_NE (server.ws_port (), 0);

    SessionClient leader (client (server, session::Role::Leader, 1));
    std::mutex m;
    std::condition_variable cv;
    std::optional<session::Control> got;
    leader.on_control ([&] (const session::Control& c) {
        std::lock_guard lock (m);
        got = c;
        cv.notify_all ();
    });
    leader.start ();
    ASSERT_TRUE (leader.wait_connected (3s));
    leader.send_ego ({ego (42, 3.5)});

    asio::io_context io;
    beast::websocket::stream<tcp::socket> ws (io);
    ws.next_layer ().connect ({asio::ip::make_address ("127.0.0.1"), server.ws_port ()});
    ws.handshake ("127.0.0.1", "/");
    nlohmann::json j;
    for (int i = 0; i < 50; ++i)
    {
        beast::flat_buffer buffer;
        ws.read (buffer);
        EXPECT_TRUE (ws.got_text ());
        j = nlohmann::json::parse (beast::buffers_to_string (buffer.data ()));
        if (!j["vehicles"].empty ())
            break;
    }
    EXPECT_EQ (j["type"], "global_state");
    ASSERT_EQ (j["vehicles"].size (), 1u);
    EXPECT_EQ (j["vehicles"][0]["id"], 42);
    EXPECT_EQ (j["vehicles"][0]["x"], 3.5);
    EXPECT_EQ (j["vehicles"][0]["kind"], "shadow");

    ws.write (asio::buffer (std::string (R"({"type":"control","target":42,"steer_deg":-7.5,"engage":true})")));
    ws.write (asio::buffer (std::string ("garbage")));
    std::unique_lock lock (m);
    ASSERT_TRUE (cv.wait_for (lock, 3s, [&] { return got.has_value (); }));
    EXPECT_EQ (got->target, 42u);
    EXPECT_EQ (got->steer_deg, -7.5);
    EXPECT_TRUE (got->engage);
    lock.unlock ();

    // still open after a bad message
    beast::flat_buffer buffer;
    ws.read (buffer);
    EXPECT_GT (buffer.size (), 0u);
    beast::error_code ec;
    ws.close (beast::websocket::close_code::normal, ec);
}

TEST (RelayServer, BroadcastCadence)
{
    const double hz = 20.0;
    RelayServer server (options (hz));
    std::mutex m;
    std::vector<std::uint64_t> times;
    server.set_broadcast_observer ([&] (const Broadcast&) {
        std::lock_guard lock (m);
        times.push_back (monotonic_us ());
    });
    server.start ();
    std::this_thread::sleep_for (2100ms);
    server.stop ();

    std::lock_guard lock (m);
    ASSERT_GE (times.size (), 30u);
    const double nominal = 1e6 / hz;
    const double mean = static_cast<double> (times.back () - times.front ()) / static_cast<double> (times.size () - 1);
    EXPECT_NEAR (mean, nominal, 0.05 * nominal);
    std::size_t off = 0;
    for (std::size_t i = 1; i < times.size (); ++i)
        if (std::abs (static_cast<double> (times[i] - times[i - 1]) - nominal) > 0.2 * nominal)
            ++off;
    EXPECT_LE (off, times.size () / 10);
}

TEST (RelayServer, LoopbackSourceToUserLatency)
{
    RelayServer server (options (50.0));
    server.start ();
    SessionClient leader (client (server, session::Role::Leader, 1));
    SessionClient user (client (server, session::Role::User, 2));
    std::mutex m;
    std::vector<double> totals;
    std::uint64_t last_source = 0;
    user.on_global_state ([&] (const session::GlobalWorldState& g, const std::vector<std::uint8_t>&) {
        std::lock_guard lock (m);
        for (const auto& e : g.vehicles)
            if (e.id == 1 && e.source_timestamp_us != last_source)
            {
                last_source = e.source_timestamp_us;
                totals.push_back (static_cast<double> (monotonic_us () - e.source_timestamp_us) / 1000.0);
            }
    });
    leader.start ();
    user.start ();
    ASSERT_TRUE (leader.wait_connected (3s));
    ASSERT_TRUE (user.wait_connected (3s));
    for (int k = 0; k < 50; ++k)
    {
        leader.send_ego ({ego (1, k, monotonic_us ())});
        std::this_thread::sleep_for (20ms);
    }
    std::this_thread::sleep_for (100ms);
    std::lock_guard lock (m);
    ASSERT_GE (totals.size (), 20u);
    const double mean = std::accumulate (totals.begin (), totals.end (), 0.0) / static_cast<double> (totals.size ());
    EXPECT_LT (mean, 50.0);
}

TEST (RelayServer, DisabledWebSocketEndpoint)
{
    auto o = options ();
    o.ws_port.reset ();
    RelayServer server (o);
    server.start ();
    EXPECT_EQ (server.ws_port (), 0);
    EXPECT_NE (server.tcp_port (), 0);
}

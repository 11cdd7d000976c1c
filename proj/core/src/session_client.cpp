#include "hdt/session_client.hpp"

#include "hdt/gateway.hpp"

#include <boost/asio.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

namespace hdt
{
    namespace asio = boost::asio;
    using tcp = asio::ip::tcp;
    using Bytes = std::vector<std::uint8_t>;

    struct SessionClient::Impl
    {
        explicit Impl (SessionClientOptions o) : options (std::move (o)), socket (io), retry (io) {}

        SessionClientOptions options;
        asio::io_context io;
        tcp::socket socket;
        asio::steady_timer retry;
        std::chrono::milliseconds backoff{0};
        std::thread thread;
        std::atomic<bool> running{false};
        std::atomic<bool> is_connected{false};
        std::uint64_t generation{0}; // bumped on every (re)connect so late handlers of old sockets are ignored

        std::array<std::uint8_t, 8192> read_buf{};
        session::FrameDecoder decoder;
        std::deque<std::shared_ptr<const Bytes>> queue;

        GlobalHandler global_handler;
        ControlHandler control_handler;

        mutable std::mutex mutex; // guards stats, last_seq and pong bookkeeping
        mutable std::condition_variable cv;
        SessionClientStats stats;
        std::optional<std::uint64_t> last_seq;
        std::map<std::uint64_t, session::Pong> pongs;

        void connect ();
        void schedule_reconnect ();
        void drop (const std::string& reason);
        void read (std::uint64_t gen);
        void send (Bytes frame);
        void write (std::uint64_t gen);
        void dispatch (const session::Message& msg);
    };

    void SessionClient::Impl::connect ()
    {
        if (!running)
            return;
        const auto gen = ++generation;
        boost::system::error_code ec;
        const auto address = asio::ip::make_address (options.host, ec);
        if (ec)
        {
            spdlog::error ("session: bad relay address {}", options.host);
            return;
        }
        socket = tcp::socket (io);
        socket.async_connect (tcp::endpoint (address, options.port), [this, gen] (boost::system::error_code err) {
            if (gen != generation || !running)
                return;
            if (err)
            {
                spdlog::debug ("session: connect failed: {}", err.message ());
                schedule_reconnect ();
                return;
            }
            socket.set_option (tcp::no_delay (true));
            decoder = {};
            queue.clear ();
            backoff = std::chrono::milliseconds (0);
            {
                std::lock_guard lock (mutex);
                ++stats.connects;
                last_seq.reset (); // sequence numbers restart with a new relay epoch
                is_connected = true;
            }
            send (session::encode_frame (session::Join{options.role, options.client_id}));
            cv.notify_all ();
            read (gen);
        });
    }

    void SessionClient::Impl::schedule_reconnect ()
    {
        if (!running)
            return;
        backoff = backoff.count () == 0 ? options.backoff_initial : std::min (backoff * 2, options.backoff_max);
        retry.expires_after (backoff);
        retry.async_wait ([this] (boost::system::error_code ec) {
            if (!ec)
                connect ();
        });
    }

    void SessionClient::Impl::drop (const std::string& reason)
    {
        if (!is_connected.exchange (false) && !socket.is_open ())
            return;
        spdlog::info ("session: disconnected: {}", reason);
        ++generation;
        boost::system::error_code ignored;
        socket.close (ignored);
        queue.clear ();
        schedule_reconnect ();
    }

    void SessionClient::Impl::read (std::uint64_t gen)
    {
        socket.async_read_some (asio::buffer (read_buf), [this, gen] (boost::system::error_code ec, std::size_t n) {
            if (gen != generation)
                return;
            if (ec)
            {
                drop (ec.message ());
                return;
            }
            decoder.feed ({read_buf.data (), n});
            while (auto result = decoder.next ())
            {
                if (const auto* err = std::get_if<session::FrameError> (&*result))
                {
                    {
                        std::lock_guard lock (mutex);
                        ++stats.protocol_errors;
                    }
                    drop ("protocol error: " + err->reason);
                    return;
                }
                dispatch (std::get<session::Message> (*result));
                if (gen != generation)
                    return;
            }
            read (gen);
        });
    }

    void SessionClient::Impl::dispatch (const session::Message& msg)
    {
        if (const auto* g = std::get_if<session::GlobalWorldState> (&msg))
        {
            {
                std::lock_guard lock (mutex);
                if (last_seq && g->broadcast_seq <= *last_seq)
                {
                    ++stats.stale_dropped;
                    return;
                }
                last_seq = g->broadcast_seq;
                ++stats.broadcasts;
            }
            if (global_handler)
                global_handler (*g, session::encode_frame (*g));
        }
        else if (const auto* c = std::get_if<session::Control> (&msg))
        {
            {
                std::lock_guard lock (mutex);
                ++stats.controls;
            }
            if (control_handler)
                control_handler (*c);
        }
        else if (const auto* p = std::get_if<session::Pong> (&msg))
        {
            std::lock_guard lock (mutex);
            pongs[p->client_ts_us] = *p;
            cv.notify_all ();
        }
    }

    void SessionClient::Impl::send (Bytes frame)
    {
        queue.push_back (std::make_shared<const Bytes> (std::move (frame)));
        if (queue.size () == 1)
            write (generation);
    }

    void SessionClient::Impl::write (std::uint64_t gen)
    {
        asio::async_write (socket, asio::buffer (*queue.front ()), [this, gen] (boost::system::error_code ec, std::size_t) {
            if (gen != generation)
                return;
            if (ec)
            {
                drop (ec.message ());
                return;
            }
            queue.pop_front ();
            if (!queue.empty ())
                write (gen);
        });
    }

    SessionClient::SessionClient (SessionClientOptions options) : impl_ (std::make_unique<Impl> (std::move (options))) {}

    SessionClient::~SessionClient () { stop (); }

    void SessionClient::on_global_state (GlobalHandler handler) { impl_->global_handler = std::move (handler); }
    void SessionClient::on_control (ControlHandler handler) { impl_->control_handler = std::move (handler); }

    void SessionClient::start ()
    {
        auto& d = *impl_;
        if (d.running.exchange (true))
            return;
        asio::post (d.io, [&d] { d.connect (); });
        d.thread = std::thread ([&d] {
            auto guard = asio::make_work_guard (d.io);
            d.io.run ();
        });
    }

    void SessionClient::stop ()
    {
        auto& d = *impl_;
        if (!d.running.exchange (false))
            return;
        asio::post (d.io, [&d] {
            ++d.generation;
            d.is_connected = false;
            boost::system::error_code ignored;
            d.retry.cancel ();
            d.socket.close (ignored);
            d.io.stop ();
        });
        if (d.thread.joinable ())
            d.thread.join ();
        d.io.restart ();
        d.cv.notify_all ();
    }

    void SessionClient::send_ego (std::vector<EntityState> entities)
    {
        auto& d = *impl_;
        auto frame = session::encode_frame (session::EgoState{std::move (entities)});
        asio::post (d.io, [&d, frame = std::move (frame)] () mutable {
            if (!d.is_connected)
                return;
            d.send (std::move (frame));
            std::lock_guard lock (d.mutex);
            ++d.stats.ego_sent;
        });
    }

    std::optional<session::Pong> SessionClient::ping (std::chrono::milliseconds timeout)
    {
        auto& d = *impl_;
        if (!d.is_connected)
            return std::nullopt;
        const auto ts = monotonic_us ();
        asio::post (d.io, [&d, ts] {
            if (d.is_connected)
                d.send (session::encode_frame (session::Ping{ts}));
        });
        std::unique_lock lock (d.mutex);
        if (!d.cv.wait_for (lock, timeout, [&] { return d.pongs.contains (ts) || !d.running; }))
            return std::nullopt;
        const auto it = d.pongs.find (ts);
        if (it == d.pongs.end ())
            return std::nullopt;
        auto pong = it->second;
        d.pongs.erase (it);
        return pong;
    }

    bool SessionClient::connected () const noexcept { return impl_->is_connected; }

    bool SessionClient::wait_connected (std::chrono::milliseconds timeout) const
    {
        auto& d = *impl_;
        std::unique_lock lock (d.mutex);
        return d.cv.wait_for (lock, timeout, [&] { return d.is_connected.load () || !d.running; }) && d.is_connected;
    }

    SessionClientStats SessionClient::stats () const
    {
        std::lock_guard lock (impl_->mutex);
        return impl_->stats;
    }

    std::uint64_t SessionClient::last_seq () const
    {
        std::lock_guard lock (impl_->mutex);
        return impl_->last_seq.value_or (0);
    }

} // namespace hdt

#include "hdt/relay_server.hpp"

#include "hdt/gateway.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <deque>
#include <map>
#include <mutex>
#include <thread>

namespace hdt
{
    namespace asio = boost::asio;
    namespace beast = boost::beast;
    namespace websocket = beast::websocket;
    using tcp = asio::ip::tcp;
    using Bytes = std::vector<std::uint8_t>;

    struct RelayServer::Impl
    {
        struct TcpSession;
        struct WsSession;

        explicit Impl (RelayServerOptions o) : options (std::move (o)), core (options.relay), timer (io) {}

        RelayServerOptions options;
        asio::io_context io;
        std::optional<tcp::acceptor> tcp_acceptor;
        std::optional<tcp::acceptor> ws_acceptor;
        RelayCore core;
        mutable std::mutex core_mutex; // guards core for stats() readers; all mutation is on the io thread
        asio::steady_timer timer;
        std::chrono::steady_clock::time_point broadcast_start;
        std::uint64_t broadcast_index{0};
        BroadcastObserver observer;

        std::map<SessionId, std::shared_ptr<TcpSession>> sessions;
        std::map<SessionId, std::shared_ptr<WsSession>> ws_sessions;
        SessionId next_id{1};
        std::uint16_t bound_tcp{0};
        std::uint16_t bound_ws{0};
        std::thread thread;
        bool running{false};

        void accept_tcp ();
        void accept_ws ();
        void schedule_broadcast ();
        void broadcast ();
        void close_session (SessionId sid, const std::string& reason);
        void deliver (const Outgoing& out);
        void handle_actions (SessionId sid, std::vector<RelayAction> actions);
    };

    struct RelayServer::Impl::TcpSession : std::enable_shared_from_this<TcpSession>
    {
        TcpSession (Impl& server, tcp::socket s, SessionId id) : owner (server), socket (std::move (s)), sid (id) {}

        Impl& owner;
        tcp::socket socket;
        SessionId sid;
        std::array<std::uint8_t, 4096> read_buf{};
        session::FrameDecoder decoder;
        std::deque<std::shared_ptr<const Bytes>> queue;
        bool closed{false};

        void start () { read (); }

        void read ()
        {
            socket.async_read_some (asio::buffer (read_buf), [self = shared_from_this ()] (auto ec, std::size_t n) {
                if (self->closed)
                    return;
                if (ec)
                {
                    self->owner.close_session (self->sid, ec == asio::error::eof ? "peer closed" : ec.message ());
                    return;
                }
                self->decoder.feed ({self->read_buf.data (), n});
                while (auto result = self->decoder.next ())
                {
                    std::vector<RelayAction> actions;
                    {
                        std::lock_guard lock (self->owner.core_mutex);
                        if (const auto* err = std::get_if<session::FrameError> (&*result))
                            actions.push_back (self->owner.core.on_frame_error (self->sid, *err));
                        else
                            actions = self->owner.core.on_message (self->sid, std::get<session::Message> (*result),
                                                                   monotonic_us ());
                    }
                    self->owner.handle_actions (self->sid, std::move (actions));
                    if (self->closed)
                        return;
                }
                self->read ();
            });
        }

        void send (std::shared_ptr<const Bytes> frame)
        {
            if (closed)
                return;
            if (queue.size () >= owner.options.max_queued_frames)
            {
                owner.close_session (sid, "send backlog exceeded");
                return;
            }
            queue.push_back (std::move (frame));
            if (queue.size () == 1)
                write ();
        }

        void write ()
        {
            asio::async_write (socket, asio::buffer (*queue.front ()), [self = shared_from_this ()] (auto ec, std::size_t) {
                if (self->closed)
                    return;
                if (ec)
                {
                    self->owner.close_session (self->sid, ec.message ());
                    return;
                }
                self->queue.pop_front ();
                if (!self->queue.empty ())
                    self->write ();
            });
        }

        void close ()
        {
            closed = true;
            boost::system::error_code ignored;
            socket.shutdown (tcp::socket::shutdown_both, ignored);
            socket.close (ignored);
        }
    };

    struct RelayServer::Impl::WsSession : std::enable_shared_from_this<WsSession>
    {
        WsSession (Impl& server, tcp::socket s, SessionId id) : owner (server), ws (std::move (s)), wid (id) {}

        Impl& owner;
        websocket::stream<beast::tcp_stream> ws;
        SessionId wid;
        beast::flat_buffer buffer;
        std::deque<std::shared_ptr<const std::string>> queue;
        bool open{false};
        bool closed{false};

        void start ()
        {
            ws.set_option (websocket::stream_base::timeout::suggested (beast::role_type::server));
            ws.async_accept ([self = shared_from_this ()] (beast::error_code ec) {
                if (ec)
                {
                    self->finish (ec.message ());
                    return;
                }
                self->open = true;
                self->ws.text (true);
                self->read ();
            });
        }

        void read ()
        {
            ws.async_read (buffer, [self = shared_from_this ()] (beast::error_code ec, std::size_t) {
                if (ec)
                {
                    self->finish (ec == websocket::error::closed ? "closed" : ec.message ());
                    return;
                }
                const auto text = beast::buffers_to_string (self->buffer.data ());
                self->buffer.consume (self->buffer.size ());
                const auto parsed = session::control_from_json (text);
                if (const auto* control = std::get_if<session::Control> (&parsed))
                {
                    std::optional<Outgoing> out;
                    {
                        std::lock_guard lock (self->owner.core_mutex);
                        out = self->owner.core.route_control (*control);
                    }
                    if (out)
                        self->owner.deliver (*out);
                    else
                        spdlog::warn ("relay: control for unknown target {}", control->target);
                }
                else
                    spdlog::warn ("relay: websocket {}: {}", self->wid, std::get<session::FrameError> (parsed).reason);
                self->read ();
            });
        }

        void send (std::shared_ptr<const std::string> text)
        {
            if (!open || closed)
                return;
            if (queue.size () >= owner.options.max_queued_frames)
                queue.pop_front (); // a slow console only sees the newest states
            queue.push_back (std::move (text));
            if (queue.size () == 1)
                write ();
        }

        void write ()
        {
            ws.async_write (asio::buffer (*queue.front ()), [self = shared_from_this ()] (beast::error_code ec, std::size_t) {
                if (ec)
                {
                    self->finish (ec.message ());
                    return;
                }
                self->queue.pop_front ();
                if (!self->queue.empty ())
                    self->write ();
            });
        }

        void finish (const std::string& reason)
        {
            if (closed)
                return;
            closed = true;
            spdlog::debug ("relay: websocket {} closed: {}", wid, reason);
            owner.ws_sessions.erase (wid);
        }
    };

    void RelayServer::Impl::accept_tcp ()
    {
        tcp_acceptor->async_accept ([this] (boost::system::error_code ec, tcp::socket socket) {
            if (ec)
            {
                if (ec != asio::error::operation_aborted)
                    spdlog::warn ("relay: accept failed: {}", ec.message ());
                if (running)
                    accept_tcp ();
                return;
            }
            socket.set_option (tcp::no_delay (true));
            const auto sid = next_id++;
            auto s = std::make_shared<TcpSession> (*this, std::move (socket), sid);
            sessions.emplace (sid, s);
            {
                std::lock_guard lock (core_mutex);
                core.on_connect (sid);
            }
            s->start ();
            accept_tcp ();
        });
    }

    void RelayServer::Impl::accept_ws ()
    {
        ws_acceptor->async_accept ([this] (boost::system::error_code ec, tcp::socket socket) {
            if (ec)
            {
                if (running && ec != asio::error::operation_aborted)
                    accept_ws ();
                return;
            }
            const auto id = next_id++;
            auto s = std::make_shared<WsSession> (*this, std::move (socket), id);
            ws_sessions.emplace (id, s);
            s->start ();
            accept_ws ();
        });
    }

    void RelayServer::Impl::schedule_broadcast ()
    {
        const auto period = std::chrono::duration<double> (1.0 / options.relay.broadcast_hz);
        ++broadcast_index;
        timer.expires_at (broadcast_start + std::chrono::duration_cast<std::chrono::steady_clock::duration> (
                                                period * static_cast<double> (broadcast_index)));
        timer.async_wait ([this] (boost::system::error_code ec) {
            if (ec || !running)
                return;
            broadcast ();
            schedule_broadcast ();
        });
    }

    void RelayServer::Impl::broadcast ()
    {
        Broadcast b;
        {
            std::lock_guard lock (core_mutex);
            b = core.make_broadcast (monotonic_us ());
        }
        const auto frame = std::make_shared<const Bytes> (b.frame);
        for (const auto sid : b.recipients)
            if (const auto it = sessions.find (sid); it != sessions.end ())
                it->second->send (frame);
        if (!ws_sessions.empty ())
        {
            const auto text = std::make_shared<const std::string> (session::to_json (b.state));
            for (auto it = ws_sessions.begin (); it != ws_sessions.end ();)
            {
                auto s = (it++)->second; // send may erase the entry
                s->send (text);
            }
        }
        if (observer)
            observer (b);
    }

    void RelayServer::Impl::deliver (const Outgoing& out)
    {
        if (const auto it = sessions.find (out.to); it != sessions.end ())
            it->second->send (std::make_shared<const Bytes> (out.frame));
    }

    void RelayServer::Impl::handle_actions (SessionId sid, std::vector<RelayAction> actions)
    {
        for (auto& a : actions)
        {
            if (const auto* out = std::get_if<Outgoing> (&a))
                deliver (*out);
            else if (const auto* close = std::get_if<CloseSession> (&a))
                close_session (sid, close->reason);
            else
                spdlog::debug ("relay: session {}: no hosted world, message dropped", sid);
        }
    }

    void RelayServer::Impl::close_session (SessionId sid, const std::string& reason)
    {
        const auto it = sessions.find (sid);
        if (it == sessions.end ())
            return;
        auto s = it->second;
        sessions.erase (it);
        s->close ();
        {
            std::lock_guard lock (core_mutex);
            core.on_disconnect (sid);
        }
        spdlog::info ("relay: session {} closed: {}", sid, reason);
    }

    RelayServer::RelayServer (RelayServerOptions options) : impl_ (std::make_unique<Impl> (std::move (options))) {}

    RelayServer::~RelayServer () { stop (); }

    void RelayServer::set_broadcast_observer (BroadcastObserver observer) { impl_->observer = std::move (observer); }

    void RelayServer::start ()
    {
        auto& d = *impl_;
        if (d.running)
            return;
        try
        {
            const auto address = asio::ip::make_address (d.options.bind_host);
            d.tcp_acceptor.emplace (d.io, tcp::endpoint (address, d.options.tcp_port));
            d.bound_tcp = d.tcp_acceptor->local_endpoint ().port ();
            if (d.options.ws_port)
            {
                d.ws_acceptor.emplace (d.io, tcp::endpoint (address, *d.options.ws_port));
                d.bound_ws = d.ws_acceptor->local_endpoint ().port ();
            }
        }
        catch (const boost::system::system_error& e)
        {
            throw std::runtime_error (std::string ("relay: bind failed: ") + e.what ());
        }
        d.running = true;
        d.accept_tcp ();
        if (d.ws_acceptor)
            d.accept_ws ();
        d.broadcast_start = std::chrono::steady_clock::now ();
        d.broadcast_index = 0;
        d.schedule_broadcast ();
        d.thread = std::thread ([&d] { d.io.run (); });
        spdlog::info ("relay: tcp {}:{} ws {}", d.options.bind_host, d.bound_tcp, d.bound_ws);
    }

    void RelayServer::stop ()
    {
        auto& d = *impl_;
        if (!d.running)
            return;
        asio::post (d.io, [&d] {
            d.running = false;
            boost::system::error_code ignored;
            d.timer.cancel ();
            d.tcp_acceptor->close (ignored);
            if (d.ws_acceptor)
                d.ws_acceptor->close (ignored);
            for (auto& [sid, s] : d.sessions)
                s->close ();
            d.sessions.clear ();
            for (auto& [id, s] : d.ws_sessions)
            {
                s->closed = true;
                beast::get_lowest_layer (s->ws).close ();
            }
            d.ws_sessions.clear ();
        });
        if (d.thread.joinable ())
            d.thread.join ();
        d.io.restart ();
    }

    std::uint16_t RelayServer::tcp_port () const noexcept { return impl_->bound_tcp; }
    std::uint16_t RelayServer::ws_port () const noexcept { return impl_->bound_ws; }

    RelayStats RelayServer::stats () const
    {
        std::lock_guard lock (impl_->core_mutex);
        return impl_->core.stats ();
    }

    std::size_t RelayServer::session_count () const
    {
        std::lock_guard lock (impl_->core_mutex);
        return impl_->core.joined_count ();
    }

} // namespace hdt

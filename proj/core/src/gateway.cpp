#include "hdt/gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <queue>
#include <stdexcept>
#include <sys/socket.h>
#include <system_error>
#include <unistd.h>

namespace hdt
{
    namespace
    {
        sockaddr_in to_sockaddr (const Endpoint& ep)
        {
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_port = htons (ep.port);
            if (ep.host.empty () || ep.host == "0.0.0.0" || ep.host == "*")
            {
                addr.sin_addr.s_addr = htonl (INADDR_ANY);
                return addr;
            }
            if (::inet_pton (AF_INET, ep.host.c_str (), &addr.sin_addr) == 1)
                return addr;

            addrinfo hints{};
            hints.ai_family = AF_INET;
            hints.ai_socktype = SOCK_DGRAM;
            addrinfo* res = nullptr;
            if (::getaddrinfo (ep.host.c_str (), nullptr, &hints, &res) != 0 || res == nullptr)
                throw std::invalid_argument ("cannot resolve host '" + ep.host + "'");
            addr.sin_addr = reinterpret_cast<sockaddr_in*> (res->ai_addr)->sin_addr;
            ::freeaddrinfo (res);
            return addr;
        }

        Endpoint from_sockaddr (const sockaddr_in& addr)
        {
            char buf[INET_ADDRSTRLEN] = {};
            ::inet_ntop (AF_INET, &addr.sin_addr, buf, sizeof buf);
            return {buf, ntohs (addr.sin_port)};
        }
    } // namespace

    std::uint64_t monotonic_us () noexcept
    {
        using namespace std::chrono;
        return static_cast<std::uint64_t> (duration_cast<microseconds> (steady_clock::now ().time_since_epoch ()).count ());
    }

    wire::Decoded ingest_datagram (LatestStateStore& store, std::span<const std::uint8_t> bytes, std::uint64_t arrival_us)
    {
        auto decoded = wire::decode_datagram (bytes);
        if (const auto* rej = std::get_if<wire::Rejection> (&decoded))
        {
            if (wire::is_header_rejection (rej->reason))
                store.count_filtered ();
            else
                store.count_malformed ();
        }
        else if (const auto* state = std::get_if<VehicleState> (&decoded))
        {
            store.update (*state, arrival_us);
        }
        return decoded;
    }

    // ---- Endpoint -------------------------------------------------------

    Endpoint Endpoint::parse (const std::string& text)
    {
        const auto colon = text.rfind (':');
        if (colon == std::string::npos)
            throw std::invalid_argument ("endpoint '" + text + "' must be host:port");
        Endpoint ep;
        ep.host = text.substr (0, colon);
        if (ep.host.empty ())
            ep.host = "0.0.0.0";
        const auto port_text = text.substr (colon + 1);
        int port = -1;
        try
        {
            std::size_t used = 0;
            port = std::stoi (port_text, &used);
            if (used != port_text.size ())
                port = -1;
        }
        catch (const std::exception&)
        {
            port = -1;
        }
        if (port < 0 || port > 65535)
            throw std::invalid_argument ("endpoint '" + text + "' has an invalid port");
        ep.port = static_cast<std::uint16_t> (port);
        return ep;
    }

    std::string Endpoint::str () const { return host + ":" + std::to_string (port); }

    // ---- UdpSocket ------------------------------------------------------

    UdpSocket::UdpSocket () : fd_ (::socket (AF_INET, SOCK_DGRAM, 0))
    {
        if (fd_ < 0)
            throw std::system_error (errno, std::generic_category (), "socket");
    }

    UdpSocket::~UdpSocket ()
    {
        if (fd_ >= 0)
            ::close (fd_);
    }

    UdpSocket::UdpSocket (UdpSocket&& other) noexcept : fd_ (std::exchange (other.fd_, -1)) {}

    UdpSocket& UdpSocket::operator= (UdpSocket&& other) noexcept
    {
        if (this != &other)
        {
            if (fd_ >= 0)
                ::close (fd_);
            fd_ = std::exchange (other.fd_, -1);
        }
        return *this;
    }

    void UdpSocket::bind (const Endpoint& local)
    {
        const int one = 1;
        ::setsockopt (fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        const auto addr = to_sockaddr (local);
        if (::bind (fd_, reinterpret_cast<const sockaddr*> (&addr), sizeof addr) != 0)
            throw std::system_error (errno, std::generic_category (), "bind " + local.str ());
    }

    std::uint16_t UdpSocket::local_port () const
    {
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        if (::getsockname (fd_, reinterpret_cast<sockaddr*> (&addr), &len) != 0)
            return 0;
        return ntohs (addr.sin_port);
    }

    bool UdpSocket::send_to (std::span<const std::uint8_t> bytes, const Endpoint& to)
    {
        const auto addr = to_sockaddr (to);
        const auto n = ::sendto (fd_, bytes.data (), bytes.size (), 0, reinterpret_cast<const sockaddr*> (&addr), sizeof addr);
        return n == static_cast<ssize_t> (bytes.size ());
    }

    std::optional<std::size_t> UdpSocket::receive (std::span<std::uint8_t> buffer, Endpoint* from,
                                                   std::chrono::milliseconds timeout)
    {
        pollfd pfd{fd_, POLLIN, 0};
        const int ready = ::poll (&pfd, 1, static_cast<int> (timeout.count ()));
        if (ready <= 0 || !(pfd.revents & POLLIN))
            return std::nullopt;
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        const auto n = ::recvfrom (fd_, buffer.data (), buffer.size (), 0, reinterpret_cast<sockaddr*> (&addr), &len);
        if (n < 0)
            return std::nullopt;
        if (from)
            *from = from_sockaddr (addr);
        return static_cast<std::size_t> (n);
    }

    // ---- ProbeResult ----------------------------------------------------

    std::optional<double> ProbeResult::median () const
    {
        if (one_way_s.empty ())
            return std::nullopt;
        auto v = one_way_s;
        std::sort (v.begin (), v.end ());
        const auto n = v.size ();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

    // ---- GatewayEndpoint ------------------------------------------------

    GatewayEndpoint::GatewayEndpoint (const Endpoint& bind, LatestStateStore* store, CommandHandler on_command)
        : store_ (store), on_command_ (std::move (on_command))
    {
        socket_.bind (bind);
        thread_ = std::jthread ([this] (std::stop_token st) { receive_loop (st); });
    }

    GatewayEndpoint::~GatewayEndpoint () { stop (); }

    void GatewayEndpoint::stop ()
    {
        if (thread_.joinable ())
        {
            thread_.request_stop ();
            thread_.join ();
        }
    }

    bool GatewayEndpoint::send_to (std::span<const std::uint8_t> bytes, const Endpoint& to)
    {
        return socket_.send_to (bytes, to);
    }

    void GatewayEndpoint::receive_loop (std::stop_token stop)
    {
        std::array<std::uint8_t, 2048> buf{};
        LatestStateStore scratch; // counts traffic when no store is attached
        while (!stop.stop_requested ())
        {
            Endpoint from;
            const auto n = socket_.receive (buf, &from, std::chrono::milliseconds (20));
            if (!n)
                continue;
            const auto now = monotonic_us ();
            const std::span<const std::uint8_t> bytes (buf.data (), *n);
            const auto decoded = ingest_datagram (store_ ? *store_ : scratch, bytes, now);

            if (const auto* frame = std::get_if<CanFrame> (&decoded))
            {
                if (on_command_)
                    on_command_ (*frame);
            }
            else if (const auto* probe = std::get_if<wire::ProbePacket> (&decoded))
            {
                if (!probe->echo)
                {
                    auto echo = *probe;
                    echo.echo = true;
                    socket_.send_to (wire::encode_probe (echo), from);
                }
                else
                {
                    std::lock_guard lock (probe_mutex_);
                    probe_replies_[probe->probe_id] = now;
                    probe_cv_.notify_all ();
                }
            }
        }
    }

    ProbeResult GatewayEndpoint::probe (const Endpoint& peer, const ProbeOptions& options)
    {
        ProbeResult result;
        for (int i = 0; i < options.count; ++i)
        {
            std::uint32_t id = 0;
            {
                std::lock_guard lock (probe_mutex_);
                id = next_probe_id_++;
            }
            const auto sent_at = monotonic_us ();
            socket_.send_to (wire::encode_probe ({id, sent_at, false}), peer);
            ++result.sent;

            std::unique_lock lock (probe_mutex_);
            const bool answered = probe_cv_.wait_for (lock, options.timeout, [&] { return probe_replies_.contains (id); });
            if (answered)
            {
                const auto rtt_us = probe_replies_[id] - sent_at;
                probe_replies_.erase (id);
                result.one_way_s.push_back (static_cast<double> (rtt_us) * 0.5e-6);
            }
            else
            {
                ++result.timeouts;
                spdlog::debug ("probe {} to {} timed out", id, peer.str ());
            }
            lock.unlock ();
            if (i + 1 < options.count)
                std::this_thread::sleep_for (options.spacing);
        }
        return result;
    }

    ProbeResult probe_roundtrip (const Endpoint& peer, const ProbeOptions& options)
    {
        GatewayEndpoint local ({"0.0.0.0", 0}, nullptr);
        return local.probe (peer, options);
    }

    // ---- StateSender ----------------------------------------------------

    StateSender::StateSender (Sampler sampler, double rate_hz, Endpoint destination)
        : sampler_ (std::move (sampler)), rate_hz_ (rate_hz), destination_ (std::move (destination))
    {
        if (!(rate_hz_ > 0.0))
            throw std::invalid_argument ("StateSender: rate must be positive");
        thread_ = std::jthread ([this] (std::stop_token st) {
            using namespace std::chrono;
            const auto origin = steady_clock::now ();
            std::uint32_t seq = 0;
            for (std::int64_t k = 0; !st.stop_requested (); ++k)
            {
                const auto due = origin + duration_cast<steady_clock::duration> (duration<double> (static_cast<double> (k) / rate_hz_));
                std::this_thread::sleep_until (due);
                if (st.stop_requested ())
                    break;
                auto state = sampler_ ();
                state.seq = ++seq;
                try
                {
                    if (socket_.send_to (wire::encode_state (state), destination_))
                        sent_.fetch_add (1);
                }
                catch (const std::exception& e)
                {
                    spdlog::warn ("state sender: {}", e.what ());
                }
            }
        });
    }

    StateSender::~StateSender () { stop (); }

    void StateSender::stop ()
    {
        if (thread_.joinable ())
        {
            thread_.request_stop ();
            thread_.join ();
        }
    }

    // ---- UdpImpairmentProxy ---------------------------------------------

    struct UdpImpairmentProxy::Pending
    {
        std::uint64_t due_us;
        std::uint64_t order;
        bool to_upstream;
        Endpoint to;
        std::vector<std::uint8_t> bytes;

        bool operator> (const Pending& o) const noexcept { return due_us != o.due_us ? due_us > o.due_us : order > o.order; }
    };

    UdpImpairmentProxy::UdpImpairmentProxy (const Endpoint& listen, Endpoint upstream, LinkImpairment forward,
                                            LinkImpairment backward, std::uint64_t seed)
        : upstream_ (std::move (upstream)), forward_ (forward, seed), backward_ (backward, seed + 1)
    {
        front_.bind (listen);
        back_.bind ({"0.0.0.0", 0});
        thread_ = std::jthread ([this] (std::stop_token st) { loop (st); });
    }

    UdpImpairmentProxy::~UdpImpairmentProxy () { stop (); }

    void UdpImpairmentProxy::stop ()
    {
        if (thread_.joinable ())
        {
            thread_.request_stop ();
            thread_.join ();
        }
    }

    void UdpImpairmentProxy::loop (std::stop_token stop)
    {
        std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue;
        std::uint64_t order = 0;
        std::optional<Endpoint> client;
        std::array<std::uint8_t, 2048> buf{};

        while (!stop.stop_requested ())
        {
            auto now = monotonic_us ();
            while (!queue.empty () && queue.top ().due_us <= now)
            {
                const auto& p = queue.top ();
                (p.to_upstream ? back_ : front_).send_to (p.bytes, p.to);
                queue.pop ();
            }

            // Short polls on both sockets keep forwarding within ~0.5 ms of due time.
            for (const bool from_front : {true, false})
            {
                Endpoint from;
                auto& sock = from_front ? front_ : back_;
                const auto n = sock.receive (buf, &from, std::chrono::milliseconds (0));
                if (!n)
                    continue;
                now = monotonic_us ();
                if (from_front)
                    client = from;
                else if (!client)
                    continue;
                auto& model = from_front ? forward_ : backward_;
                const auto delay = model.sample_delay_us ();
                if (!delay)
                    continue;
                queue.push (Pending{now + static_cast<std::uint64_t> (*delay), order++, from_front,
                                    from_front ? upstream_ : *client, std::vector<std::uint8_t> (buf.begin (), buf.begin () + *n)});
            }
            std::this_thread::sleep_for (std::chrono::microseconds (200));
        }
    }

} // namespace hdt

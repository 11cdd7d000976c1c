#pragma once
/**
 * @file   gateway.hpp
 * @brief  Message gateway: receive-side filtering into the latest-state store,
 *         UDP endpoints, periodic state sender, latency probes and a
 *         delay/loss injecting UDP proxy.
 */

#include "hdt/can_frame.hpp"
#include "hdt/impairment.hpp"
#include "hdt/kinematics.hpp"
#include "hdt/state_store.hpp"
#include "hdt/wire.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace hdt
{
    /// Microseconds on the process-wide steady clock.
    [[nodiscard]] std::uint64_t monotonic_us () noexcept;

    /**
     * @brief Decodes one received datagram and applies it to `store`.
     *
     * STATE packets go through the sequence filter; header rejections bump
     * the filtered counter, length/body rejections the malformed counter.
     * The decoded value is returned so the caller can dispatch commands and
     * probes.
     */
    wire::Decoded ingest_datagram (LatestStateStore& store, std::span<const std::uint8_t> bytes, std::uint64_t arrival_us);

    struct Endpoint
    {
        std::string host{"127.0.0.1"};
        std::uint16_t port{0};

        /// Parses "host:port" or ":port". Throws std::invalid_argument.
        [[nodiscard]] static Endpoint parse (const std::string& text);
        [[nodiscard]] std::string str () const;

        friend bool operator== (const Endpoint&, const Endpoint&) = default;
    };

    /// RAII IPv4 UDP socket.
    class UdpSocket
    {
    public:
        UdpSocket ();
        ~UdpSocket ();
        UdpSocket (UdpSocket&& other) noexcept;
        UdpSocket& operator= (UdpSocket&& other) noexcept;
        UdpSocket (const UdpSocket&) = delete;
        UdpSocket& operator= (const UdpSocket&) = delete;

        /// Throws std::system_error on failure.
        void bind (const Endpoint& local);
        [[nodiscard]] std::uint16_t local_port () const;

        /// Returns false on a transient send failure.
        bool send_to (std::span<const std::uint8_t> bytes, const Endpoint& to);

        /// Waits up to `timeout`; returns the datagram length or nullopt on timeout.
        std::optional<std::size_t> receive (std::span<std::uint8_t> buffer, Endpoint* from, std::chrono::milliseconds timeout);

    private:
        int fd_{-1};
    };

    struct ProbeOptions
    {
        int count{20};
        std::chrono::milliseconds timeout{1000};
        std::chrono::milliseconds spacing{20};
    };

    struct ProbeResult
    {
        std::vector<double> one_way_s; ///< RTT/2 of every answered probe
        int sent{0};
        int timeouts{0};

        [[nodiscard]] bool ok () const noexcept { return !one_way_s.empty (); }
        /// Median of one_way_s; nullopt if no probe was answered.
        [[nodiscard]] std::optional<double> median () const;
    };

    /**
     * @brief Bound UDP endpoint with a background receive loop.
     *
     * STATE datagrams update the store (if any), COMMAND datagrams go to
     * the command handler, PROBE datagrams are echoed to their sender and
     * PROBE_ECHO datagrams complete pending probes.
     */
    class GatewayEndpoint
    {
    public:
        using CommandHandler = std::function<void (const CanFrame&)>;

        GatewayEndpoint (const Endpoint& bind, LatestStateStore* store, CommandHandler on_command = {});
        ~GatewayEndpoint ();
        GatewayEndpoint (const GatewayEndpoint&) = delete;
        GatewayEndpoint& operator= (const GatewayEndpoint&) = delete;

        [[nodiscard]] std::uint16_t port () const { return socket_.local_port (); }

        bool send_to (std::span<const std::uint8_t> bytes, const Endpoint& to);

        /// Sends PROBE datagrams to `peer` one at a time and collects RTT/2 estimates.
        ProbeResult probe (const Endpoint& peer, const ProbeOptions& options = {});

        void stop ();

    private:
        void receive_loop (std::stop_token stop);

        UdpSocket socket_;
        LatestStateStore* store_;
        CommandHandler on_command_;

        std::mutex probe_mutex_;
        std::condition_variable probe_cv_;
        std::map<std::uint32_t, std::uint64_t> probe_replies_; // probe_id -> receive time
        std::uint32_t next_probe_id_{1};

        std::jthread thread_;
    };

    /// One-way latency estimate against `peer` through a temporary endpoint.
    ProbeResult probe_roundtrip (const Endpoint& peer, const ProbeOptions& options = {});

    /**
     * @brief Emits one STATE datagram per tick at `rate_hz` until stopped.
     *
     * Ticks follow an absolute schedule (no drift). The sampler supplies
     * the state; the sender overwrites its seq with a fresh counter.
     */
    class StateSender
    {
    public:
        using Sampler = std::function<VehicleState ()>;

        StateSender (Sampler sampler, double rate_hz, Endpoint destination);
        ~StateSender ();
        StateSender (const StateSender&) = delete;
        StateSender& operator= (const StateSender&) = delete;

        void stop ();
        [[nodiscard]] std::uint64_t sent () const noexcept { return sent_.load (); }

    private:
        Sampler sampler_;
        double rate_hz_;
        Endpoint destination_;
        UdpSocket socket_;
        std::atomic<std::uint64_t> sent_{0};
        std::jthread thread_;
    };

    /**
     * @brief UDP relay that injects delay, jitter and loss in both directions.
     *
     * Clients talk to listen_port(); traffic is forwarded to `upstream`
     * and replies are returned to the most recent client address.
     */
    class UdpImpairmentProxy
    {
    public:
        UdpImpairmentProxy (const Endpoint& listen, Endpoint upstream, LinkImpairment forward, LinkImpairment backward,
                            std::uint64_t seed);
        ~UdpImpairmentProxy ();
        UdpImpairmentProxy (const UdpImpairmentProxy&) = delete;
        UdpImpairmentProxy& operator= (const UdpImpairmentProxy&) = delete;

        [[nodiscard]] std::uint16_t listen_port () const { return front_.local_port (); }
        void stop ();

    private:
        struct Pending;
        void loop (std::stop_token stop);

        UdpSocket front_;
        UdpSocket back_;
        Endpoint upstream_;
        ImpairmentModel forward_;
        ImpairmentModel backward_;
        std::jthread thread_;
    };

} // namespace hdt

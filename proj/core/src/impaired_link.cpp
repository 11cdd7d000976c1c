#include "hdt/impaired_link.hpp"

#include <algorithm>
#include <cmath>

namespace hdt
{
    namespace
    {
        // Uniform in [0, 1) from the top 53 bits; independent of the
        // standard library's distribution implementations.
        double unit (std::mt19937_64& rng) noexcept { return static_cast<double> (rng () >> 11) * 0x1.0p-53; }
    } // namespace

    ImpairmentModel::ImpairmentModel (LinkImpairment cfg, std::uint64_t seed)
        : cfg_ (cfg), fate_rng_ (seed), noise_rng_ (seed ^ 0x9E3779B97F4A7C15ULL)
    {
    }

    std::optional<std::int64_t> ImpairmentModel::sample_delay_us ()
    {
        // Always consume the same number of draws per datagram so schedules
        // stay aligned across configurations with different loss rates.
        const double u_loss = unit (fate_rng_);
        const double u_jitter = unit (fate_rng_);
        if (u_loss < cfg_.loss)
            return std::nullopt;
        const double ms = cfg_.delay_ms + cfg_.jitter_ms * (2.0 * u_jitter - 1.0);
        return static_cast<std::int64_t> (std::llround (std::max (0.0, ms) * 1000.0));
    }

    std::optional<std::int64_t> ImpairmentModel::next_noise_gap_us ()
    {
        if (cfg_.noise_rate_hz <= 0.0)
            return std::nullopt;
        const double u = unit (noise_rng_);
        const double gap_s = -std::log1p (-u) / cfg_.noise_rate_hz;
        return std::max<std::int64_t> (1, std::llround (gap_s * 1e6));
    }

    std::vector<std::uint8_t> ImpairmentModel::make_noise_datagram ()
    {
        const auto len = 1 + static_cast<std::size_t> (noise_rng_ () % 100);
        std::vector<std::uint8_t> out (len);
        for (auto& b : out)
            b = static_cast<std::uint8_t> (noise_rng_ ());
        if (out[0] == 'H')
            out[0] = 'h';
        return out;
    }

    ImpairedLink::ImpairedLink (EventLoop& loop, LinkImpairment cfg, std::uint64_t seed, Receiver receiver, bool in_order)
        : loop_ (loop), model_ (cfg, seed), receiver_ (std::move (receiver)), in_order_ (in_order)
    {
        schedule_noise ();
    }

    void ImpairedLink::send (std::vector<std::uint8_t> datagram)
    {
        ++stats_.sent;
        const auto delay = model_.sample_delay_us ();
        if (!delay)
        {
            ++stats_.lost;
            return;
        }
        auto arrival = loop_.now () + *delay;
        if (in_order_)
        {
            arrival = std::max (arrival, last_arrival_);
            last_arrival_ = arrival;
        }
        auto alive = alive_;
        loop_.at (arrival, [this, alive, d = std::move (datagram)] () {
            if (!*alive)
                return;
            ++stats_.delivered;
            receiver_ (d);
        });
    }

    void ImpairedLink::close ()
    {
        *alive_ = false;
    }

    void ImpairedLink::schedule_noise ()
    {
        const auto gap = model_.next_noise_gap_us ();
        if (!gap)
            return;
        auto alive = alive_;
        loop_.after (*gap, [this, alive] () {
            if (!*alive)
                return;
            ++stats_.noise;
            receiver_ (model_.make_noise_datagram ());
            schedule_noise ();
        });
    }

} // namespace hdt

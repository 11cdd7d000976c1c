#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace hdt
{
    /// Per-link network impairment: independent Bernoulli loss, fixed delay
    /// plus symmetric uniform jitter, and optional foreign "noise" datagrams.
    struct LinkImpairment
    {
        double delay_ms{0.0};
        double jitter_ms{0.0};   ///< each delivery is delayed by delay +- U(0, jitter)
        double loss{0.0};        ///< drop probability in [0, 1]
        double noise_rate_hz{0.0};

        friend bool operator== (const LinkImpairment&, const LinkImpairment&) = default;
    };

    /**
     * @brief Seeded sampler of per-datagram fate.
     *
     * Loss/delay decisions and noise generation use separate generators so
     * enabling noise never perturbs the delivery schedule of real traffic.
     */
    class ImpairmentModel
    {
    public:
        ImpairmentModel (LinkImpairment cfg, std::uint64_t seed);

        /// Delivery delay in microseconds, or nullopt if the datagram is lost.
        [[nodiscard]] std::optional<std::int64_t> sample_delay_us ();

        /// Gap until the next noise datagram (exponential inter-arrival), or nullopt if disabled.
        [[nodiscard]] std::optional<std::int64_t> next_noise_gap_us ();

        /// Random datagram that never carries the link's marker.
        [[nodiscard]] std::vector<std::uint8_t> make_noise_datagram ();

        [[nodiscard]] const LinkImpairment& config () const noexcept { return cfg_; }

    private:
        LinkImpairment cfg_;
        std::mt19937_64 fate_rng_;
        std::mt19937_64 noise_rng_;
    };

} // namespace hdt

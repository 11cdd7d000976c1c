#pragma once

#include "hdt/kinematics.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>

namespace hdt
{
    /// Latest accepted state plus the receiver-local arrival time.
    struct StoredState
    {
        VehicleState state{};
        std::uint64_t arrival_us{0};

        friend bool operator== (const StoredState&, const StoredState&) = default;
    };

    struct StoreCounters
    {
        std::uint64_t received{0};  ///< decoded STATE packets offered to the store
        std::uint64_t accepted{0};  ///< packets that replaced latest
        std::uint64_t dropped{0};   ///< stale or duplicate sequence numbers
        std::uint64_t filtered{0};  ///< header rejections (foreign traffic)
        std::uint64_t malformed{0}; ///< our marker, bad length or body

        friend bool operator== (const StoreCounters&, const StoreCounters&) = default;
    };

    /**
     * @brief Single-writer, many-reader holder of the freshest vehicle state.
     *
     * Implemented as a sequence lock over atomic words: the writer never
     * waits, readers retry until they observe an untorn copy.
     * Only one thread may call update()/count_*() at a time.
     */
    class LatestStateStore
    {
    public:
        LatestStateStore () = default;
        LatestStateStore (const LatestStateStore&) = delete;
        LatestStateStore& operator= (const LatestStateStore&) = delete;

        /// Replaces latest iff state.seq > latest.seq (or the store is empty).
        /// Returns whether it was accepted.
        bool update (const VehicleState& state, std::uint64_t arrival_us);

        void count_filtered () noexcept { filtered_.fetch_add (1, std::memory_order_relaxed); }
        void count_malformed () noexcept { malformed_.fetch_add (1, std::memory_order_relaxed); }

        [[nodiscard]] std::optional<StoredState> snapshot () const noexcept;
        [[nodiscard]] StoreCounters counters () const noexcept;

    private:
        static constexpr std::size_t kWords = (sizeof (StoredState) + 7) / 8;

        void publish (const StoredState& s) noexcept;

        std::atomic<std::uint64_t> version_{0};
        std::array<std::atomic<std::uint64_t>, kWords> words_{};
        std::atomic<bool> has_value_{false};

        // Writer-private copy of the latest sequence number.
        std::optional<std::uint32_t> latest_seq_;

        std::atomic<std::uint64_t> received_{0};
        std::atomic<std::uint64_t> accepted_{0};
        std::atomic<std::uint64_t> dropped_{0};
        std::atomic<std::uint64_t> filtered_{0};
        std::atomic<std::uint64_t> malformed_{0};
    };

} // namespace hdt

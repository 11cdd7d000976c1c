#include "hdt/state_store.hpp"

#include <cstring>
#include <type_traits>

namespace hdt
{
    static_assert (std::is_trivially_copyable_v<StoredState>);

    bool LatestStateStore::update (const VehicleState& state, std::uint64_t arrival_us)
    {
        received_.fetch_add (1, std::memory_order_relaxed);
        if (latest_seq_ && state.seq <= *latest_seq_)
        {
            dropped_.fetch_add (1, std::memory_order_relaxed);
            return false;
        }
        latest_seq_ = state.seq;
        publish (StoredState{state, arrival_us});
        accepted_.fetch_add (1, std::memory_order_relaxed);
        return true;
    }

    void LatestStateStore::publish (const StoredState& s) noexcept
    {
        std::array<std::uint64_t, kWords> raw{};
        std::memcpy (raw.data (), &s, sizeof (StoredState));

        const auto v = version_.load (std::memory_order_relaxed);
        version_.store (v + 1, std::memory_order_relaxed);
        std::atomic_thread_fence (std::memory_order_release);
        for (std::size_t i = 0; i < kWords; ++i)
            words_[i].store (raw[i], std::memory_order_relaxed);
        version_.store (v + 2, std::memory_order_release);
        has_value_.store (true, std::memory_order_release);
    }

    std::optional<StoredState> LatestStateStore::snapshot () const noexcept
    {
        if (!has_value_.load (std::memory_order_acquire))
            return std::nullopt;

        std::array<std::uint64_t, kWords> raw{};
        for (;;)
        {
            const auto before = version_.load (std::memory_order_acquire);
            if (before & 1U)
                continue;
            for (std::size_t i = 0; i < kWords; ++i)
                raw[i] = words_[i].load (std::memory_order_relaxed);
            std::atomic_thread_fence (std::memory_order_acquire);
            if (version_.load (std::memory_order_relaxed) == before)
                break;
        }
        StoredState out;
        std::memcpy (static_cast<void*> (&out), raw.data (), sizeof (StoredState));
        return out;
    }

    StoreCounters LatestStateStore::counters () const noexcept
    {
        return {received_.load (std::memory_order_relaxed), accepted_.load (std::memory_order_relaxed),
                dropped_.load (std::memory_order_relaxed), filtered_.load (std::memory_order_relaxed),
                malformed_.load (std::memory_order_relaxed)};
    }

} // namespace hdt

#pragma once

// Little-endian field access shared by the datagram and session codecs.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hdt::detail
{
    template <typename U> inline void put_le (std::uint8_t* out, U value) noexcept
    {
        for (std::size_t i = 0; i < sizeof (U); ++i)
            out[i] = static_cast<std::uint8_t> (static_cast<std::uint64_t> (value) >> (8 * i));
    }

    template <typename U> [[nodiscard]] inline U get_le (const std::uint8_t* in) noexcept
    {
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof (U); ++i)
            v |= static_cast<std::uint64_t> (in[i]) << (8 * i);
        return static_cast<U> (v);
    }

    inline void put_f64 (std::uint8_t* out, double value) noexcept { put_le (out, std::bit_cast<std::uint64_t> (value)); }

    [[nodiscard]] inline double get_f64 (const std::uint8_t* in) noexcept
    {
        return std::bit_cast<double> (get_le<std::uint64_t> (in));
    }

    /// Append-only writer over a byte vector.
    class ByteWriter
    {
    public:
        explicit ByteWriter (std::vector<std::uint8_t>& out) : out_ (out) {}

        void u8 (std::uint8_t v) { out_.push_back (v); }
        void u16 (std::uint16_t v) { append (v); }
        void u32 (std::uint32_t v) { append (v); }
        void u64 (std::uint64_t v) { append (v); }
        void f64 (double v) { append (std::bit_cast<std::uint64_t> (v)); }

    private:
        template <typename U> void append (U v)
        {
            const auto at = out_.size ();
            out_.resize (at + sizeof (U));
            put_le (out_.data () + at, v);
        }

        std::vector<std::uint8_t>& out_;
    };

    /// Bounds-checked reader; any overrun latches ok() to false and yields zeros.
    class ByteReader
    {
    public:
        explicit ByteReader (std::span<const std::uint8_t> in) : in_ (in) {}

        std::uint8_t u8 () { return take<std::uint8_t> (); }
        std::uint16_t u16 () { return take<std::uint16_t> (); }
        std::uint32_t u32 () { return take<std::uint32_t> (); }
        std::uint64_t u64 () { return take<std::uint64_t> (); }
        double f64 () { return std::bit_cast<double> (take<std::uint64_t> ()); }

        [[nodiscard]] bool ok () const noexcept { return ok_; }
        [[nodiscard]] std::size_t remaining () const noexcept { return in_.size () - pos_; }

    private:
        template <typename U> U take ()
        {
            if (!ok_ || remaining () < sizeof (U))
            {
                ok_ = false;
                return U{};
            }
            const U v = get_le<U> (in_.data () + pos_);
            pos_ += sizeof (U);
            return v;
        }

        std::span<const std::uint8_t> in_;
        std::size_t pos_{0};
        bool ok_{true};
    };

} // namespace hdt::detail

#include "hdt/gateway.hpp"
#include "hdt/wire.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace hdt;
using namespace hdt::wire;

namespace
{
    VehicleState sample_state ()
    {
        VehicleState s;
        s.pose = {1.5, -2.25, 0.75};
        s.v = 3.0;
        s.omega = -0.125;
        s.timestamp_us = 0x0102030405060708ULL;
        s.seq = 42;
        return s;
    }

    template <std::size_t N> std::vector<std::uint8_t> vec (const std::array<std::uint8_t, N>& a)
    {
        return {a.begin (), a.end ()};
    }

    // Re-encodes an accepted decode result; a correct decoder only accepts what the encoder can produce.
    std::vector<std::uint8_t> reencode (const Decoded& d)
    {
        if (const auto* s = std::get_if<VehicleState> (&d))
            return vec (encode_state (*s));
        if (const auto* f = std::get_if<CanFrame> (&d))
            return vec (encode_command_frame (*f));
        if (const auto* p = std::get_if<ProbePacket> (&d))
            return vec (encode_probe (*p));
        return {};
    }
} // namespace

TEST (Wire, StateLayout)
{
    const auto bytes = encode_state (sample_state ());
    ASSERT_EQ (bytes.size (), 60u);
    const std::uint8_t header[8] = {'H', 'D', 'T', '1', 1, 1, 0, 0};
    EXPECT_EQ (std::memcmp (bytes.data (), header, 8), 0);
    // timestamp little-endian
    EXPECT_EQ (bytes[8], 0x08);
    EXPECT_EQ (bytes[15], 0x01);
    double x = 0;
    std::memcpy (&x, bytes.data () + 16, 8);
    EXPECT_EQ (x, 1.5);
    EXPECT_EQ (bytes[56], 42);
    EXPECT_EQ (bytes[59], 0);
}

TEST (Wire, RoundTrips)
{
    const auto s = sample_state ();
    const auto d = decode_datagram (encode_state (s));
    ASSERT_TRUE (std::holds_alternative<VehicleState> (d));
    EXPECT_EQ (std::get<VehicleState> (d), s);

    CanFrame f{0x502, 8, {1, 2, 3, 4, 5, 6, 7, 8}};
    const auto c = encode_command_frame (f);
    EXPECT_EQ (c.size (), kCommandSize);
    EXPECT_EQ (c[5], 2);
    EXPECT_EQ (std::get<CanFrame> (decode_datagram (c)), f);

    const ProbePacket p{7, 123456789, true};
    const auto pb = encode_probe (p);
    EXPECT_EQ (pb.size (), kProbeSize);
    EXPECT_EQ (pb[5], 4);
    EXPECT_EQ (std::get<ProbePacket> (decode_datagram (pb)), p);
}

TEST (Wire, EncoderContracts)
{
    auto s = sample_state ();
    s.v = std::nan ("");
    EXPECT_THROW ((void) encode_state (s), std::invalid_argument);
    EXPECT_THROW ((void) encode_command_frame ({0x800, 8, {}}), std::invalid_argument);
    EXPECT_THROW ((void) encode_command_frame ({0x100, 9, {}}), std::invalid_argument);
}

TEST (Wire, Rejections)
{
    auto reason = [] (std::vector<std::uint8_t> b) {
        const auto d = decode_datagram (b);
        EXPECT_TRUE (std::holds_alternative<Rejection> (d));
        return std::holds_alternative<Rejection> (d) ? std::get<Rejection> (d).reason : RejectReason::BadPayload;
    };
    const auto good = vec (encode_state (sample_state ()));

    EXPECT_EQ (reason ({}), RejectReason::BadMagic);
    EXPECT_EQ (reason ({'H', 'D'}), RejectReason::BadMagic);
    auto b = good;
    b[0] = 'X';
    EXPECT_EQ (reason (b), RejectReason::BadMagic);
    b = good;
    b[4] = 2;
    EXPECT_EQ (reason (b), RejectReason::BadVersion);
    b = good;
    b[6] = 1;
    EXPECT_EQ (reason (b), RejectReason::BadVersion);
    b = good;
    b[5] = 9;
    EXPECT_EQ (reason (b), RejectReason::BadType);
    b = good;
    b.pop_back ();
    EXPECT_EQ (reason (b), RejectReason::BadLength);
    b = good;
    b.push_back (0);
    EXPECT_EQ (reason (b), RejectReason::BadLength);
    b = good;
    std::memset (b.data () + 16, 0xFF, 8);
    EXPECT_EQ (reason (b), RejectReason::BadPayload);

    auto c = vec (encode_command_frame ({0x100, 8, {}}));
    c[12] = 9;
    EXPECT_EQ (reason (c), RejectReason::BadPayload);
}

TEST (Wire, FuzzNeverFalseAccepts)
{
    std::mt19937_64 rng (99);
    const std::vector<std::vector<std::uint8_t>> seeds = {
        vec (encode_state (sample_state ())), vec (encode_command_frame ({0x501, 8, {1, 0, 0, 0, 0x30, 0x75, 0, 0}})),
        vec (encode_probe ({1, 2, false})), vec (encode_probe ({3, 4, true}))};
    std::size_t accepted = 0;
    for (int i = 0; i < 30000; ++i)
    {
        const auto bytes = i % 3 == 0 ? oracle::random_bytes (rng, 80) : oracle::mutate (rng, seeds[rng () % seeds.size ()]);
        const auto d = decode_datagram (bytes);
        if (std::holds_alternative<Rejection> (d))
            continue;
        ++accepted;
        ASSERT_EQ (reencode (d), bytes);
    }
    EXPECT_GT (accepted, 0u);
}

TEST (Ingest, CountersAndSequenceFilter)
{
    LatestStateStore store;
    auto s = sample_state ();
    s.seq = 5;
    (void) ingest_datagram (store, encode_state (s), 100);
    s.seq = 4;
    (void) ingest_datagram (store, encode_state (s), 200);
    s.seq = 5;
    (void) ingest_datagram (store, encode_state (s), 300);
    s.seq = 6;
    (void) ingest_datagram (store, encode_state (s), 400);
    const std::vector<std::uint8_t> noise = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    (void) ingest_datagram (store, noise, 500);
    auto bad = vec (encode_state (s));
    bad.resize (30);
    (void) ingest_datagram (store, bad, 600);

    const auto c = store.counters ();
    EXPECT_EQ (c.received, 4u);
    EXPECT_EQ (c.accepted, 2u);
    EXPECT_EQ (c.dropped, 2u);
    EXPECT_EQ (c.filtered, 1u);
    EXPECT_EQ (c.malformed, 1u);
    const auto snap = store.snapshot ();
    ASSERT_TRUE (snap);
    EXPECT_EQ (snap->state.seq, 6u);
    EXPECT_EQ (snap->arrival_us, 400u);
}

TEST (Ingest, ReturnsDecodedForDispatch)
{
    LatestStateStore store;
    const auto d = ingest_datagram (store, encode_probe ({9, 10, false}), 1);
    ASSERT_TRUE (std::holds_alternative<ProbePacket> (d));
    EXPECT_FALSE (store.snapshot ());
    EXPECT_EQ (store.counters ().received, 0u);
}

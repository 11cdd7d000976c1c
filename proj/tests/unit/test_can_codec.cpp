#include "hdt/can_codec.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hdt;
using namespace hdt::can;

namespace
{
    const CanFrame& frame_for (const std::vector<CanFrame>& frames, std::uint32_t id)
    {
        for (const auto& f : frames)
            if (f.can_id == id)
                return f;
        throw std::runtime_error ("missing frame");
    }

    std::map<std::string, double> decode_all (const std::vector<CanFrame>& frames)
    {
        std::map<std::string, double> out;
        for (const auto& f : frames)
        {
            const auto d = decode_frame (f);
            for (const auto& [k, v] : std::get<DecodedFrame> (d).signals)
                out[k] = v;
        }
        return out;
    }
} // namespace

TEST (CanCodec, GoldenPayloads)
{
    ControlCommand zero;
    const auto frames = encode_command (zero);
    ASSERT_EQ (frames.size (), 5u);
    EXPECT_EQ (payload_hex (frame_for (frames, 0x502)), "01 00 00 00 30 75 00 00");
    EXPECT_EQ (payload_hex (frame_for (frames, 0x503)), "01 00 01 01 64 00 00 00");

    ControlCommand brake;
    brake.brake_pct = 40;
    EXPECT_EQ (payload_hex (frame_for (encode_command (brake), 0x504)), "01 28 00 00 00 00 00 00");

    ControlCommand lights;
    lights.turn_left = true;
    lights.brake_light = true;
    EXPECT_EQ (payload_hex (frame_for (encode_command (lights), 0x505)), "01 01 00 00 00 00 00 00");

    ControlCommand engaged;
    engaged.engage = true;
    EXPECT_EQ (payload_hex (frame_for (encode_command (engaged), 0x501)), "01 00 00 00 00 00 00 00");
    EXPECT_EQ (payload_hex (frame_for (frames, 0x501)), "00 00 00 00 00 00 00 00");
}

TEST (CanCodec, FramesFollowMatrixOrder)
{
    const auto frames = encode_command ({});
    const std::uint32_t ids[] = {0x501, 0x502, 0x503, 0x504, 0x505};
    for (std::size_t i = 0; i < frames.size (); ++i)
    {
        EXPECT_EQ (frames[i].can_id, ids[i]);
        EXPECT_EQ (frames[i].dlc, 8);
    }
}

TEST (CanCodec, SteerExtremes)
{
    ControlCommand c;
    c.steer_deg = 30.0;
    EXPECT_EQ (payload_hex (frame_for (encode_command (c), 0x502)), "01 00 00 00 60 EA 00 00");
    c.steer_deg = -30.0;
    EXPECT_EQ (payload_hex (frame_for (encode_command (c), 0x502)), "01 00 00 00 00 00 00 00");
    c.steer_deg = 45.0; // clamped
    EXPECT_EQ (payload_hex (frame_for (encode_command (c), 0x502)), "01 00 00 00 60 EA 00 00");
}

TEST (CanCodec, RoundTripWithinHalfLsb)
{
    std::mt19937_64 rng (77);
    std::uniform_real_distribution<double> steer (-30.0, 30.0), accel (-5.0, 5.0), brake (0.0, 100.0);
    std::bernoulli_distribution coin (0.5);
    for (int i = 0; i < 10000; ++i)
    {
        ControlCommand c;
        c.steer_deg = steer (rng);
        c.accel_mps2 = accel (rng);
        c.brake_pct = brake (rng);
        c.turn_left = coin (rng);
        c.turn_right = coin (rng);
        c.brake_light = coin (rng);
        c.engage = coin (rng);
        c.steer_valid = coin (rng);
        const auto s = decode_all (encode_command (c));
        ASSERT_LE (std::abs (s.at ("Steer_AngleCmd") - c.steer_deg), 0.0005 + 1e-9);
        ASSERT_LE (std::abs (s.at ("AccelCmd") - c.accel_mps2), 0.025 + 1e-9);
        ASSERT_LE (std::abs (s.at ("BrakeCmd") - c.brake_pct), 0.5 + 1e-9);
        ASSERT_EQ (s.at ("TurnLeft"), c.turn_left ? 1.0 : 0.0);
        ASSERT_EQ (s.at ("TurnRight"), c.turn_right ? 1.0 : 0.0);
        ASSERT_EQ (s.at ("BrakeLight"), c.brake_light ? 1.0 : 0.0);
        ASSERT_EQ (s.at ("IECU_Flag"), c.engage ? 1.0 : 0.0);
        ASSERT_EQ (s.at ("Steer_Valid"), c.steer_valid ? 1.0 : 0.0);
    }
}

TEST (CanCodec, DecodeRejections)
{
    CanFrame unknown{0x123, 8, {}};
    EXPECT_EQ (std::get<FrameRejection> (decode_frame (unknown)), FrameRejection::UnknownId);
    CanFrame short_frame{0x502, 4, {}};
    EXPECT_EQ (std::get<FrameRejection> (decode_frame (short_frame)), FrameRejection::BadLength);
}

TEST (CanCodec, NonFiniteCommandRejected)
{
    ControlCommand c;
    c.steer_deg = std::nan ("");
    EXPECT_THROW ((void) encode_command (c), std::invalid_argument);
}

TEST (BitPacking, InsertExtractProperty)
{
    std::mt19937_64 rng (5);
    for (int i = 0; i < 20000; ++i)
    {
        const unsigned len = 1 + rng () % 32;
        const unsigned start = rng () % (65 - len);
        const std::uint64_t raw = rng () & ((len == 64) ? ~0ULL : ((1ULL << len) - 1));
        std::array<std::uint8_t, 8> payload{};
        for (auto& b : payload)
            b = static_cast<std::uint8_t> (rng ());
        const auto before = payload;
        insert_bits (payload, start, len, raw);
        ASSERT_EQ (extract_bits (payload, start, len), raw);
        // bits outside the field are untouched
        for (unsigned bit = 0; bit < 64; ++bit)
        {
            if (bit >= start && bit < start + len)
                continue;
            ASSERT_EQ ((payload[bit / 8] >> (bit % 8)) & 1, (before[bit / 8] >> (bit % 8)) & 1);
        }
    }
}

TEST (Quantize, RoundsHalfAwayAndClamps)
{
    SignalSpec s{"AccelCmd", 4, 32, 8, -5.0, 0.05, -5.0, 5.0};
    EXPECT_EQ (quantize (0.0, s), 100u);
    EXPECT_EQ (quantize (-10.0, s), 0u);
    EXPECT_EQ (quantize (10.0, s), 200u);
    EXPECT_EQ (quantize (0.025, s), 101u);
    EXPECT_DOUBLE_EQ (dequantize (100, s), 0.0);
}

TEST (Matrix, JsonRoundTrip)
{
    const auto& m = CommunicationMatrix::default_matrix ();
    const auto copy = CommunicationMatrix::from_json_text (m.to_json_text ());
    ControlCommand c;
    c.steer_deg = 12.345;
    c.brake_pct = 17;
    c.engage = true;
    EXPECT_EQ (encode_command (c, copy), encode_command (c, m));
}

TEST (Matrix, Validation)
{
    const auto bad = [] (std::string text) {
        EXPECT_THROW ((void) CommunicationMatrix::from_json_text (text), ConfigError) << text;
    };
    bad ("not json");
    bad (R"({"messages":[{"name":"IECU_Flag","can_id":"0x9999","signals":[{"name":"IECU_Flag","start_bit":0,"length":8}]}]})");
    bad (R"({"messages":[{"name":"IECU_Flag","can_id":"zzz","signals":[{"name":"IECU_Flag","start_bit":0,"length":8}]}]})");
    bad (R"({"messages":[{"name":"IECU_Flag","can_id":1281,"signals":[{"name":"Nope","start_bit":0,"length":8}]}]})");
    bad (R"({"messages":[{"name":"IECU_Flag","can_id":1281,"signals":[{"name":"IECU_Flag","start_bit":60,"length":8}]}]})");
    bad (R"({"messages":[{"name":"IECU_Steer","can_id":1282,"signals":[{"name":"Steer_Valid","start_bit":0,"length":8},{"name":"Steer_AngleCmd","start_bit":4,"length":16}]}]})");
    bad (R"({"messages":[{"name":"A","can_id":1281,"signals":[{"name":"IECU_Flag","start_bit":0,"length":8}]},{"name":"B","can_id":1281,"signals":[{"name":"Steer_Valid","start_bit":0,"length":8}]}]})");
    bad (R"({"messages":[{"name":"IECU_Steer","can_id":1282,"signals":[{"name":"Steer_AngleCmd","start_bit":32,"start_byte":5,"length":16}]}]})");
}

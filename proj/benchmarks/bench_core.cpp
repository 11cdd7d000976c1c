#include "hdt/can_codec.hpp"
#include "hdt/gateway.hpp"
#include "hdt/kinematics.hpp"
#include "hdt/session.hpp"
#include "hdt/state_store.hpp"
#include "hdt/wire.hpp"

#include <benchmark/benchmark.h>

using namespace hdt;

static void BM_CtrvExtrapolate (benchmark::State& state)
{
    VehicleState s;
    s.pose = {1.0, 2.0, 0.3};
    s.v = 3.0;
    s.omega = 0.4;
    double dt = 0.0;
    for (auto _ : state)
    {
        dt = dt > 0.2 ? 0.0 : dt + 1e-3;
        benchmark::DoNotOptimize (ctrv_extrapolate (s, dt));
    }
}
BENCHMARK (BM_CtrvExtrapolate);

static void BM_EmaHeading (benchmark::State& state)
{
    SmootherState s{0.0, 0.3, true};
    double raw = 3.0;
    for (auto _ : state)
    {
        raw = -raw;
        s = ema_heading (s, raw);
        benchmark::DoNotOptimize (s);
    }
}
BENCHMARK (BM_EmaHeading);

static void BM_EncodeCommand (benchmark::State& state)
{
    can::ControlCommand c;
    c.engage = true;
    c.steer_deg = 12.5;
    c.accel_mps2 = 1.0;
    for (auto _ : state)
        benchmark::DoNotOptimize (can::encode_command (c));
}
BENCHMARK (BM_EncodeCommand);

static void BM_DecodeFrame (benchmark::State& state)
{
    can::ControlCommand c;
    c.steer_deg = -7.0;
    const auto frames = can::encode_command (c);
    std::size_t i = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize (can::decode_frame (frames[i++ % frames.size ()]));
}
BENCHMARK (BM_DecodeFrame);

static void BM_IngestState (benchmark::State& state)
{
    LatestStateStore store;
    VehicleState s;
    std::uint64_t t = 0;
    for (auto _ : state)
    {
        ++s.seq;
        const auto bytes = wire::encode_state (s);
        benchmark::DoNotOptimize (ingest_datagram (store, bytes, ++t));
    }
}
BENCHMARK (BM_IngestState);

static void BM_GlobalStateFrame (benchmark::State& state)
{
    session::GlobalWorldState g;
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t> (state.range (0)); ++i)
        g.vehicles.push_back ({i, EntityKind::Virtual, 1.0 * i, 2.0, 0.1, 3.0, 0});
    for (auto _ : state)
    {
        const auto frame = session::encode_frame (g);
        benchmark::DoNotOptimize (session::fnv1a (frame));
    }
}
BENCHMARK (BM_GlobalStateFrame)->Arg (4)->Arg (64);
BENCHMARK_MAIN ();

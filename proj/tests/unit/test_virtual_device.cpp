#include "doctest.h"

#include <thread>

#include "flexitac/errors.hpp"
#include "flexitac/virtual_device.hpp"

using namespace flexitac;

namespace {

FrameSource ramp(const GridConfig& g) {
    return [g](std::uint64_t k) {
        return make_uniform_frame(g, static_cast<std::uint16_t>(k % (g.max_count() + 1u)));
    };
}

class FailingSink : public ByteSink {
public:
    explicit FailingSink(int ok_writes) : left_(ok_writes) {}
    void write(ByteView) override {
        if (left_-- <= 0) throw TransportError("sink closed");
        ++writes;
    }
    int writes = 0;

private:
    int left_;
};

}  // namespace

TEST_CASE("non-realtime timestamps follow nominal time") {
    const auto g = GridConfig::preset("8x16");
    DeviceOptions opt;
    opt.period = std::chrono::milliseconds(10);
    opt.frame_count = 100;
    opt.mode = TimingMode::non_realtime;
    MemorySink sink;
    const auto stats = virtual_device_run(ramp(g), opt, sink);
    CHECK(stats.frames == 100);
    CHECK(stats.bytes == 100 * encoded_frame_size(g));

    const auto log = decode_stream(sink.data());
    REQUIRE(log.frames.size() == 100);
    for (std::size_t k = 0; k < 100; ++k) {
        CHECK(log.frames[k].timestamp_ms == 10 * k);
        CHECK(log.frames[k].sequence == k);
    }
    CHECK(log.frames.back().timestamp_ms == 990);
}

TEST_CASE("sequence wraps at 16 bits") {
    const auto g = GridConfig::preset("8x16");
    DeviceOptions opt;
    opt.frame_count = 3;
    opt.mode = TimingMode::non_realtime;
    opt.first_sequence = 65535;
    MemorySink sink;
    virtual_device_run(ramp(g), opt, sink);
    const auto log = decode_stream(sink.data());
    REQUIRE(log.frames.size() == 3);
    CHECK(log.frames[0].sequence == 65535);
    CHECK(log.frames[1].sequence == 0);
    CHECK(log.frames[2].sequence == 1);
}

TEST_CASE("loopback of 300 frames through the decoder") {
    const auto g = GridConfig::preset("12x32");
    DeviceOptions opt;
    opt.frame_count = 300;
    opt.mode = TimingMode::non_realtime;
    MemorySink sink;
    virtual_device_run(ramp(g), opt, sink);
    StreamDecoder dec;
    CHECK(dec.feed(sink.data()).size() == 300);
    CHECK(dec.stats().frames_corrupt == 0);
}

TEST_CASE("threaded producer and consumer over a byte channel") {
    const auto g = GridConfig::preset("16x16");
    DeviceOptions opt;
    opt.frame_count = 200;
    opt.mode = TimingMode::non_realtime;

    ByteChannel channel;
    std::thread producer([&] {
        virtual_device_run(ramp(g), opt, channel);
        channel.close();
    });
    StreamDecoder dec;
    std::size_t received = 0;
    while (auto chunk = channel.read()) received += dec.feed(*chunk).size();
    producer.join();
    CHECK(received == 200);
    CHECK(dec.stats().frames_corrupt == 0);
}

TEST_CASE("realtime and non-realtime emit identical bytes") {
    const auto g = GridConfig::preset("8x16");
    DeviceOptions opt;
    opt.period = std::chrono::milliseconds(2);
    opt.frame_count = 25;
    MemorySink rt, fast;
    opt.mode = TimingMode::realtime;
    const auto stats = virtual_device_run(ramp(g), opt, rt);
    opt.mode = TimingMode::non_realtime;
    virtual_device_run(ramp(g), opt, fast);
    CHECK(rt.data() == fast.data());
    CHECK(stats.mean_period_s > 0.0);
    CHECK(stats.elapsed_s >= 0.048 - 1e-3);
}

TEST_CASE("sink failure stops the device") {
    const auto g = GridConfig::preset("8x16");
    DeviceOptions opt;
    opt.frame_count = 10;
    opt.mode = TimingMode::non_realtime;
    FailingSink sink(4);
    CHECK_THROWS_AS(virtual_device_run(ramp(g), opt, sink), TransportError);
    CHECK(sink.writes == 4);
}

TEST_CASE("period validation") {
    CHECK(period_from_rate(100.0) == std::chrono::microseconds(10'000));
    CHECK_THROWS_AS(period_from_rate(0.0), ConfigError);
    DeviceOptions opt;
    opt.period = std::chrono::microseconds(0);
    MemorySink sink;
    CHECK_THROWS_AS(virtual_device_run(ramp(GridConfig::make(1, 1)), opt, sink), ConfigError);
}

TEST_CASE("zero frames is an empty stream") {
    DeviceOptions opt;
    opt.frame_count = 0;
    MemorySink sink;
    const auto stats = virtual_device_run(ramp(GridConfig::make(1, 1)), opt, sink);
    CHECK(stats.frames == 0);
    CHECK(sink.data().empty());
}

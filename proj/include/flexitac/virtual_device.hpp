#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>

#include "flexitac/core_model.hpp"
#include "flexitac/wire_protocol.hpp"

namespace flexitac {

class ByteSink {
public:
    virtual ~ByteSink() = default;
    // Throws TransportError when the bytes cannot be delivered.
    virtual void write(ByteView bytes) = 0;
    virtual void flush() {}
};

class MemorySink : public ByteSink {
public:
    void write(ByteView bytes) override { data_.insert(data_.end(), bytes.begin(), bytes.end()); }
    const Bytes& data() const { return data_; }

private:
    Bytes data_;
};

/// Buffered file writer. `path == "-"` writes to stdout.
class FileSink : public ByteSink {
public:
    explicit FileSink(const std::string& path);
    ~FileSink() override;
    FileSink(const FileSink&) = delete;
    FileSink& operator=(const FileSink&) = delete;

    void write(ByteView bytes) override;
    void flush() override;

private:
    std::FILE* file_ = nullptr;
    bool owned_ = false;
};

/// Ordered, lossless in-memory byte channel between a producer thread and a
/// consumer thread.
class ByteChannel : public ByteSink {
public:
    void write(ByteView bytes) override;
    void close();

    // Blocks until bytes are available or the channel is closed. Returns
    // nullopt once closed and drained.
    std::optional<Bytes> read();

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Bytes> chunks_;
    bool closed_ = false;
};

enum class TimingMode { realtime, non_realtime };

// Produces the payload for frame `index`; the device stamps sequence and time.
using FrameSource = std::function<TactileFrame(std::uint64_t index)>;

struct DeviceOptions {
    std::chrono::microseconds period{10'000};
    std::uint64_t frame_count = 0;
    TimingMode mode = TimingMode::realtime;
    std::uint16_t first_sequence = 0;
};

struct StreamStats {
    std::uint64_t frames = 0;
    std::uint64_t bytes = 0;
    double nominal_period_s = 0.0;
    // Wall-clock emission statistics; zero in non-realtime mode.
    double mean_period_s = 0.0;
    double jitter_s = 0.0;               // standard deviation of inter-frame periods
    double worst_window_error = 0.0;     // max relative error of any 100-frame window mean
    double elapsed_s = 0.0;
};

/// Emits `frame_count` encoded frames, one per period. Frame k carries
/// sequence first_sequence + k (mod 2^16) and timestamp k * period in ms.
/// Realtime mode schedules against absolute deadlines so sleep error does not
/// accumulate. Non-realtime mode writes the same bytes without sleeping.
StreamStats virtual_device_run(const FrameSource& source, const DeviceOptions& options,
                               ByteSink& sink);

std::chrono::microseconds period_from_rate(double rate_hz);

}  // namespace flexitac

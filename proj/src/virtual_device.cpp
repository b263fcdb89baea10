#include "flexitac/virtual_device.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>
#include <vector>

#include "flexitac/errors.hpp"

namespace flexitac {

FileSink::FileSink(const std::string& path) {
    if (path == "-") {
        file_ = stdout;
        return;
    }
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw TransportError("cannot open '" + path + "': " + std::strerror(errno));
    owned_ = true;
}

FileSink::~FileSink() {
    if (owned_ && file_) std::fclose(file_);
}

void FileSink::write(ByteView bytes) {
    if (bytes.empty()) return;
    if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size())
        throw TransportError("short write to sink");
}

void FileSink::flush() {
    if (std::fflush(file_) != 0) throw TransportError("flush failed");
}

void ByteChannel::write(ByteView bytes) {
    {
        std::lock_guard lock(mu_);
        if (closed_) throw TransportError("write to closed channel");
        chunks_.emplace_back(bytes.begin(), bytes.end());
    }
    cv_.notify_one();
}

void ByteChannel::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::optional<Bytes> ByteChannel::read() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !chunks_.empty(); });
    if (chunks_.empty()) return std::nullopt;
    Bytes out = std::move(chunks_.front());
    chunks_.pop_front();
    return out;
}

std::chrono::microseconds period_from_rate(double rate_hz) {
    if (!(rate_hz > 0.0) || !std::isfinite(rate_hz))
        throw ConfigError("rate must be positive");
    return std::chrono::microseconds(static_cast<std::int64_t>(std::llround(1e6 / rate_hz)));
}

StreamStats virtual_device_run(const FrameSource& source, const DeviceOptions& options,
                               ByteSink& sink) {
    using Clock = std::chrono::steady_clock;
    if (options.period.count() <= 0) throw ConfigError("device period must be positive");

    StreamStats stats;
    stats.nominal_period_s = std::chrono::duration<double>(options.period).count();
    const bool realtime = options.mode == TimingMode::realtime;

    std::vector<Clock::time_point> emitted;
    if (realtime) emitted.reserve(options.frame_count);

    Bytes buf;
    const auto start = Clock::now();
    for (std::uint64_t k = 0; k < options.frame_count; ++k) {
        TactileFrame frame = source(k);
        frame.sequence = static_cast<std::uint16_t>(options.first_sequence + k);
        const std::uint64_t t_us = k * static_cast<std::uint64_t>(options.period.count());
        frame.timestamp_ms = static_cast<std::uint32_t>(t_us / 1000);

        buf.clear();
        encode_frame_into(frame, buf);

        if (realtime) std::this_thread::sleep_until(start + k * options.period);
        sink.write(buf);
        if (realtime) {
            sink.flush();
            emitted.push_back(Clock::now());
        }
        ++stats.frames;
        stats.bytes += buf.size();
    }
    sink.flush();
    stats.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();

    if (realtime && emitted.size() >= 2) {
        const auto n = emitted.size();
        std::vector<double> periods(n - 1);
        for (std::size_t i = 1; i < n; ++i)
            periods[i - 1] = std::chrono::duration<double>(emitted[i] - emitted[i - 1]).count();
        stats.mean_period_s =
            std::chrono::duration<double>(emitted.back() - emitted.front()).count() / (n - 1);
        double var = 0.0;
        for (double p : periods) var += (p - stats.mean_period_s) * (p - stats.mean_period_s);
        stats.jitter_s = std::sqrt(var / periods.size());

        const std::size_t window = std::min<std::size_t>(100, n - 1);
        for (std::size_t i = 0; i + window < n; ++i) {
            const double mean =
                std::chrono::duration<double>(emitted[i + window] - emitted[i]).count() / window;
            stats.worst_window_error =
                std::max(stats.worst_window_error,
                         std::abs(mean - stats.nominal_period_s) / stats.nominal_period_s);
        }
    }
    return stats;
}

}  // namespace flexitac

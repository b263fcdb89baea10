#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "flexitac/core_model.hpp"

namespace flexitac {

// Frame layout (all multi-byte integers little-endian except the CRC):
//
//   off  size  field
//   0    2     sync 0xAA 0x55
//   2    1     version (0x01)
//   3    1     config_id
//   4    2     sequence
//   6    4     timestamp_ms
//   10   2*N   payload, one u16 per taxel, row-major
//   ..   2     CRC-16/CCITT-FALSE over bytes [2, 10 + 2N), big-endian
inline constexpr std::uint8_t kSync0 = 0xAA;
inline constexpr std::uint8_t kSync1 = 0x55;
inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::size_t kCrcSize = 2;

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// poly 0x1021, init 0xFFFF, no reflection, no xor-out.
std::uint16_t crc16_ccitt_false(ByteView data, std::uint16_t crc = 0xFFFF);

std::size_t encoded_frame_size(const GridConfig& grid);

/// Maps wire config ids to grids. Starts with the four presets; a host can
/// register extra ids (e.g. kCustomConfigId) for non-preset pads.
class ConfigRegistry {
public:
    ConfigRegistry();

    void add(const GridConfig& grid);
    const GridConfig* find(std::uint8_t config_id) const;

    static const ConfigRegistry& defaults();

private:
    std::map<std::uint8_t, GridConfig> grids_;
};

Bytes encode_frame(const TactileFrame& frame);
void encode_frame_into(const TactileFrame& frame, Bytes& out);

// `bytes` must be exactly one frame. Throws FramingError, ProtocolError or
// CorruptionError.
TactileFrame decode_frame(ByteView bytes,
                          const ConfigRegistry& registry = ConfigRegistry::defaults());

struct DecoderStats {
    std::uint64_t frames_ok = 0;
    std::uint64_t frames_corrupt = 0;
    std::uint64_t bytes_discarded = 0;

    bool operator==(const DecoderStats&) const = default;
};

/// Resynchronizing stream decoder. Output is independent of how the stream is
/// split into chunks: a candidate is only judged once all of its bytes are
/// buffered. On a bad candidate one byte is dropped and the scan resumes at the
/// next 0xAA 0x55.
class StreamDecoder {
public:
    explicit StreamDecoder(ConfigRegistry registry = ConfigRegistry::defaults());

    std::vector<TactileFrame> feed(ByteView chunk);

    const DecoderStats& stats() const { return stats_; }
    std::size_t buffered() const { return buf_.size() - head_; }
    const ConfigRegistry& registry() const { return registry_; }

private:
    void discard(std::size_t n);
    void compact();

    ConfigRegistry registry_;
    Bytes buf_;
    std::size_t head_ = 0;
    DecoderStats stats_;
};

struct DecodedLog {
    std::vector<TactileFrame> frames;
    DecoderStats stats;
    std::size_t trailing_bytes = 0;
};

DecodedLog decode_stream(ByteView bytes,
                         const ConfigRegistry& registry = ConfigRegistry::defaults());

// Row-major scan: shift registers select the row, the multiplexer sweeps columns.
std::size_t scan_payload_index(const GridConfig& grid, int row, int col);
std::pair<int, int> scan_position(const GridConfig& grid, std::size_t index);

}  // namespace flexitac

#include "flexitac/wire_protocol.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "flexitac/errors.hpp"

namespace flexitac {

namespace {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
    std::array<std::uint16_t, 256> table{};
    for (unsigned i = 0; i < 256; ++i) {
        std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
        for (int bit = 0; bit < 8; ++bit)
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                                 : static_cast<std::uint16_t>(crc << 1);
        table[i] = crc;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

std::uint16_t read_u16_le(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16_le(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32_le(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

}  // namespace

std::uint16_t crc16_ccitt_false(ByteView data, std::uint16_t crc) {
    for (auto b : data)
        crc = static_cast<std::uint16_t>((crc << 8) ^ kCrcTable[((crc >> 8) ^ b) & 0xFF]);
    return crc;
}

std::size_t encoded_frame_size(const GridConfig& grid) {
    return kHeaderSize + 2 * grid.taxel_count() + kCrcSize;
}

ConfigRegistry::ConfigRegistry() {
    for (const auto& p : grid_presets()) grids_[p.config_id] = p;
}

void ConfigRegistry::add(const GridConfig& grid) {
    grid.validate();
    grids_[grid.config_id] = grid;
}

const GridConfig* ConfigRegistry::find(std::uint8_t config_id) const {
    auto it = grids_.find(config_id);
    return it == grids_.end() ? nullptr : &it->second;
}

const ConfigRegistry& ConfigRegistry::defaults() {
    static const ConfigRegistry registry;
    return registry;
}

void encode_frame_into(const TactileFrame& frame, Bytes& out) {
    try {
        frame.validate();
    } catch (const ValidationError& e) {
        throw EncodingError(std::string("cannot encode frame: ") + e.what());
    }
    const std::size_t start = out.size();
    out.reserve(start + encoded_frame_size(frame.grid));
    out.push_back(kSync0);
    out.push_back(kSync1);
    out.push_back(kProtocolVersion);
    out.push_back(frame.grid.config_id);
    put_u16_le(out, frame.sequence);
    put_u32_le(out, frame.timestamp_ms);
    for (auto v : frame.values) put_u16_le(out, v);
    const auto crc = crc16_ccitt_false(ByteView(out).subspan(start + 2));
    out.push_back(static_cast<std::uint8_t>(crc >> 8));
    out.push_back(static_cast<std::uint8_t>(crc & 0xFF));
}

Bytes encode_frame(const TactileFrame& frame) {
    Bytes out;
    encode_frame_into(frame, out);
    return out;
}

TactileFrame decode_frame(ByteView bytes, const ConfigRegistry& registry) {
    if (bytes.size() < kHeaderSize + kCrcSize)
        throw FramingError("truncated frame: " + std::to_string(bytes.size()) + " bytes");
    if (bytes[0] != kSync0 || bytes[1] != kSync1) throw FramingError("bad sync bytes");
    if (bytes[2] != kProtocolVersion)
        throw ProtocolError("unsupported protocol version " + std::to_string(bytes[2]));
    const GridConfig* grid = registry.find(bytes[3]);
    if (!grid) throw ProtocolError("unknown config_id " + std::to_string(bytes[3]));
    const std::size_t expected = encoded_frame_size(*grid);
    if (bytes.size() != expected)
        throw FramingError("frame length " + std::to_string(bytes.size()) + ", expected " +
                           std::to_string(expected));

    const std::size_t crc_at = expected - kCrcSize;
    const std::uint16_t stored =
        static_cast<std::uint16_t>((bytes[crc_at] << 8) | bytes[crc_at + 1]);
    if (crc16_ccitt_false(bytes.subspan(2, crc_at - 2)) != stored)
        throw CorruptionError("CRC mismatch");

    TactileFrame f;
    f.grid = *grid;
    f.sequence = read_u16_le(&bytes[4]);
    f.timestamp_ms = read_u32_le(&bytes[6]);
    f.values.resize(grid->taxel_count());
    const auto hi = grid->max_count();
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        f.values[i] = read_u16_le(&bytes[kHeaderSize + 2 * i]);
        if (f.values[i] > hi) throw CorruptionError("payload value exceeds ADC range");
    }
    return f;
}

StreamDecoder::StreamDecoder(ConfigRegistry registry) : registry_(std::move(registry)) {}

void StreamDecoder::discard(std::size_t n) {
    head_ += n;
    stats_.bytes_discarded += n;
}

void StreamDecoder::compact() {
    if (head_ == buf_.size()) {
        buf_.clear();
        head_ = 0;
    } else if (head_ > 4096 && head_ * 2 > buf_.size()) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
        head_ = 0;
    }
}

std::vector<TactileFrame> StreamDecoder::feed(ByteView chunk) {
    std::vector<TactileFrame> out;
    if (chunk.empty()) return out;
    buf_.insert(buf_.end(), chunk.begin(), chunk.end());

    for (;;) {
        const std::size_t avail = buf_.size() - head_;
        if (avail == 0) break;
        const std::uint8_t* p = buf_.data() + head_;

        if (p[0] != kSync0 || (avail >= 2 && p[1] != kSync1)) {
            // Skip to the next 0xAA that is followed by 0x55 or by end of buffer.
            std::size_t i = 1;
            while (i < avail && !(p[i] == kSync0 && (i + 1 == avail || p[i + 1] == kSync1))) ++i;
            discard(i);
            continue;
        }
        if (avail < kHeaderSize) break;

        const GridConfig* grid = p[2] == kProtocolVersion ? registry_.find(p[3]) : nullptr;
        if (!grid) {
            ++stats_.frames_corrupt;
            discard(1);
            continue;
        }
        const std::size_t size = encoded_frame_size(*grid);
        if (avail < size) break;

        try {
            out.push_back(decode_frame(ByteView(p, size), registry_));
            ++stats_.frames_ok;
            head_ += size;
        } catch (const DecodeError&) {
            ++stats_.frames_corrupt;
            discard(1);
        }
    }
    compact();
    return out;
}

DecodedLog decode_stream(ByteView bytes, const ConfigRegistry& registry) {
    StreamDecoder dec(registry);
    DecodedLog log;
    log.frames = dec.feed(bytes);
    log.stats = dec.stats();
    log.trailing_bytes = dec.buffered();
    return log;
}

std::size_t scan_payload_index(const GridConfig& grid, int row, int col) {
    if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols)
        throw IndexError("scan position (" + std::to_string(row) + "," + std::to_string(col) +
                         ") outside " + grid.name() + " grid");
    return static_cast<std::size_t>(row) * grid.cols + col;
}

std::pair<int, int> scan_position(const GridConfig& grid, std::size_t index) {
    if (index >= grid.taxel_count())
        throw IndexError("payload index " + std::to_string(index) + " outside " + grid.name() +
                         " grid");
    return {static_cast<int>(index / grid.cols), static_cast<int>(index % grid.cols)};
}

}  // namespace flexitac

#include "marine/frame_codec.hpp"

namespace marine {

namespace {

constexpr std::int32_t kTempMin = -5500;
constexpr std::int32_t kTempMax = 12500;
constexpr std::int64_t kLatMax = 900000000;
constexpr std::int64_t kLonMax = 1800000000;

void put16(std::uint8_t* p, std::uint16_t v)
{
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
}

void put32(std::uint8_t* p, std::uint32_t v)
{
    p[0] = static_cast<std::uint8_t>(v >> 24);
    p[1] = static_cast<std::uint8_t>(v >> 16);
    p[2] = static_cast<std::uint8_t>(v >> 8);
    p[3] = static_cast<std::uint8_t>(v);
}

std::uint16_t get16(const std::uint8_t* p)
{
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t get32(const std::uint8_t* p)
{
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void check_ranges(const LoraFrame& f)
{
    if (f.version != kFrameVersion) {
        throw FrameError(FrameErrc::out_of_range, "unsupported frame version " + std::to_string(f.version));
    }
    if (f.temp_centi_c < kTempMin || f.temp_centi_c > kTempMax) {
        throw FrameError(FrameErrc::out_of_range, "temp_centi_c out of range: " + std::to_string(f.temp_centi_c));
    }
    if (f.lat_e7 < -kLatMax || f.lat_e7 > kLatMax) {
        throw FrameError(FrameErrc::out_of_range, "lat_e7 out of range: " + std::to_string(f.lat_e7));
    }
    if (f.lon_e7 < -kLonMax || f.lon_e7 > kLonMax) {
        throw FrameError(FrameErrc::out_of_range, "lon_e7 out of range: " + std::to_string(f.lon_e7));
    }
}

} // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data)
{
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t byte : data) {
        crc ^= static_cast<std::uint16_t>(byte << 8);
        for (int bit = 0; bit < 8; ++bit) {
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021) : static_cast<std::uint16_t>(crc << 1);
        }
    }
    return crc;
}

FrameBytes encode_frame(const LoraFrame& frame)
{
    check_ranges(frame);
    FrameBytes out{};
    out[0] = static_cast<std::uint8_t>(kFrameMagic | (frame.version & 0x03));
    put16(&out[1], frame.node_id);
    put16(&out[3], frame.seq);
    put16(&out[5], static_cast<std::uint16_t>(frame.temp_centi_c));
    put32(&out[7], static_cast<std::uint32_t>(frame.lat_e7));
    put32(&out[11], static_cast<std::uint32_t>(frame.lon_e7));
    put16(&out[15], frame.battery_mv);
    put16(&out[17], crc16_ccitt_false(std::span(out).first(17)));
    return out;
}

LoraFrame decode_frame(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() != kFrameSize) {
        throw FrameError(FrameErrc::truncated, "frame length " + std::to_string(bytes.size()) + ", expected 19");
    }
    if ((bytes[0] & kFrameMagicMask) != kFrameMagic) {
        throw FrameError(FrameErrc::not_a_frame, "bad magic");
    }
    if (crc16_ccitt_false(bytes.first(17)) != get16(&bytes[17])) {
        throw FrameError(FrameErrc::corrupt, "crc mismatch");
    }
    LoraFrame f;
    f.version = bytes[0] & 0x03;
    if (f.version != kFrameVersion) {
        throw FrameError(FrameErrc::unsupported_version, "frame version " + std::to_string(f.version));
    }
    f.node_id = get16(&bytes[1]);
    f.seq = get16(&bytes[3]);
    f.temp_centi_c = static_cast<std::int16_t>(get16(&bytes[5]));
    f.lat_e7 = static_cast<std::int32_t>(get32(&bytes[7]));
    f.lon_e7 = static_cast<std::int32_t>(get32(&bytes[11]));
    f.battery_mv = get16(&bytes[15]);
    // A CRC-valid frame may still carry values the encoder would refuse.
    try {
        check_ranges(f);
    } catch (const FrameError& e) {
        throw FrameError(FrameErrc::corrupt, e.what());
    }
    return f;
}

} // namespace marine

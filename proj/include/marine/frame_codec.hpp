#pragma once

// Over-the-air application frame, 19 bytes, multi-byte fields big-endian:
//
//   0      header: magic in bits 7..2 (0b101001), version in bits 1..0,
//          so a version-1 frame starts with 0xA5
//   1..2   node_id
//   3..4   seq
//   5..6   temp_centi_c (signed)
//   7..10  lat_e7 (signed)
//   11..14 lon_e7 (signed)
//   15..16 battery_mv
//   17..18 CRC-16/CCITT-FALSE over bytes 0..16

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace marine {

inline constexpr std::size_t kFrameSize = 19;
inline constexpr std::uint8_t kFrameMagicMask = 0xFC;
inline constexpr std::uint8_t kFrameMagic = 0xA4;
inline constexpr std::uint8_t kFrameVersion = 1;

struct LoraFrame {
    std::uint8_t version = kFrameVersion;
    std::uint16_t node_id = 0;
    std::uint16_t seq = 0;
    std::int16_t temp_centi_c = 0;
    std::int32_t lat_e7 = 0;
    std::int32_t lon_e7 = 0;
    std::uint16_t battery_mv = 0;

    friend bool operator==(const LoraFrame&, const LoraFrame&) = default;
};

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

enum class FrameErrc {
    out_of_range,        ///< encode: a field violates its range
    truncated,           ///< decode: length != 19
    not_a_frame,         ///< decode: bad magic
    corrupt,             ///< decode: CRC mismatch
    unsupported_version, ///< decode: CRC fine, version unknown
};

class FrameError : public std::runtime_error {
public:
    FrameError(FrameErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    FrameErrc code() const noexcept { return code_; }

private:
    FrameErrc code_;
};

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

FrameBytes encode_frame(const LoraFrame& frame);
LoraFrame decode_frame(std::span<const std::uint8_t> bytes);

} // namespace marine

#pragma once

// MQTT 3.1.1 wire codec for the subset used by the telemetry pipeline:
// QoS 0/1, no retained-message storage, no wills, clean sessions.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace marine::mqtt {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint32_t kMaxRemainingLength = 268'435'455;

struct Connect {
    std::string client_id;
    std::uint16_t keep_alive_s = 30;
    bool clean_session = true;
    std::uint8_t protocol_level = 4;

    friend bool operator==(const Connect&, const Connect&) = default;
};

struct ConnAck {
    std::uint8_t return_code = 0;
    bool session_present = false;

    friend bool operator==(const ConnAck&, const ConnAck&) = default;
};

struct Publish {
    std::string topic;
    Bytes payload;
    std::uint8_t qos = 0;
    std::optional<std::uint16_t> packet_id;
    bool dup = false;
    bool retain = false;

    friend bool operator==(const Publish&, const Publish&) = default;
};

struct PubAck {
    std::uint16_t packet_id = 0;
    friend bool operator==(const PubAck&, const PubAck&) = default;
};

struct TopicRequest {
    std::string filter;
    std::uint8_t qos = 0;
    friend bool operator==(const TopicRequest&, const TopicRequest&) = default;
};

struct Subscribe {
    std::uint16_t packet_id = 0;
    std::vector<TopicRequest> topics;
    friend bool operator==(const Subscribe&, const Subscribe&) = default;
};

inline constexpr std::uint8_t kSubAckFailure = 0x80;

struct SubAck {
    std::uint16_t packet_id = 0;
    std::vector<std::uint8_t> granted;
    friend bool operator==(const SubAck&, const SubAck&) = default;
};

struct PingReq { friend bool operator==(const PingReq&, const PingReq&) = default; };
struct PingResp { friend bool operator==(const PingResp&, const PingResp&) = default; };
struct Disconnect { friend bool operator==(const Disconnect&, const Disconnect&) = default; };

using Packet = std::variant<Connect, ConnAck, Publish, PubAck, Subscribe, SubAck, PingReq, PingResp, Disconnect>;

enum class Errc {
    encoding,    ///< packet violates an invariant and cannot be encoded
    protocol,    ///< malformed bytes on the wire
    unsupported, ///< well-formed but outside the supported subset (QoS 2, UNSUBSCRIBE, ...)
};

class MqttError : public std::runtime_error {
public:
    MqttError(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

Bytes encode_remaining_length(std::uint32_t n);

struct RemainingLength {
    std::uint32_t value = 0;
    std::size_t size = 0; ///< bytes consumed; 0 when more input is needed
};

/// Throws MqttError{protocol} when more than four length bytes are present.
RemainingLength decode_remaining_length(std::span<const std::uint8_t> bytes);

Bytes encode_packet(const Packet& packet);

struct DecodeResult {
    std::optional<Packet> packet;
    std::size_t consumed = 0;

    bool need_more() const { return !packet.has_value(); }
};

/// Decodes one packet from the front of `bytes`. Incomplete input yields
/// need_more() rather than an error.
DecodeResult decode_packet(std::span<const std::uint8_t> bytes);

/// Well-formed UTF-8 without U+0000, as MQTT requires for strings.
bool is_valid_mqtt_utf8(std::string_view s);

std::string_view packet_name(const Packet& packet);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(std::span<const std::uint8_t> b) { return std::string(b.begin(), b.end()); }

} // namespace marine::mqtt

#include "marine/mqtt/codec.hpp"

#include "marine/mqtt/topic.hpp"

namespace marine::mqtt {

namespace {

enum PacketType : std::uint8_t {
    kConnect = 1,
    kConnAck = 2,
    kPublish = 3,
    kPubAck = 4,
    kSubscribe = 8,
    kSubAck = 9,
    kUnsubscribe = 10,
    kPingReq = 12,
    kPingResp = 13,
    kDisconnect = 14,
};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v)
    {
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        buf_.push_back(static_cast<std::uint8_t>(v));
    }
    void str(std::string_view s)
    {
        if (s.size() > 0xFFFF) {
            throw MqttError(Errc::encoding, "string longer than 65535 bytes");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void raw(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    Bytes& bytes() { return buf_; }

private:
    Bytes buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> body) : body_(body) {}

    std::uint8_t u8()
    {
        need(1);
        return body_[pos_++];
    }
    std::uint16_t u16()
    {
        need(2);
        const auto v = static_cast<std::uint16_t>((body_[pos_] << 8) | body_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::string str()
    {
        const std::size_t len = u16();
        need(len);
        std::string s(body_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      body_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
        pos_ += len;
        if (!is_valid_mqtt_utf8(s)) {
            throw MqttError(Errc::protocol, "string is not valid UTF-8");
        }
        return s;
    }
    void skip_binary()
    {
        const std::size_t len = u16();
        need(len);
        pos_ += len;
    }
    Bytes rest()
    {
        Bytes b(body_.begin() + static_cast<std::ptrdiff_t>(pos_), body_.end());
        pos_ = body_.size();
        return b;
    }
    bool done() const { return pos_ == body_.size(); }
    void expect_done(const char* what) const
    {
        if (!done()) {
            throw MqttError(Errc::protocol, std::string(what) + ": trailing bytes after packet body");
        }
    }

private:
    void need(std::size_t n) const
    {
        if (body_.size() - pos_ < n) {
            throw MqttError(Errc::protocol, "packet body shorter than its fields");
        }
    }

    std::span<const std::uint8_t> body_;
    std::size_t pos_ = 0;
};

Bytes frame(std::uint8_t first_byte, Bytes&& body)
{
    if (body.size() > kMaxRemainingLength) {
        throw MqttError(Errc::encoding, "packet exceeds maximum remaining length");
    }
    Bytes out;
    out.reserve(body.size() + 5);
    out.push_back(first_byte);
    const auto len = encode_remaining_length(static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), len.begin(), len.end());
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

void check_publish(const Publish& p)
{
    if (p.qos == 2) {
        throw MqttError(Errc::unsupported, "QoS 2 is not supported");
    }
    if (p.qos > 2) {
        throw MqttError(Errc::encoding, "invalid QoS " + std::to_string(p.qos));
    }
    if (!is_valid_topic_name(p.topic)) {
        throw MqttError(Errc::encoding, "invalid topic name '" + p.topic + "'");
    }
    if (p.qos == 1 && (!p.packet_id || *p.packet_id == 0)) {
        throw MqttError(Errc::encoding, "QoS 1 publish needs a nonzero packet id");
    }
    if (p.qos == 0 && (p.packet_id || p.dup)) {
        throw MqttError(Errc::encoding, "QoS 0 publish carries no packet id and no DUP flag");
    }
}

struct Encoder {
    Bytes operator()(const Connect& c) const
    {
        if (c.client_id.size() > 0xFFFF || !is_valid_mqtt_utf8(c.client_id)) {
            throw MqttError(Errc::encoding, "invalid client id");
        }
        Writer w;
        w.str("MQTT");
        w.u8(c.protocol_level);
        w.u8(c.clean_session ? 0x02 : 0x00);
        w.u16(c.keep_alive_s);
        w.str(c.client_id);
        return frame(kConnect << 4, std::move(w.bytes()));
    }
    Bytes operator()(const ConnAck& a) const
    {
        if (a.return_code > 5) {
            throw MqttError(Errc::encoding, "invalid CONNACK return code");
        }
        return frame(kConnAck << 4, {static_cast<std::uint8_t>(a.session_present ? 1 : 0), a.return_code});
    }
    Bytes operator()(const Publish& p) const
    {
        check_publish(p);
        Writer w;
        w.str(p.topic);
        if (p.qos > 0) {
            w.u16(*p.packet_id);
        }
        w.raw(p.payload);
        const auto flags = static_cast<std::uint8_t>((p.dup ? 0x08 : 0) | (p.qos << 1) | (p.retain ? 0x01 : 0));
        return frame(static_cast<std::uint8_t>((kPublish << 4) | flags), std::move(w.bytes()));
    }
    Bytes operator()(const PubAck& a) const
    {
        if (a.packet_id == 0) {
            throw MqttError(Errc::encoding, "packet id must be nonzero");
        }
        Writer w;
        w.u16(a.packet_id);
        return frame(kPubAck << 4, std::move(w.bytes()));
    }
    Bytes operator()(const Subscribe& s) const
    {
        if (s.packet_id == 0 || s.topics.empty()) {
            throw MqttError(Errc::encoding, "SUBSCRIBE needs a packet id and at least one filter");
        }
        Writer w;
        w.u16(s.packet_id);
        for (const auto& t : s.topics) {
            if (!is_valid_topic_filter(t.filter) || t.qos > 2) {
                throw MqttError(Errc::encoding, "invalid topic filter '" + t.filter + "'");
            }
            w.str(t.filter);
            w.u8(t.qos);
        }
        return frame((kSubscribe << 4) | 0x02, std::move(w.bytes()));
    }
    Bytes operator()(const SubAck& s) const
    {
        if (s.packet_id == 0 || s.granted.empty()) {
            throw MqttError(Errc::encoding, "SUBACK needs a packet id and at least one code");
        }
        Writer w;
        w.u16(s.packet_id);
        for (auto g : s.granted) {
            if (g > 2 && g != kSubAckFailure) {
                throw MqttError(Errc::encoding, "invalid SUBACK code");
            }
            w.u8(g);
        }
        return frame(kSubAck << 4, std::move(w.bytes()));
    }
    Bytes operator()(const PingReq&) const { return {kPingReq << 4, 0x00}; }
    Bytes operator()(const PingResp&) const { return {kPingResp << 4, 0x00}; }
    Bytes operator()(const Disconnect&) const { return {kDisconnect << 4, 0x00}; }
};

Packet decode_connect(Reader& r)
{
    if (r.str() != "MQTT") {
        throw MqttError(Errc::protocol, "unknown protocol name");
    }
    Connect c;
    c.protocol_level = r.u8();
    const std::uint8_t flags = r.u8();
    if (flags & 0x01) {
        throw MqttError(Errc::protocol, "CONNECT reserved flag set");
    }
    c.clean_session = (flags & 0x02) != 0;
    const bool will = flags & 0x04;
    const std::uint8_t will_qos = (flags >> 3) & 0x03;
    const bool will_retain = flags & 0x20;
    const bool password = flags & 0x40;
    const bool username = flags & 0x80;
    if (!will && (will_qos != 0 || will_retain)) {
        throw MqttError(Errc::protocol, "will QoS/retain set without will flag");
    }
    if (will_qos == 3) {
        throw MqttError(Errc::protocol, "invalid will QoS");
    }
    if (password && !username) {
        throw MqttError(Errc::protocol, "password flag without username");
    }
    c.keep_alive_s = r.u16();
    c.client_id = r.str();
    // Wills and credentials are accepted on the wire but not acted upon.
    if (will) {
        r.str();
        r.skip_binary();
    }
    if (username) {
        r.str();
    }
    if (password) {
        r.skip_binary();
    }
    r.expect_done("CONNECT");
    return c;
}

Packet decode_body(std::uint8_t first, std::span<const std::uint8_t> body)
{
    const std::uint8_t type = first >> 4;
    const std::uint8_t flags = first & 0x0F;
    Reader r(body);

    auto require_flags = [&](std::uint8_t expected, const char* name) {
        if (flags != expected) {
            throw MqttError(Errc::protocol, std::string(name) + ": invalid fixed-header flags");
        }
    };

    switch (type) {
    case kConnect:
        require_flags(0, "CONNECT");
        return decode_connect(r);
    case kConnAck: {
        require_flags(0, "CONNACK");
        ConnAck a;
        const std::uint8_t ack_flags = r.u8();
        if (ack_flags & 0xFE) {
            throw MqttError(Errc::protocol, "CONNACK reserved bits set");
        }
        a.session_present = ack_flags & 0x01;
        a.return_code = r.u8();
        r.expect_done("CONNACK");
        return a;
    }
    case kPublish: {
        Publish p;
        p.dup = flags & 0x08;
        p.qos = (flags >> 1) & 0x03;
        p.retain = flags & 0x01;
        if (p.qos == 3) {
            throw MqttError(Errc::protocol, "PUBLISH with QoS 3");
        }
        if (p.qos == 2) {
            throw MqttError(Errc::unsupported, "QoS 2 is not supported");
        }
        if (p.qos == 0 && p.dup) {
            throw MqttError(Errc::protocol, "DUP set on QoS 0 publish");
        }
        p.topic = r.str();
        if (!is_valid_topic_name(p.topic)) {
            throw MqttError(Errc::protocol, "invalid topic name in PUBLISH");
        }
        if (p.qos > 0) {
            p.packet_id = r.u16();
            if (*p.packet_id == 0) {
                throw MqttError(Errc::protocol, "PUBLISH packet id 0");
            }
        }
        p.payload = r.rest();
        return p;
    }
    case kPubAck: {
        require_flags(0, "PUBACK");
        PubAck a{r.u16()};
        r.expect_done("PUBACK");
        return a;
    }
    case kSubscribe: {
        require_flags(0x02, "SUBSCRIBE");
        Subscribe s;
        s.packet_id = r.u16();
        if (s.packet_id == 0) {
            throw MqttError(Errc::protocol, "SUBSCRIBE packet id 0");
        }
        while (!r.done()) {
            TopicRequest t;
            t.filter = r.str();
            t.qos = r.u8();
            if (t.qos > 2 || !is_valid_topic_filter(t.filter)) {
                throw MqttError(Errc::protocol, "invalid SUBSCRIBE entry");
            }
            s.topics.push_back(std::move(t));
        }
        if (s.topics.empty()) {
            throw MqttError(Errc::protocol, "SUBSCRIBE without topic filters");
        }
        return s;
    }
    case kSubAck: {
        require_flags(0, "SUBACK");
        SubAck s;
        s.packet_id = r.u16();
        while (!r.done()) {
            const auto g = r.u8();
            if (g > 2 && g != kSubAckFailure) {
                throw MqttError(Errc::protocol, "invalid SUBACK return code");
            }
            s.granted.push_back(g);
        }
        return s;
    }
    case kPingReq:
        require_flags(0, "PINGREQ");
        r.expect_done("PINGREQ");
        return PingReq{};
    case kPingResp:
        require_flags(0, "PINGRESP");
        r.expect_done("PINGRESP");
        return PingResp{};
    case kDisconnect:
        require_flags(0, "DISCONNECT");
        r.expect_done("DISCONNECT");
        return Disconnect{};
    case 5: case 6: case 7: case kUnsubscribe: case 11:
        throw MqttError(Errc::unsupported, "packet type " + std::to_string(type) + " is not supported");
    default:
        throw MqttError(Errc::protocol, "reserved packet type " + std::to_string(type));
    }
}

} // namespace

Bytes encode_remaining_length(std::uint32_t n)
{
    if (n > kMaxRemainingLength) {
        throw MqttError(Errc::encoding, "remaining length out of range: " + std::to_string(n));
    }
    Bytes out;
    do {
        auto digit = static_cast<std::uint8_t>(n % 128);
        n /= 128;
        if (n > 0) {
            digit |= 0x80;
        }
        out.push_back(digit);
    } while (n > 0);
    return out;
}

RemainingLength decode_remaining_length(std::span<const std::uint8_t> bytes)
{
    std::uint32_t value = 0;
    std::uint32_t multiplier = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        if (i >= bytes.size()) {
            return {};
        }
        value += (bytes[i] & 0x7Fu) * multiplier;
        if ((bytes[i] & 0x80) == 0) {
            return {value, i + 1};
        }
        multiplier *= 128;
    }
    throw MqttError(Errc::protocol, "remaining length longer than four bytes");
}

Bytes encode_packet(const Packet& packet)
{
    return std::visit(Encoder{}, packet);
}

DecodeResult decode_packet(std::span<const std::uint8_t> bytes)
{
    if (bytes.empty()) {
        return {};
    }
    const auto len = decode_remaining_length(bytes.subspan(1));
    if (len.size == 0) {
        return {};
    }
    const std::size_t header = 1 + len.size;
    if (bytes.size() - header < len.value) {
        return {};
    }
    DecodeResult result;
    result.packet = decode_body(bytes[0], bytes.subspan(header, len.value));
    result.consumed = header + len.value;
    return result;
}

bool is_valid_mqtt_utf8(std::string_view s)
{
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::uint32_t cp = 0;
        std::size_t extra = 0;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F;
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F;
            extra = 2;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07;
            extra = 3;
        } else {
            return false;
        }
        if (i + extra >= s.size()) {
            return false;
        }
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        static constexpr std::uint32_t kMinForLength[] = {0, 0x80, 0x800, 0x10000};
        if (cp < kMinForLength[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) || cp == 0) {
            return false;
        }
        i += extra + 1;
    }
    return true;
}

std::string_view packet_name(const Packet& packet)
{
    static constexpr std::string_view kNames[] = {"CONNECT", "CONNACK", "PUBLISH", "PUBACK", "SUBSCRIBE",
                                                  "SUBACK", "PINGREQ", "PINGRESP", "DISCONNECT"};
    return kNames[packet.index()];
}

} // namespace marine::mqtt

#pragma once

// Random inputs for round-trip suites, shared by unit and acceptance tests.

#include <string>

#include "marine/frame_codec.hpp"
#include "marine/mqtt/codec.hpp"
#include "marine/rng.hpp"

namespace test {

using marine::Rng;
using namespace marine::mqtt;
using marine::LoraFrame;

inline std::string random_topic(Rng& rng)
{
    static const char* parts[] = {"marine", "v1", "gw1", "7", "telemetry", "a", "b", "x y", "\xc3\xa9t\xc3\xa9"};
    std::string t;
    const int levels = 1 + static_cast<int>(rng.uniform(0.0, 5.0));
    for (int i = 0; i < levels; ++i) {
        if (i) {
            t += '/';
        }
        t += parts[static_cast<std::size_t>(rng.uniform(0.0, 9.0))];
    }
    return t;
}

inline Bytes random_bytes(Rng& rng, std::size_t max_len)
{
    Bytes b(static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(max_len))));
    for (auto& x : b) {
        x = static_cast<std::uint8_t>(rng.next_u64());
    }
    return b;
}

inline std::uint16_t random_id(Rng& rng) { return static_cast<std::uint16_t>(1 + rng.uniform(0.0, 65535.0)); }

inline Packet random_packet(Rng& rng)
{
    switch (static_cast<int>(rng.uniform(0.0, 9.0))) {
    case 0: {
        Connect c;
        c.client_id = rng.uniform() < 0.2 ? "" : "client-" + std::to_string(rng.next_u64() % 1000);
        c.keep_alive_s = static_cast<std::uint16_t>(rng.next_u64());
        c.clean_session = c.client_id.empty() || rng.uniform() < 0.5;
        return c;
    }
    case 1: return ConnAck{static_cast<std::uint8_t>(rng.uniform(0.0, 6.0)), rng.uniform() < 0.5};
    case 2: {
        Publish p;
        p.topic = random_topic(rng);
        p.payload = random_bytes(rng, rng.uniform() < 0.05 ? 20000 : 64);
        p.qos = rng.uniform() < 0.5 ? 0 : 1;
        if (p.qos == 1) {
            p.packet_id = random_id(rng);
            p.dup = rng.uniform() < 0.3;
        }
        p.retain = rng.uniform() < 0.2;
        return p;
    }
    case 3: return PubAck{random_id(rng)};
    case 4: {
        Subscribe s;
        s.packet_id = random_id(rng);
        const int n = 1 + static_cast<int>(rng.uniform(0.0, 4.0));
        for (int i = 0; i < n; ++i) {
            s.topics.push_back({rng.uniform() < 0.3 ? "marine/+/#" : random_topic(rng),
                                static_cast<std::uint8_t>(rng.uniform(0.0, 2.0))});
        }
        return s;
    }
    case 5: {
        SubAck s;
        s.packet_id = random_id(rng);
        const int n = 1 + static_cast<int>(rng.uniform(0.0, 4.0));
        for (int i = 0; i < n; ++i) {
            s.granted.push_back(rng.uniform() < 0.1 ? kSubAckFailure : static_cast<std::uint8_t>(rng.uniform(0.0, 2.0)));
        }
        return s;
    }
    case 6: return PingReq{};
    case 7: return PingResp{};
    default: return Disconnect{};
    }
}

inline LoraFrame random_frame(Rng& rng)
{
    LoraFrame f;
    f.node_id = static_cast<std::uint16_t>(rng.next_u64());
    f.seq = static_cast<std::uint16_t>(rng.next_u64());
    f.temp_centi_c = static_cast<std::int16_t>(rng.uniform(-5500.0, 12501.0));
    f.lat_e7 = static_cast<std::int32_t>(rng.uniform(-900000000.0, 900000000.0));
    f.lon_e7 = static_cast<std::int32_t>(rng.uniform(-1800000000.0, 1800000000.0));
    f.battery_mv = static_cast<std::uint16_t>(rng.next_u64());
    return f;
}

} // namespace test

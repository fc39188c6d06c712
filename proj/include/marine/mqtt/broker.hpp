#pragma once

// Minimal embedded MQTT 3.1.1 broker: clean sessions, QoS 0/1, wildcard
// subscriptions. Transport-agnostic; a host feeds it bytes per connection
// and ships back whatever it returns.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marine/mqtt/codec.hpp"

namespace marine::mqtt {

using ConnId = std::uint64_t;

struct Subscriber {
    ConnId conn = 0;
    std::string filter;
    std::uint8_t qos = 0;
};

struct Delivery {
    ConnId conn = 0;
    std::uint8_t qos = 0;

    friend bool operator==(const Delivery&, const Delivery&) = default;
};

/// One delivery per matching connection, at min(publish QoS, best matching
/// subscription QoS). Result is ordered by connection id.
std::vector<Delivery> broker_route(const Publish& publish, std::span<const Subscriber> subscriptions);

struct Outbound {
    ConnId conn = 0;
    Bytes bytes;
};

struct BrokerOutput {
    std::vector<Outbound> out;
    std::vector<ConnId> close; ///< connections the host must drop after flushing `out`
};

struct BrokerStats {
    std::uint64_t connections = 0;
    std::uint64_t publishes_in = 0;
    std::uint64_t deliveries = 0;
    std::uint64_t protocol_errors = 0;
};

class Broker {
public:
    BrokerOutput open(ConnId conn, double now);
    BrokerOutput receive(ConnId conn, std::span<const std::uint8_t> bytes, double now);
    BrokerOutput close(ConnId conn);
    /// Drops clients silent for more than 1.5x their keep-alive.
    BrokerOutput tick(double now);

    const BrokerStats& stats() const { return stats_; }
    std::size_t connection_count() const { return conns_.size(); }
    std::vector<Subscriber> subscriptions() const;
    /// Unacknowledged QoS 1 deliveries toward `conn`.
    std::size_t in_flight(ConnId conn) const;

private:
    struct Connection {
        bool connected = false;
        std::string client_id;
        std::uint16_t keep_alive_s = 0;
        double last_in = 0.0;
        Bytes rx;
        std::map<std::string, std::uint8_t> filters;
        std::map<std::uint16_t, Publish> in_flight;
        std::uint16_t last_packet_id = 0;
    };

    void handle(ConnId conn, const Packet& p, double now, BrokerOutput& out);
    void route(const Publish& p, BrokerOutput& out);
    void drop(ConnId conn, BrokerOutput& out);

    std::map<ConnId, Connection> conns_;
    std::uint64_t anon_counter_ = 0;
    BrokerStats stats_;
};

} // namespace marine::mqtt

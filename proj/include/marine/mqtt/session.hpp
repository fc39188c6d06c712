#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "marine/mqtt/codec.hpp"

namespace marine::mqtt {

enum class SessionState { disconnected, connecting, connected };

struct SessionConfig {
    std::string client_id;
    std::uint16_t keep_alive_s = 30;
    std::size_t queue_depth = 256;
    /// Used as the CONNACK deadline when keep-alive is disabled.
    double connect_timeout_s = 30.0;
};

struct OutboundMessage {
    std::string topic;
    Bytes payload;
    std::uint8_t qos = 0;
};

namespace event {
struct ConnectRequested { double now = 0.0; };
struct BytesIn { Bytes data; double now = 0.0; };
struct PublishRequested { OutboundMessage message; double now = 0.0; };
struct SubscribeRequested { std::vector<TopicRequest> topics; double now = 0.0; };
struct Tick { double now = 0.0; };
struct DisconnectRequested { double now = 0.0; };
/// The transport under the session went away.
struct ConnectionLost { double now = 0.0; };
} // namespace event

using SessionEvent = std::variant<event::ConnectRequested, event::BytesIn, event::PublishRequested,
                                  event::SubscribeRequested, event::Tick, event::DisconnectRequested,
                                  event::ConnectionLost>;

enum class DisconnectReason { none, requested, refused, timeout, protocol_error, connection_lost };

struct SessionActions {
    std::vector<Bytes> bytes_out;
    std::vector<Publish> deliveries;
    std::optional<SessionState> state_change;
    DisconnectReason reason = DisconnectReason::none;
    std::optional<std::uint8_t> refused_code; ///< CONNACK return code when the broker refused us
    std::vector<std::uint16_t> acked;         ///< QoS 1 publishes confirmed by PUBACK
    std::size_t queue_drops = 0;

    /// Broker authentication/authorization refusal (CONNACK 4 or 5).
    bool auth_failure() const { return refused_code && (*refused_code == 4 || *refused_code == 5); }
};

struct SessionCounters {
    std::uint64_t accepted = 0;    ///< publish requests taken in (sent or queued)
    std::uint64_t sent_qos0 = 0;
    std::uint64_t sent_qos1 = 0;   ///< first transmissions only
    std::uint64_t resent = 0;      ///< DUP retransmissions after reconnect
    std::uint64_t acked = 0;
    std::uint64_t queue_drops = 0;
    std::uint64_t received = 0;

    /// Publishes whose delivery contract is fulfilled on our side.
    std::uint64_t completed() const { return sent_qos0 + acked; }
};

/// MQTT client session as an explicit state machine. Publishing is only
/// possible while connected; requests made earlier wait in a bounded queue
/// (overflow drops the oldest). Unacknowledged QoS 1 publishes go back to the
/// head of the queue on disconnect, so pending acks are empty unless connected.
class ClientSession {
public:
    explicit ClientSession(SessionConfig config);

    SessionActions step(const SessionEvent& ev);

    SessionState state() const { return state_; }
    const SessionConfig& config() const { return config_; }
    const SessionCounters& counters() const { return counters_; }
    std::size_t pending_acks() const { return in_flight_.size(); }
    std::size_t queued() const { return queue_.size(); }

private:
    struct Queued {
        OutboundMessage message;
        bool dup = false;
    };
    struct InFlight {
        OutboundMessage message;
        std::uint64_t order = 0;
    };

    void on(const event::ConnectRequested& e, SessionActions& out);
    void on(const event::BytesIn& e, SessionActions& out);
    void on(const event::PublishRequested& e, SessionActions& out);
    void on(const event::SubscribeRequested& e, SessionActions& out);
    void on(const event::Tick& e, SessionActions& out);
    void on(const event::DisconnectRequested& e, SessionActions& out);
    void on(const event::ConnectionLost& e, SessionActions& out);

    void handle_packet(const Packet& p, double now, SessionActions& out);
    void send(const Packet& p, double now, SessionActions& out);
    void send_publish(Queued q, double now, SessionActions& out);
    void send_subscribe(double now, SessionActions& out);
    void flush_queue(double now, SessionActions& out);
    void enqueue(Queued q, SessionActions& out);
    void drop_to_disconnected(DisconnectReason reason, SessionActions& out);
    std::uint16_t next_packet_id();

    SessionConfig config_;
    SessionState state_ = SessionState::disconnected;
    std::deque<Queued> queue_;
    std::map<std::uint16_t, InFlight> in_flight_;
    std::vector<TopicRequest> subscriptions_;
    Bytes rx_buffer_;
    std::uint16_t last_packet_id_ = 0;
    std::uint64_t send_order_ = 0;
    double last_out_ = 0.0;
    double connect_sent_ = 0.0;
    std::optional<double> ping_sent_;
    SessionCounters counters_;
};

std::string_view to_string(SessionState s);

/// Exponential reconnect delay: initial, 2x per failure, capped.
class ReconnectBackoff {
public:
    explicit ReconnectBackoff(double initial_s = 1.0, double max_s = 60.0) : initial_s_(initial_s), max_s_(max_s) {}

    double next_delay()
    {
        const double d = current_ > 0.0 ? current_ : initial_s_;
        current_ = std::min(d * 2.0, max_s_);
        return d;
    }
    void reset() { current_ = 0.0; }

private:
    double initial_s_;
    double max_s_;
    double current_ = 0.0;
};

} // namespace marine::mqtt

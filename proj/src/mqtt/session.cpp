#include "marine/mqtt/session.hpp"

#include <algorithm>

namespace marine::mqtt {

ClientSession::ClientSession(SessionConfig config) : config_(std::move(config)) {}

SessionActions ClientSession::step(const SessionEvent& ev)
{
    SessionActions out;
    std::visit([&](const auto& e) { on(e, out); }, ev);
    return out;
}

void ClientSession::on(const event::ConnectRequested& e, SessionActions& out)
{
    if (state_ != SessionState::disconnected) {
        return;
    }
    rx_buffer_.clear();
    ping_sent_.reset();
    state_ = SessionState::connecting;
    out.state_change = state_;
    connect_sent_ = e.now;
    send(Connect{config_.client_id, config_.keep_alive_s, true, 4}, e.now, out);
}

void ClientSession::on(const event::BytesIn& e, SessionActions& out)
{
    if (state_ == SessionState::disconnected) {
        return;
    }
    rx_buffer_.insert(rx_buffer_.end(), e.data.begin(), e.data.end());
    std::size_t offset = 0;
    try {
        while (state_ != SessionState::disconnected) {
            auto res = decode_packet(std::span(rx_buffer_).subspan(offset));
            if (res.need_more()) {
                break;
            }
            offset += res.consumed;
            handle_packet(*res.packet, e.now, out);
        }
    } catch (const MqttError&) {
        drop_to_disconnected(DisconnectReason::protocol_error, out);
        return;
    }
    if (state_ == SessionState::disconnected) {
        rx_buffer_.clear();
    } else {
        rx_buffer_.erase(rx_buffer_.begin(), rx_buffer_.begin() + static_cast<std::ptrdiff_t>(offset));
    }
}

void ClientSession::handle_packet(const Packet& p, double now, SessionActions& out)
{
    if (state_ == SessionState::connecting) {
        const auto* ack = std::get_if<ConnAck>(&p);
        if (!ack) {
            drop_to_disconnected(DisconnectReason::protocol_error, out);
            return;
        }
        if (ack->return_code != 0) {
            out.refused_code = ack->return_code;
            drop_to_disconnected(DisconnectReason::refused, out);
            return;
        }
        state_ = SessionState::connected;
        out.state_change = state_;
        if (!subscriptions_.empty()) {
            send_subscribe(now, out);
        }
        flush_queue(now, out);
        return;
    }

    if (const auto* pub = std::get_if<Publish>(&p)) {
        ++counters_.received;
        out.deliveries.push_back(*pub);
        if (pub->qos == 1) {
            send(PubAck{*pub->packet_id}, now, out);
        }
    } else if (const auto* ack = std::get_if<PubAck>(&p)) {
        if (in_flight_.erase(ack->packet_id) > 0) {
            ++counters_.acked;
            out.acked.push_back(ack->packet_id);
        }
    } else if (std::holds_alternative<PingResp>(p)) {
        ping_sent_.reset();
    } else if (std::holds_alternative<SubAck>(p)) {
        // granted QoS is informational here
    } else {
        drop_to_disconnected(DisconnectReason::protocol_error, out);
    }
}

void ClientSession::on(const event::PublishRequested& e, SessionActions& out)
{
    ++counters_.accepted;
    Queued q{e.message, false};
    if (state_ == SessionState::connected) {
        send_publish(std::move(q), e.now, out);
    } else {
        enqueue(std::move(q), out);
    }
}

void ClientSession::on(const event::SubscribeRequested& e, SessionActions& out)
{
    for (const auto& t : e.topics) {
        auto it = std::find_if(subscriptions_.begin(), subscriptions_.end(),
                               [&](const TopicRequest& s) { return s.filter == t.filter; });
        if (it != subscriptions_.end()) {
            it->qos = t.qos;
        } else {
            subscriptions_.push_back(t);
        }
    }
    if (state_ == SessionState::connected) {
        send(Subscribe{next_packet_id(), e.topics}, e.now, out);
    }
}

void ClientSession::on(const event::Tick& e, SessionActions& out)
{
    const double ka = config_.keep_alive_s;
    if (state_ == SessionState::connecting) {
        const double deadline = ka > 0 ? 1.5 * ka : config_.connect_timeout_s;
        if (e.now - connect_sent_ >= deadline) {
            drop_to_disconnected(DisconnectReason::timeout, out);
        }
        return;
    }
    if (state_ != SessionState::connected || ka <= 0) {
        return;
    }
    if (ping_sent_) {
        if (e.now - *ping_sent_ >= 1.5 * ka) {
            drop_to_disconnected(DisconnectReason::timeout, out);
        }
        return;
    }
    if (e.now - last_out_ >= ka) {
        send(PingReq{}, e.now, out);
        ping_sent_ = e.now;
    }
}

void ClientSession::on(const event::DisconnectRequested& e, SessionActions& out)
{
    if (state_ == SessionState::disconnected) {
        return;
    }
    send(Disconnect{}, e.now, out);
    drop_to_disconnected(DisconnectReason::requested, out);
}

void ClientSession::on(const event::ConnectionLost&, SessionActions& out)
{
    if (state_ != SessionState::disconnected) {
        drop_to_disconnected(DisconnectReason::connection_lost, out);
    }
}

void ClientSession::send(const Packet& p, double now, SessionActions& out)
{
    out.bytes_out.push_back(encode_packet(p));
    last_out_ = now;
}

void ClientSession::send_publish(Queued q, double now, SessionActions& out)
{
    Publish p;
    p.topic = q.message.topic;
    p.payload = q.message.payload;
    p.qos = q.message.qos;
    if (p.qos == 1) {
        p.packet_id = next_packet_id();
        p.dup = q.dup;
    }
    send(p, now, out);
    if (p.qos == 1) {
        in_flight_[*p.packet_id] = InFlight{std::move(q.message), send_order_++};
        if (q.dup) {
            ++counters_.resent;
        } else {
            ++counters_.sent_qos1;
        }
    } else {
        ++counters_.sent_qos0;
    }
}

void ClientSession::send_subscribe(double now, SessionActions& out)
{
    send(Subscribe{next_packet_id(), subscriptions_}, now, out);
}

void ClientSession::flush_queue(double now, SessionActions& out)
{
    while (!queue_.empty() && state_ == SessionState::connected) {
        Queued q = std::move(queue_.front());
        queue_.pop_front();
        send_publish(std::move(q), now, out);
    }
}

void ClientSession::enqueue(Queued q, SessionActions& out)
{
    if (config_.queue_depth == 0) {
        ++counters_.queue_drops;
        ++out.queue_drops;
        return;
    }
    while (queue_.size() >= config_.queue_depth) {
        queue_.pop_front();
        ++counters_.queue_drops;
        ++out.queue_drops;
    }
    queue_.push_back(std::move(q));
}

void ClientSession::drop_to_disconnected(DisconnectReason reason, SessionActions& out)
{
    state_ = SessionState::disconnected;
    out.state_change = state_;
    out.reason = reason;
    ping_sent_.reset();

    // Unacked QoS 1 publishes return to the head of the queue, oldest first.
    std::vector<InFlight> unacked;
    unacked.reserve(in_flight_.size());
    for (auto& [id, f] : in_flight_) {
        unacked.push_back(std::move(f));
    }
    in_flight_.clear();
    std::sort(unacked.begin(), unacked.end(), [](const InFlight& x, const InFlight& y) { return x.order > y.order; });
    for (auto& f : unacked) {
        queue_.push_front(Queued{std::move(f.message), true});
    }
    while (queue_.size() > config_.queue_depth) {
        queue_.pop_front();
        ++counters_.queue_drops;
        ++out.queue_drops;
    }
}

std::uint16_t ClientSession::next_packet_id()
{
    do {
        last_packet_id_ = static_cast<std::uint16_t>(last_packet_id_ + 1);
    } while (last_packet_id_ == 0 || in_flight_.contains(last_packet_id_));
    return last_packet_id_;
}

std::string_view to_string(SessionState s)
{
    switch (s) {
    case SessionState::disconnected: return "disconnected";
    case SessionState::connecting: return "connecting";
    case SessionState::connected: return "connected";
    }
    return "unknown";
}

} // namespace marine::mqtt

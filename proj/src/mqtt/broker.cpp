#include "marine/mqtt/broker.hpp"

#include <algorithm>

#include "marine/mqtt/topic.hpp"

namespace marine::mqtt {

std::vector<Delivery> broker_route(const Publish& publish, std::span<const Subscriber> subscriptions)
{
    std::map<ConnId, std::uint8_t> best;
    for (const auto& s : subscriptions) {
        if (!topic_matches(s.filter, publish.topic)) {
            continue;
        }
        auto [it, inserted] = best.try_emplace(s.conn, s.qos);
        if (!inserted) {
            it->second = std::max(it->second, s.qos);
        }
    }
    std::vector<Delivery> out;
    out.reserve(best.size());
    for (const auto& [conn, qos] : best) {
        out.push_back({conn, std::min(publish.qos, qos)});
    }
    return out;
}

BrokerOutput Broker::open(ConnId conn, double now)
{
    auto& c = conns_[conn];
    c = Connection{};
    c.last_in = now;
    ++stats_.connections;
    return {};
}

BrokerOutput Broker::receive(ConnId conn, std::span<const std::uint8_t> bytes, double now)
{
    BrokerOutput out;
    auto it = conns_.find(conn);
    if (it == conns_.end()) {
        return out;
    }
    it->second.rx.insert(it->second.rx.end(), bytes.begin(), bytes.end());
    it->second.last_in = now;
    std::size_t offset = 0;
    try {
        while (true) {
            auto cit = conns_.find(conn);
            if (cit == conns_.end()) {
                return out;
            }
            auto res = decode_packet(std::span(cit->second.rx).subspan(offset));
            if (res.need_more()) {
                break;
            }
            offset += res.consumed;
            handle(conn, *res.packet, now, out);
            if (std::find(out.close.begin(), out.close.end(), conn) != out.close.end()) {
                return out;
            }
        }
    } catch (const MqttError&) {
        ++stats_.protocol_errors;
        drop(conn, out);
        return out;
    }
    auto& rx = conns_.at(conn).rx;
    rx.erase(rx.begin(), rx.begin() + static_cast<std::ptrdiff_t>(offset));
    return out;
}

void Broker::handle(ConnId conn, const Packet& p, double now, BrokerOutput& out)
{
    auto& c = conns_.at(conn);
    const auto reply = [&](const Packet& r) { out.out.push_back({conn, encode_packet(r)}); };

    if (!c.connected) {
        const auto* connect = std::get_if<Connect>(&p);
        if (!connect) {
            ++stats_.protocol_errors;
            drop(conn, out);
            return;
        }
        if (connect->protocol_level != 4) {
            reply(ConnAck{1, false});
            drop(conn, out);
            return;
        }
        std::string id = connect->client_id;
        if (id.empty()) {
            if (!connect->clean_session) {
                reply(ConnAck{2, false});
                drop(conn, out);
                return;
            }
            id = "anon-" + std::to_string(++anon_counter_);
        }
        // A second connection with the same client id takes over.
        for (auto& [other, oc] : conns_) {
            if (other != conn && oc.connected && oc.client_id == id) {
                drop(other, out);
                break;
            }
        }
        auto& self = conns_.at(conn);
        self.connected = true;
        self.client_id = id;
        self.keep_alive_s = connect->keep_alive_s;
        self.last_in = now;
        reply(ConnAck{0, false});
        return;
    }

    std::visit(
        [&](const auto& pkt) {
            using T = std::decay_t<decltype(pkt)>;
            if constexpr (std::is_same_v<T, Publish>) {
                ++stats_.publishes_in;
                if (pkt.qos == 1) {
                    reply(PubAck{*pkt.packet_id});
                }
                route(pkt, out);
            } else if constexpr (std::is_same_v<T, PubAck>) {
                c.in_flight.erase(pkt.packet_id);
            } else if constexpr (std::is_same_v<T, Subscribe>) {
                SubAck ack{pkt.packet_id, {}};
                for (const auto& t : pkt.topics) {
                    const std::uint8_t granted = std::min<std::uint8_t>(t.qos, 1);
                    c.filters[t.filter] = granted;
                    ack.granted.push_back(granted);
                }
                reply(ack);
            } else if constexpr (std::is_same_v<T, PingReq>) {
                reply(PingResp{});
            } else if constexpr (std::is_same_v<T, Disconnect>) {
                drop(conn, out);
            } else {
                // CONNECT twice or a server-to-client packet type
                ++stats_.protocol_errors;
                drop(conn, out);
            }
        },
        p);
}

void Broker::route(const Publish& p, BrokerOutput& out)
{
    const auto subs = subscriptions();
    for (const auto& d : broker_route(p, subs)) {
        auto& target = conns_.at(d.conn);
        Publish copy;
        copy.topic = p.topic;
        copy.payload = p.payload;
        copy.qos = d.qos;
        if (d.qos == 1) {
            do {
                target.last_packet_id = static_cast<std::uint16_t>(target.last_packet_id + 1);
            } while (target.last_packet_id == 0 || target.in_flight.contains(target.last_packet_id));
            copy.packet_id = target.last_packet_id;
            target.in_flight[target.last_packet_id] = copy;
        }
        out.out.push_back({d.conn, encode_packet(copy)});
        ++stats_.deliveries;
    }
}

BrokerOutput Broker::close(ConnId conn)
{
    conns_.erase(conn);
    return {};
}

BrokerOutput Broker::tick(double now)
{
    BrokerOutput out;
    std::vector<ConnId> expired;
    for (const auto& [id, c] : conns_) {
        if (c.keep_alive_s > 0 && now - c.last_in > 1.5 * c.keep_alive_s) {
            expired.push_back(id);
        }
    }
    for (auto id : expired) {
        drop(id, out);
    }
    return out;
}

std::vector<Subscriber> Broker::subscriptions() const
{
    std::vector<Subscriber> subs;
    for (const auto& [id, c] : conns_) {
        if (!c.connected) {
            continue;
        }
        for (const auto& [filter, qos] : c.filters) {
            subs.push_back({id, filter, qos});
        }
    }
    return subs;
}

std::size_t Broker::in_flight(ConnId conn) const
{
    auto it = conns_.find(conn);
    return it == conns_.end() ? 0 : it->second.in_flight.size();
}

void Broker::drop(ConnId conn, BrokerOutput& out)
{
    conns_.erase(conn);
    out.close.push_back(conn);
}

} // namespace marine::mqtt

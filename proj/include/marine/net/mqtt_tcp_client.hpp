#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "marine/mqtt/session.hpp"
#include "marine/net/socket.hpp"

namespace marine::net {

/// Drives a ClientSession over TCP: feeds it socket bytes and 1 s ticks,
/// reconnects with exponential backoff. The session is owned by the caller
/// and must only be touched through with_session() while the client runs.
class MqttTcpClient {
public:
    using DeliveryHandler = std::function<void(const mqtt::Publish&)>;

    MqttTcpClient(std::string host, std::uint16_t port, mqtt::ClientSession& session);
    ~MqttTcpClient();
    MqttTcpClient(const MqttTcpClient&) = delete;
    MqttTcpClient& operator=(const MqttTcpClient&) = delete;

    /// Called on the client thread for every inbound publish.
    void on_delivery(DeliveryHandler handler) { handler_ = std::move(handler); }

    void start();
    void stop();
    bool connected() const;

    /// Runs `fn(session, now)` under the client lock and ships its output.
    void with_session(const std::function<mqtt::SessionActions(mqtt::ClientSession&, double)>& fn);

    double now() const;

private:
    void loop();
    void apply(const mqtt::SessionActions& a);
    void drop_link();

    std::string host_;
    std::uint16_t port_;
    mqtt::ClientSession& session_;
    DeliveryHandler handler_;
    mutable std::mutex mutex_;
    Fd fd_;
    mqtt::ReconnectBackoff backoff_{1.0, 30.0};
    double reconnect_at_ = 0.0;
    double last_tick_ = 0.0;
    std::atomic<bool> running_{false};
    std::thread thread_;
    std::chrono::steady_clock::time_point epoch_ = std::chrono::steady_clock::now();
};

} // namespace marine::net

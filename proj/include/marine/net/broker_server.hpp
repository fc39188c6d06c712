#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "marine/mqtt/broker.hpp"
#include "marine/net/socket.hpp"

namespace marine::net {

/// Hosts mqtt::Broker on a TCP port, one reader thread per client.
class BrokerServer {
public:
    explicit BrokerServer(std::uint16_t port = 1883, std::string host = "0.0.0.0");
    ~BrokerServer();
    BrokerServer(const BrokerServer&) = delete;
    BrokerServer& operator=(const BrokerServer&) = delete;

    void start();
    void stop();
    /// Bound port, valid after start().
    std::uint16_t port() const { return port_; }
    mqtt::BrokerStats stats() const;
    std::size_t connection_count() const;

private:
    struct Client {
        Fd fd;
        std::thread reader;
        std::atomic<bool> done{false};
    };

    double now() const;
    void accept_loop();
    void read_loop(mqtt::ConnId id, Client* client);
    void dispatch(const mqtt::BrokerOutput& out);
    void reap(bool all);

    std::string host_;
    std::uint16_t port_;
    Fd listener_;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::thread ticker_;
    mutable std::mutex mutex_; ///< guards broker_ and clients_
    mqtt::Broker broker_;
    std::map<mqtt::ConnId, std::unique_ptr<Client>> clients_;
    mqtt::ConnId next_id_ = 1;
    std::chrono::steady_clock::time_point epoch_ = std::chrono::steady_clock::now();
};

} // namespace marine::net

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "marine/monitor/api.hpp"
#include "marine/monitor/store.hpp"
#include "marine/mqtt/session.hpp"
#include "marine/net/mqtt_tcp_client.hpp"

namespace httplib {
class Server;
}

namespace marine::net {

struct MonitorServiceConfig {
    std::string http_host = "0.0.0.0";
    std::uint16_t http_port = 8080; ///< 0 picks an ephemeral port
    std::string broker_host = "127.0.0.1";
    std::uint16_t broker_port = 1883;
    std::string topic_filter = "marine/v1/#";
    std::string client_id = "monitor";
    std::optional<std::filesystem::path> log_path;
    MonitorApiConfig api;
};

/// Monitor process: MQTT subscriber feeding a ReadingStore, REST API on top.
class MonitorService {
public:
    explicit MonitorService(MonitorServiceConfig config);
    ~MonitorService();
    MonitorService(const MonitorService&) = delete;
    MonitorService& operator=(const MonitorService&) = delete;

    void start();
    void stop();
    std::uint16_t http_port() const { return http_port_; }
    const ReadingStore& store() const { return *store_; }
    bool mqtt_connected() const { return client_->connected(); }

private:
    MonitorServiceConfig config_;
    std::unique_ptr<ReadingStore> store_;
    std::unique_ptr<MonitorApi> api_;
    mqtt::ClientSession session_;
    std::unique_ptr<MqttTcpClient> client_;
    std::unique_ptr<httplib::Server> http_;
    std::thread http_thread_;
    std::thread refresher_;
    std::atomic<bool> running_{false};
    std::uint16_t http_port_ = 0;
};

} // namespace marine::net

#include "marine/net/monitor_service.hpp"

#include <chrono>
#include <stdexcept>

#include <httplib.h>

namespace marine::net {

MonitorService::MonitorService(MonitorServiceConfig config)
    : config_(std::move(config)),
      store_(config_.log_path ? std::make_unique<ReadingStore>(*config_.log_path) : std::make_unique<ReadingStore>()),
      api_(std::make_unique<MonitorApi>(*store_, config_.api)),
      session_(mqtt::SessionConfig{config_.client_id, 30, 256, 30.0}),
      client_(std::make_unique<MqttTcpClient>(config_.broker_host, config_.broker_port, session_))
{
}

MonitorService::~MonitorService() { stop(); }

void MonitorService::start()
{
    http_ = std::make_unique<httplib::Server>();
    http_->Get(R"(/api/.*)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = api_->get(req.target, client_->now());
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    });
    const int port = config_.http_port == 0 ? http_->bind_to_any_port(config_.http_host)
                                            : (http_->bind_to_port(config_.http_host, config_.http_port)
                                                   ? config_.http_port
                                                   : -1);
    if (port <= 0) {
        throw std::runtime_error("cannot bind HTTP port " + std::to_string(config_.http_port));
    }
    http_port_ = static_cast<std::uint16_t>(port);

    client_->on_delivery([this](const mqtt::Publish& p) { store_->ingest_json(mqtt::to_string(p.payload)); });
    const std::string filter = config_.topic_filter;
    client_->with_session([&](mqtt::ClientSession& s, double now) {
        return s.step(mqtt::event::SubscribeRequested{{{filter, 1}}, now});
    });

    running_ = true;
    client_->start();
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
    refresher_ = std::thread([this] {
        while (running_) {
            api_->snapshots().refresh(client_->now());
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
    });
}

void MonitorService::stop()
{
    if (!running_.exchange(false)) {
        return;
    }
    http_->stop();
    http_thread_.join();
    refresher_.join();
    client_->stop();
}

} // namespace marine::net

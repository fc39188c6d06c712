#include "marine/net/broker_server.hpp"

#include <sys/socket.h>

#include <vector>

namespace marine::net {

BrokerServer::BrokerServer(std::uint16_t port, std::string host) : host_(std::move(host)), port_(port) {}

BrokerServer::~BrokerServer() { stop(); }

double BrokerServer::now() const
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void BrokerServer::start()
{
    listener_ = listen_tcp(host_, port_);
    port_ = local_port(listener_);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
    ticker_ = std::thread([this] {
        while (running_) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
            std::lock_guard lock(mutex_);
            dispatch(broker_.tick(now()));
        }
    });
}

void BrokerServer::stop()
{
    if (!running_.exchange(false)) {
        return;
    }
    listener_.shutdown();
    acceptor_.join();
    ticker_.join();
    {
        std::lock_guard lock(mutex_);
        for (auto& [id, c] : clients_) {
            c->fd.shutdown();
        }
    }
    reap(true);
    listener_.reset();
}

mqtt::BrokerStats BrokerServer::stats() const
{
    std::lock_guard lock(mutex_);
    return broker_.stats();
}

std::size_t BrokerServer::connection_count() const
{
    std::lock_guard lock(mutex_);
    return broker_.connection_count();
}

void BrokerServer::accept_loop()
{
    while (running_) {
        reap(false);
        if (!wait_readable(listener_, 200)) {
            continue;
        }
        const int raw = ::accept(listener_.get(), nullptr, nullptr);
        if (raw < 0) {
            continue;
        }
        std::lock_guard lock(mutex_);
        const auto id = next_id_++;
        auto client = std::make_unique<Client>();
        client->fd = Fd(raw);
        auto* ptr = client.get();
        dispatch(broker_.open(id, now()));
        clients_.emplace(id, std::move(client));
        ptr->reader = std::thread([this, id, ptr] { read_loop(id, ptr); });
    }
}

void BrokerServer::read_loop(mqtt::ConnId id, Client* client)
{
    std::vector<std::uint8_t> buf(4096);
    for (;;) {
        const auto n = ::recv(client->fd.get(), buf.data(), buf.size(), 0);
        if (n <= 0) {
            break;
        }
        std::lock_guard lock(mutex_);
        dispatch(broker_.receive(id, std::span(buf.data(), static_cast<std::size_t>(n)), now()));
    }
    {
        std::lock_guard lock(mutex_);
        dispatch(broker_.close(id));
    }
    client->done = true;
}

void BrokerServer::dispatch(const mqtt::BrokerOutput& out)
{
    for (const auto& o : out.out) {
        auto it = clients_.find(o.conn);
        if (it != clients_.end() && !it->second->done) {
            send_all(it->second->fd, o.bytes);
        }
    }
    for (auto conn : out.close) {
        auto it = clients_.find(conn);
        if (it != clients_.end()) {
            it->second->fd.shutdown();
        }
    }
}

void BrokerServer::reap(bool all)
{
    std::vector<std::unique_ptr<Client>> finished;
    {
        std::lock_guard lock(mutex_);
        for (auto it = clients_.begin(); it != clients_.end();) {
            if (all || it->second->done) {
                finished.push_back(std::move(it->second));
                it = clients_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& c : finished) {
        if (c->reader.joinable()) {
            c->reader.join();
        }
    }
}

} // namespace marine::net

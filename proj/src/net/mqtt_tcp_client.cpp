#include "marine/net/mqtt_tcp_client.hpp"

#include <sys/socket.h>

#include <stdexcept>
#include <vector>

namespace marine::net {

MqttTcpClient::MqttTcpClient(std::string host, std::uint16_t port, mqtt::ClientSession& session)
    : host_(std::move(host)), port_(port), session_(session)
{
}

MqttTcpClient::~MqttTcpClient() { stop(); }

double MqttTcpClient::now() const
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void MqttTcpClient::start()
{
    running_ = true;
    thread_ = std::thread([this] { loop(); });
}

void MqttTcpClient::stop()
{
    if (!running_.exchange(false)) {
        return;
    }
    {
        std::lock_guard lock(mutex_);
        if (fd_.valid() && session_.state() == mqtt::SessionState::connected) {
            const auto a = session_.step(mqtt::event::DisconnectRequested{now()});
            for (const auto& b : a.bytes_out) {
                send_all(fd_, b);
            }
        }
        fd_.shutdown();
    }
    thread_.join();
    fd_.reset();
}

bool MqttTcpClient::connected() const
{
    std::lock_guard lock(mutex_);
    return session_.state() == mqtt::SessionState::connected;
}

void MqttTcpClient::with_session(const std::function<mqtt::SessionActions(mqtt::ClientSession&, double)>& fn)
{
    std::lock_guard lock(mutex_);
    apply(fn(session_, now()));
}

void MqttTcpClient::apply(const mqtt::SessionActions& a)
{
    for (const auto& b : a.bytes_out) {
        if (fd_.valid() && !send_all(fd_, b)) {
            fd_.shutdown();
            break;
        }
    }
    if (handler_) {
        for (const auto& p : a.deliveries) {
            handler_(p);
        }
    }
    if (a.state_change == mqtt::SessionState::connected) {
        backoff_.reset();
    }
    if (a.state_change == mqtt::SessionState::disconnected && a.reason != mqtt::DisconnectReason::requested) {
        drop_link();
    }
}

void MqttTcpClient::drop_link()
{
    fd_.shutdown();
    fd_.reset();
    reconnect_at_ = now() + backoff_.next_delay();
}

void MqttTcpClient::loop()
{
    std::vector<std::uint8_t> buf(4096);
    while (running_) {
        int fd_raw = -1;
        {
            std::lock_guard lock(mutex_);
            if (!fd_.valid() && now() >= reconnect_at_) {
                try {
                    fd_ = connect_tcp(host_, port_);
                    apply(session_.step(mqtt::event::ConnectRequested{now()}));
                } catch (const std::runtime_error&) {
                    reconnect_at_ = now() + backoff_.next_delay();
                }
            }
            fd_raw = fd_.get();
        }
        if (fd_raw < 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
            continue;
        }
        const bool readable = wait_readable(fd_raw, 100);
        ssize_t n = 0;
        if (readable) {
            n = ::recv(fd_raw, buf.data(), buf.size(), 0);
        }
        std::lock_guard lock(mutex_);
        if (!running_) {
            break;
        }
        if (readable && fd_.get() == fd_raw) {
            if (n > 0) {
                mqtt::Bytes data(buf.begin(), buf.begin() + n);
                apply(session_.step(mqtt::event::BytesIn{std::move(data), now()}));
            } else {
                apply(session_.step(mqtt::event::ConnectionLost{now()}));
                if (fd_.valid()) {
                    drop_link();
                }
            }
        }
        if (now() - last_tick_ >= 1.0) {
            last_tick_ = now();
            apply(session_.step(mqtt::event::Tick{last_tick_}));
        }
    }
}

} // namespace marine::net

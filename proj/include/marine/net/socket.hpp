#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>

namespace marine::net {

/// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept;
    ~Fd() { reset(); }

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void reset();
    /// Wakes any thread blocked on the descriptor without closing it.
    void shutdown() const;

private:
    int fd_ = -1;
};

/// Listening TCP socket; port 0 picks an ephemeral port.
Fd listen_tcp(const std::string& host, std::uint16_t port);
std::uint16_t local_port(const Fd& fd);
/// Throws std::runtime_error on failure.
Fd connect_tcp(const std::string& host, std::uint16_t port);

bool send_all(const Fd& fd, std::span<const std::uint8_t> bytes);
/// Waits up to `timeout_ms` for input; false on timeout.
bool wait_readable(int fd, int timeout_ms);
inline bool wait_readable(const Fd& fd, int timeout_ms) { return wait_readable(fd.get(), timeout_ms); }

/// "host:port" with the port required.
std::pair<std::string, std::uint16_t> parse_host_port(const std::string& s);

} // namespace marine::net

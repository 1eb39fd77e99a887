#pragma once

#include "eftos/types.hpp"

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace eftos::net {

struct Address
{
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
    friend bool operator==(const Address&, const Address&) = default;
};

/// "host:port" or ":port" (host defaults to 127.0.0.1). Throws ConfigError.
Address parse_address(std::string_view text);

/// Owning file descriptor.
class Socket
{
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& o) noexcept;
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    void close();
    /// Wakes a thread blocked in recv/accept on this socket.
    void shutdown();

    /// Throws IoError when the peer is gone.
    void send_all(std::string_view bytes);
    /// Returns 0 on orderly close, the byte count otherwise; waits at most
    /// `timeout` and returns -1 on timeout. Throws IoError on socket errors.
    long recv_some(char* buf, std::size_t len, std::chrono::milliseconds timeout);

private:
    int fd_ = -1;
};

/// Throws IoError if nothing accepts within `timeout`.
Socket connect_tcp(const Address& to, std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// Binds and listens; port 0 picks a free port. Throws IoError.
Socket listen_tcp(const Address& at, int backlog = 8);
std::uint16_t local_port(const Socket& s);

/// Returns an invalid socket on timeout.
Socket accept_tcp(const Socket& listener, std::chrono::milliseconds timeout);

} // namespace eftos::net

#include "eftos/net.hpp"

#include <cerrno>
#include <charconv>
#include <cstring>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace eftos::net {

namespace {

std::string errno_text()
{
    return std::strerror(errno);
}

sockaddr_in resolve(const Address& a)
{
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(a.port);
    const std::string host = a.host.empty() || a.host == "localhost" ? "127.0.0.1" : a.host;
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1)
        return sa;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
        throw IoError("cannot resolve host '" + a.host + "'");
    sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return sa;
}

bool wait_fd(int fd, short events, std::chrono::milliseconds timeout)
{
    pollfd p{fd, events, 0};
    for (;;)
    {
        const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
        if (rc < 0 && errno == EINTR)
            continue;
        if (rc < 0)
            throw IoError("poll failed: " + errno_text());
        return rc > 0;
    }
}

} // namespace

Address parse_address(std::string_view text)
{
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos)
        throw ConfigError("address '" + std::string(text) + "' must be host:port");
    Address a;
    if (colon > 0)
        a.host = std::string(text.substr(0, colon));
    const auto port = text.substr(colon + 1);
    unsigned value = 0;
    auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || p != port.data() + port.size() || value > 65535)
        throw ConfigError("address '" + std::string(text) + "' has a bad port");
    a.port = static_cast<std::uint16_t>(value);
    return a;
}

Socket::~Socket()
{
    close();
}

Socket::Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}

Socket& Socket::operator=(Socket&& o) noexcept
{
    if (this != &o)
    {
        close();
        fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
}

void Socket::close()
{
    if (fd_ >= 0)
        ::close(std::exchange(fd_, -1));
}

void Socket::shutdown()
{
    if (fd_ >= 0)
        ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::string_view bytes)
{
    while (!bytes.empty())
    {
        const auto n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            throw IoError("send failed: " + errno_text());
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
}

long Socket::recv_some(char* buf, std::size_t len, std::chrono::milliseconds timeout)
{
    if (!wait_fd(fd_, POLLIN, timeout))
        return -1;
    for (;;)
    {
        const auto n = ::recv(fd_, buf, len, 0);
        if (n < 0 && errno == EINTR)
            continue;
        if (n < 0)
            throw IoError("recv failed: " + errno_text());
        return static_cast<long>(n);
    }
}

Socket connect_tcp(const Address& to, std::chrono::milliseconds timeout)
{
    const auto sa = resolve(to);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid())
        throw IoError("socket: " + errno_text());
    const int flags = ::fcntl(s.fd(), F_GETFL, 0);
    ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0)
    {
        if (errno != EINPROGRESS)
            throw IoError("connect to " + to.str() + " failed: " + errno_text());
        if (!wait_fd(s.fd(), POLLOUT, timeout))
            throw IoError("connect to " + to.str() + " timed out");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0)
            throw IoError("connect to " + to.str() + " failed: " + std::strerror(err));
    }
    ::fcntl(s.fd(), F_SETFL, flags);
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

Socket listen_tcp(const Address& at, int backlog)
{
    const auto sa = resolve(at);
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid())
        throw IoError("socket: " + errno_text());
    int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0)
        throw IoError("bind " + at.str() + ": " + errno_text());
    if (::listen(s.fd(), backlog) != 0)
        throw IoError("listen " + at.str() + ": " + errno_text());
    return s;
}

std::uint16_t local_port(const Socket& s)
{
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&sa), &len) != 0)
        throw IoError("getsockname: " + errno_text());
    return ntohs(sa.sin_port);
}

Socket accept_tcp(const Socket& listener, std::chrono::milliseconds timeout)
{
    if (!wait_fd(listener.fd(), POLLIN, timeout))
        return Socket{};
    const int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0)
        return Socket{};
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Socket(fd);
}

} // namespace eftos::net

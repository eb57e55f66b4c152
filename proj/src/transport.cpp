#include "gridengine/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <map>
#include <set>

namespace gridengine {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text() { return std::strerror(errno); }

/// Waits until fd is readable; false on timeout.
bool wait_readable(int fd, Clock::time_point deadline)
{
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (left <= 0) {
            return false;
        }
        pollfd p{fd, POLLIN, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(left));
        if (rc > 0) {
            return true;
        }
        if (rc == 0) {
            return false;
        }
        if (errno != EINTR) {
            throw Error(ErrorKind::Transport, "poll failed: " + errno_text());
        }
    }
}

enum class ReadStatus { Complete, Closed, TimedOut };

/// Reads exactly `n` bytes unless the peer closes or the deadline passes.
ReadStatus read_exact(int fd, char* out, std::size_t n, Clock::time_point deadline, std::size_t& got)
{
    got = 0;
    while (got < n) {
        if (!wait_readable(fd, deadline)) {
            return ReadStatus::TimedOut;
        }
        const auto rc = ::recv(fd, out + got, n - got, 0);
        if (rc == 0) {
            return ReadStatus::Closed;
        }
        if (rc < 0) {
            if (errno == EINTR || errno == EAGAIN) {
                continue;
            }
            if (errno == ECONNRESET) {
                return ReadStatus::Closed;
            }
            throw Error(ErrorKind::Transport, "receive failed: " + errno_text());
        }
        got += static_cast<std::size_t>(rc);
    }
    return ReadStatus::Complete;
}

void send_abort(Connection& c, const std::string& reason) noexcept
{
    try {
        if (c.is_open()) {
            Message m;
            m.type = MessageType::Abort;
            m.reason = reason;
            c.send(m);
        }
    } catch (...) {
        // Best effort: the session is being torn down anyway.
    }
}

std::string abort_reason(const Error& e)
{
    const std::string what = e.what();
    if (what.rfind("abort:", 0) == 0) {
        return what.substr(6);
    }
    if (e.kind() == ErrorKind::Protocol) {
        return "malformed";
    }
    return what;
}

/// Coordinator-side proxy for a feeder served by a participant.
class RemoteFeeder final : public FeederEndpoint {
public:
    RemoteFeeder(Connection& connection, const TransportConfig& cfg) : connection_(connection), cfg_(cfg) {}

    BoundaryExchange exchange(const BoundaryExchange& downstream) override
    {
        connection_.send(boundary_to_message(downstream));
        const auto reply = connection_.receive(cfg_);
        if (reply.type == MessageType::Abort) {
            throw Error(ErrorKind::Protocol, "participant aborted: " + reply.reason);
        }
        if (reply.type != MessageType::Equiv) {
            throw Error(ErrorKind::Protocol, std::string("abort:unexpected message") + " (" + to_string(reply.type) +
                                                 " instead of EQUIV)");
        }
        return message_to_boundary(reply);
    }

    void finish(bool converged, int rounds) override
    {
        Message m;
        if (converged) {
            m.type = MessageType::Converged;
            m.rounds = rounds;
        } else {
            m.type = MessageType::Abort;
            m.reason = "not converged";
        }
        connection_.send(m);
    }

private:
    Connection& connection_;
    const TransportConfig& cfg_;
};

}  // namespace

// ---- Connection ------------------------------------------------------------

Connection::Connection(Connection&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Connection& Connection::operator=(Connection&& other) noexcept
{
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

Connection::~Connection() { close(); }

void Connection::close() noexcept
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Connection::send_raw(std::string_view bytes)
{
    if (fd_ < 0) {
        throw Error(ErrorKind::Transport, "send on a closed connection");
    }
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const auto rc = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error(ErrorKind::Transport, "send failed: " + errno_text());
        }
        sent += static_cast<std::size_t>(rc);
    }
}

void Connection::send(const Message& message) { send_raw(frame(encode_message(message))); }

std::string Connection::receive_body(const TransportConfig& cfg)
{
    if (fd_ < 0) {
        throw Error(ErrorKind::Transport, "receive on a closed connection");
    }
    if (!wait_readable(fd_, Clock::now() + cfg.message_timeout)) {
        throw Error(ErrorKind::Transport, "timed out waiting for a message");
    }
    const auto deadline = Clock::now() + cfg.frame_timeout;
    unsigned char header[4];
    std::size_t got = 0;
    switch (read_exact(fd_, reinterpret_cast<char*>(header), 4, deadline, got)) {
    case ReadStatus::Complete: break;
    case ReadStatus::Closed:
        if (got == 0) {
            throw Error(ErrorKind::Transport, "peer disconnected");
        }
        throw Error(ErrorKind::Protocol, "truncated frame header");
    case ReadStatus::TimedOut: throw Error(ErrorKind::Protocol, "truncated frame header (timed out)");
    }
    const std::uint32_t length = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                                 (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
    if (length > kMaxFrameBytes) {
        throw Error(ErrorKind::Protocol, "frame length " + std::to_string(length) + " exceeds the limit");
    }
    std::string body(length, '\0');
    switch (read_exact(fd_, body.data(), length, deadline, got)) {
    case ReadStatus::Complete: return body;
    case ReadStatus::Closed:
        throw Error(ErrorKind::Protocol, "truncated frame: peer closed after " + std::to_string(got) + " of " +
                                             std::to_string(length) + " bytes");
    case ReadStatus::TimedOut:
        throw Error(ErrorKind::Protocol, "truncated frame: " + std::to_string(got) + " of " +
                                             std::to_string(length) + " bytes before timeout");
    }
    return body;
}

Message Connection::receive(const TransportConfig& cfg) { return decode_message(receive_body(cfg)); }

// ---- Listener / connect ----------------------------------------------------

namespace {

addrinfo* resolve(const std::string& host, int port, bool passive)
{
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = passive ? AI_PASSIVE : 0;
    addrinfo* result = nullptr;
    const auto service = std::to_string(port);
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &result);
    if (rc != 0) {
        throw Error(ErrorKind::Transport, "cannot resolve \"" + host + "\": " + ::gai_strerror(rc));
    }
    return result;
}

void set_nodelay(int fd)
{
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Listener::Listener(const std::string& host, int port)
{
    addrinfo* info = resolve(host, port, true);
    fd_ = ::socket(info->ai_family, info->ai_socktype, info->ai_protocol);
    if (fd_ < 0) {
        ::freeaddrinfo(info);
        throw Error(ErrorKind::Transport, "socket failed: " + errno_text());
    }
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const int rc = ::bind(fd_, info->ai_addr, info->ai_addrlen);
    ::freeaddrinfo(info);
    if (rc < 0 || ::listen(fd_, 16) < 0) {
        const auto text = errno_text();
        ::close(fd_);
        fd_ = -1;
        throw Error(ErrorKind::Transport, "cannot listen on port " + std::to_string(port) + ": " + text);
    }
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Listener::~Listener()
{
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

Connection Listener::accept(std::chrono::milliseconds timeout)
{
    if (!wait_readable(fd_, Clock::now() + timeout)) {
        throw Error(ErrorKind::Transport, "timed out waiting for a participant to connect");
    }
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) {
        throw Error(ErrorKind::Transport, "accept failed: " + errno_text());
    }
    set_nodelay(fd);
    return Connection(fd);
}

Connection connect_to(const std::string& host, int port, std::chrono::milliseconds timeout)
{
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        addrinfo* info = resolve(host, port, false);
        const int fd = ::socket(info->ai_family, info->ai_socktype, info->ai_protocol);
        if (fd < 0) {
            ::freeaddrinfo(info);
            throw Error(ErrorKind::Transport, "socket failed: " + errno_text());
        }
        const int rc = ::connect(fd, info->ai_addr, info->ai_addrlen);
        ::freeaddrinfo(info);
        if (rc == 0) {
            set_nodelay(fd);
            return Connection(fd);
        }
        const auto text = errno_text();
        ::close(fd);
        if (Clock::now() >= deadline) {
            throw Error(ErrorKind::Transport,
                        "cannot connect to " + host + ":" + std::to_string(port) + ": " + text);
        }
        ::usleep(50000);  // coordinator may not be listening yet
    }
}

std::pair<std::string, int> parse_endpoint(std::string_view text)
{
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon + 1 >= text.size()) {
        throw Error(ErrorKind::InvalidValue, "endpoint \"" + std::string(text) + "\" is not host:port");
    }
    int port = 0;
    const auto digits = text.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || port < 1 || port > 65535) {
        throw Error(ErrorKind::InvalidValue, "endpoint \"" + std::string(text) + "\" has an invalid port");
    }
    std::string host(text.substr(0, colon));
    return {host.empty() ? "127.0.0.1" : host, port};
}

// ---- sessions --------------------------------------------------------------

TndPowerflowResult run_coordinator(Listener& listener, NetworkModel& transmission,
                                   std::span<const CoordinatorLink> links, const CoSimConfig& cfg,
                                   const TransportConfig& transport)
{
    std::map<std::string, std::size_t> by_network;
    for (std::size_t k = 0; k < links.size(); ++k) {
        if (!by_network.emplace(links[k].network_id, k).second) {
            throw Error(ErrorKind::DuplicateId, "two links name network \"" + links[k].network_id + "\"");
        }
        transmission.bus_index(links[k].parent_bus);
    }

    std::vector<Connection> connections(links.size());
    std::vector<Connection> pending;
    auto abort_all = [&](const std::string& reason) {
        for (auto& c : connections) {
            send_abort(c, reason);
        }
        for (auto& c : pending) {
            send_abort(c, reason);
        }
    };

    try {
        for (std::size_t accepted = 0; accepted < links.size(); ++accepted) {
            pending.push_back(listener.accept(transport.accept_timeout));
            Connection& c = pending.back();
            const auto hello = c.receive(transport);
            if (hello.type != MessageType::Hello) {
                throw Error(ErrorKind::Protocol, std::string("abort:unexpected message") + " (" +
                                                     to_string(hello.type) + " before HELLO)");
            }
            if (hello.protocol_version != kProtocolVersion) {
                throw Error(ErrorKind::Protocol, "abort:version");
            }
            auto it = by_network.find(hello.network_id);
            if (it == by_network.end() || connections[it->second].is_open()) {
                throw Error(ErrorKind::Protocol, "abort:unknown network");
            }
            Message ack;
            ack.type = MessageType::HelloAck;
            c.send(ack);
            connections[it->second] = std::move(c);
            pending.pop_back();
        }

        std::vector<RemoteFeeder> remotes;
        remotes.reserve(links.size());
        for (auto& c : connections) {
            remotes.emplace_back(c, transport);
        }
        std::vector<FeederLink> feeder_links;
        for (std::size_t k = 0; k < links.size(); ++k) {
            feeder_links.push_back({links[k].parent_bus, &remotes[k]});
        }
        return run_tnd_powerflow(transmission, feeder_links, cfg);
    } catch (const Error& e) {
        abort_all(abort_reason(e));
        const std::string what = e.what();
        if (what.rfind("abort:", 0) == 0) {
            throw Error(e.kind(), "co-simulation aborted: " + what.substr(6));
        }
        throw;
    }
}

ParticipantResult run_participant(Connection& connection, LocalFeeder& feeder, const std::string& network_id,
                                  const TransportConfig& transport)
{
    ParticipantResult result;
    try {
        Message hello;
        hello.type = MessageType::Hello;
        hello.protocol_version = kProtocolVersion;
        hello.role = "participant";
        hello.network_id = network_id;
        connection.send(hello);
        const auto ack = connection.receive(transport);
        if (ack.type == MessageType::Abort) {
            throw Error(ErrorKind::Protocol, "coordinator aborted: " + ack.reason);
        }
        if (ack.type != MessageType::HelloAck) {
            throw Error(ErrorKind::Protocol, "abort:unexpected message");
        }
        for (;;) {
            const auto m = connection.receive(transport);
            switch (m.type) {
            case MessageType::BoundaryV: {
                const auto down = message_to_boundary(m);
                result.trace.push_back(down);
                auto up = feeder.exchange(down);
                result.trace.push_back(up);
                connection.send(boundary_to_message(up));
                result.rounds = m.round;
                break;
            }
            case MessageType::Converged:
                result.converged = true;
                result.rounds = m.rounds;
                return result;
            case MessageType::Abort: throw Error(ErrorKind::Protocol, "coordinator aborted: " + m.reason);
            case MessageType::Step: throw Error(ErrorKind::UnsupportedFeature, "abort:unsupported (STEP)");
            default:
                throw Error(ErrorKind::Protocol,
                            std::string("abort:unexpected message") + " (" + to_string(m.type) + ")");
            }
        }
    } catch (const Error& e) {
        const std::string what = e.what();
        if (what.rfind("coordinator aborted:", 0) != 0 && !(e.kind() == ErrorKind::Transport)) {
            send_abort(connection, abort_reason(e));
        }
        if (what.rfind("abort:", 0) == 0) {
            throw Error(e.kind(), "co-simulation aborted: " + what.substr(6));
        }
        throw;
    }
}

}  // namespace gridengine

#pragma once

#include <chrono>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridengine/cosim.hpp"
#include "gridengine/protocol.hpp"

namespace gridengine {

struct TransportConfig {
    /// Waiting for the first byte of the next message.
    std::chrono::milliseconds message_timeout{30000};
    /// Completing a frame once its first byte has arrived; a stalled or cut
    /// frame is reported as truncated after this long.
    std::chrono::milliseconds frame_timeout{2000};
    /// Waiting for participants to connect.
    std::chrono::milliseconds accept_timeout{30000};
};

/// Framed TCP connection (blocking, with poll-based timeouts).
class Connection {
public:
    Connection() = default;
    explicit Connection(int fd) : fd_(fd) {}
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;
    Connection(Connection&& other) noexcept;
    Connection& operator=(Connection&& other) noexcept;
    ~Connection();

    bool is_open() const noexcept { return fd_ >= 0; }
    void send(const Message& message);
    void send_raw(std::string_view bytes);
    /// Errors: Transport for timeouts before a frame starts and for a peer
    /// that closed between frames; Protocol for truncated, oversized or
    /// malformed frames.
    Message receive(const TransportConfig& cfg);
    std::string receive_body(const TransportConfig& cfg);
    void close() noexcept;

private:
    int fd_ = -1;
};

class Listener {
public:
    /// Port 0 picks a free port.
    Listener(const std::string& host, int port);
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;
    ~Listener();

    int port() const noexcept { return port_; }
    Connection accept(std::chrono::milliseconds timeout);

private:
    int fd_ = -1;
    int port_ = 0;
};

Connection connect_to(const std::string& host, int port, std::chrono::milliseconds timeout);

/// "host:port" -> (host, port); throws InvalidValue.
std::pair<std::string, int> parse_endpoint(std::string_view text);

struct CoordinatorLink {
    std::string network_id;  // the participant announces this id in HELLO
    std::string parent_bus;
};

/// Coordinator side of the TCP co-simulation: accepts one participant per
/// link, checks HELLO (protocol version, known and unique network id), then
/// runs run_tnd_powerflow with every exchange carried over the wire. Any
/// failure sends ABORT {reason} to every connected participant and is
/// rethrown (ABORT reasons: "version", "unknown network", "malformed",
/// "unexpected message", "not converged", or the error text).
TndPowerflowResult run_coordinator(Listener& listener, NetworkModel& transmission,
                                   std::span<const CoordinatorLink> links, const CoSimConfig& cfg,
                                   const TransportConfig& transport = {});

struct ParticipantResult {
    bool converged = false;
    int rounds = 0;
    std::vector<BoundaryExchange> trace;
};

/// Participant side: sends HELLO, answers every BOUNDARY_V with the EQUIV
/// computed by `feeder`, and returns on CONVERGED. ABORT from the peer,
/// protocol violations and disconnects throw (violations are answered with
/// ABORT first).
ParticipantResult run_participant(Connection& connection, LocalFeeder& feeder, const std::string& network_id,
                                  const TransportConfig& transport = {});

}  // namespace gridengine

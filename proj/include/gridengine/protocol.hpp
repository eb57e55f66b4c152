#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "gridengine/cosim.hpp"
#include "gridengine/linear.hpp"

namespace gridengine {

inline constexpr int kProtocolVersion = 1;
/// Frames above this size are rejected as malformed.
inline constexpr std::uint32_t kMaxFrameBytes = 16u * 1024u * 1024u;

enum class MessageType { Hello, HelloAck, BoundaryV, Equiv, Step, Converged, Abort };

const char* to_string(MessageType type) noexcept;

/// Co-simulation wire message. Only the fields of its type are encoded:
///   HELLO      {protocol_version, role, network_id}
///   HELLO_ACK  {}
///   BOUNDARY_V {round, bus, v_abc: [[re, im] x 3]}
///   EQUIV      {round, bus, s_plus: [re, im], i_neg: [re, im], i_zero: [re, im]}
///   STEP       {time}
///   CONVERGED  {rounds}
///   ABORT      {reason}
struct Message {
    MessageType type = MessageType::Abort;
    int protocol_version = kProtocolVersion;
    std::string role;
    std::string network_id;
    int round = 0;
    std::string bus;
    std::array<Complex, 3> v_abc{};
    Complex s_plus;
    Complex i_neg;
    Complex i_zero;
    double time = 0.0;
    int rounds = 0;
    std::string reason;
    bool operator==(const Message&) const = default;
};

/// UTF-8 JSON body, {"type": "...", ...}. Numbers use the shortest
/// representation that reads back to the same double.
std::string encode_message(const Message& message);

/// Throws ErrorKind::Protocol for invalid JSON, unknown types and missing or
/// mistyped fields.
Message decode_message(std::string_view body);

/// 4-byte big-endian unsigned length followed by the body.
std::string frame(std::string_view body);

Message boundary_to_message(const BoundaryExchange& exchange);
BoundaryExchange message_to_boundary(const Message& message);

}  // namespace gridengine

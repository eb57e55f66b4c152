#include "gridengine/protocol.hpp"

#include <nlohmann/json.hpp>

namespace gridengine {

namespace {

using nlohmann::json;

constexpr MessageType kAllTypes[] = {MessageType::Hello, MessageType::HelloAck, MessageType::BoundaryV,
                                     MessageType::Equiv, MessageType::Step,     MessageType::Converged,
                                     MessageType::Abort};

json complex_to_json(Complex v) { return json::array({v.real(), v.imag()}); }

[[noreturn]] void bad_field(const char* field, const char* what)
{
    throw Error(ErrorKind::Protocol, std::string("message field \"") + field + "\" " + what);
}

const json& field(const json& doc, const char* name)
{
    auto it = doc.find(name);
    if (it == doc.end()) {
        bad_field(name, "is missing");
    }
    return *it;
}

Complex complex_field(const json& doc, const char* name)
{
    const auto& v = field(doc, name);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        bad_field(name, "must be [re, im]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

int int_field(const json& doc, const char* name)
{
    const auto& v = field(doc, name);
    if (!v.is_number_integer()) {
        bad_field(name, "must be an integer");
    }
    return v.get<int>();
}

std::string string_field(const json& doc, const char* name)
{
    const auto& v = field(doc, name);
    if (!v.is_string()) {
        bad_field(name, "must be a string");
    }
    return v.get<std::string>();
}

}  // namespace

const char* to_string(MessageType type) noexcept
{
    switch (type) {
    case MessageType::Hello: return "HELLO";
    case MessageType::HelloAck: return "HELLO_ACK";
    case MessageType::BoundaryV: return "BOUNDARY_V";
    case MessageType::Equiv: return "EQUIV";
    case MessageType::Step: return "STEP";
    case MessageType::Converged: return "CONVERGED";
    case MessageType::Abort: return "ABORT";
    }
    return "?";
}

std::string encode_message(const Message& m)
{
    json doc = {{"type", to_string(m.type)}};
    switch (m.type) {
    case MessageType::Hello:
        doc["protocol_version"] = m.protocol_version;
        doc["role"] = m.role;
        doc["network_id"] = m.network_id;
        break;
    case MessageType::HelloAck: break;
    case MessageType::BoundaryV:
        doc["round"] = m.round;
        doc["bus"] = m.bus;
        doc["v_abc"] = json::array({complex_to_json(m.v_abc[0]), complex_to_json(m.v_abc[1]),
                                    complex_to_json(m.v_abc[2])});
        break;
    case MessageType::Equiv:
        doc["round"] = m.round;
        doc["bus"] = m.bus;
        doc["s_plus"] = complex_to_json(m.s_plus);
        doc["i_neg"] = complex_to_json(m.i_neg);
        doc["i_zero"] = complex_to_json(m.i_zero);
        break;
    case MessageType::Step: doc["time"] = m.time; break;
    case MessageType::Converged: doc["rounds"] = m.rounds; break;
    case MessageType::Abort: doc["reason"] = m.reason; break;
    }
    return doc.dump();
}

Message decode_message(std::string_view body)
{
    json doc;
    try {
        doc = json::parse(body.begin(), body.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Protocol, std::string("malformed message body: ") + e.what());
    }
    if (!doc.is_object()) {
        throw Error(ErrorKind::Protocol, "message body is not a JSON object");
    }
    const auto type = string_field(doc, "type");
    Message m;
    bool known = false;
    for (auto t : kAllTypes) {
        if (type == to_string(t)) {
            m.type = t;
            known = true;
        }
    }
    if (!known) {
        throw Error(ErrorKind::Protocol, "unknown message type \"" + type + "\"");
    }
    switch (m.type) {
    case MessageType::Hello:
        m.protocol_version = int_field(doc, "protocol_version");
        m.role = string_field(doc, "role");
        m.network_id = string_field(doc, "network_id");
        break;
    case MessageType::HelloAck: break;
    case MessageType::BoundaryV: {
        m.round = int_field(doc, "round");
        m.bus = string_field(doc, "bus");
        const auto& v = field(doc, "v_abc");
        if (!v.is_array() || v.size() != 3) {
            bad_field("v_abc", "must hold three [re, im] pairs");
        }
        for (std::size_t k = 0; k < 3; ++k) {
            if (!v[k].is_array() || v[k].size() != 2 || !v[k][0].is_number() || !v[k][1].is_number()) {
                bad_field("v_abc", "must hold three [re, im] pairs");
            }
            m.v_abc[k] = {v[k][0].get<double>(), v[k][1].get<double>()};
        }
        break;
    }
    case MessageType::Equiv:
        m.round = int_field(doc, "round");
        m.bus = string_field(doc, "bus");
        m.s_plus = complex_field(doc, "s_plus");
        m.i_neg = complex_field(doc, "i_neg");
        m.i_zero = complex_field(doc, "i_zero");
        break;
    case MessageType::Step: {
        const auto& v = field(doc, "time");
        if (!v.is_number()) {
            bad_field("time", "must be a number");
        }
        m.time = v.get<double>();
        break;
    }
    case MessageType::Converged: m.rounds = int_field(doc, "rounds"); break;
    case MessageType::Abort: m.reason = string_field(doc, "reason"); break;
    }
    return m;
}

std::string frame(std::string_view body)
{
    if (body.size() > kMaxFrameBytes) {
        throw Error(ErrorKind::Protocol, "frame body exceeds the size limit");
    }
    const auto n = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out.append(body);
    return out;
}

Message boundary_to_message(const BoundaryExchange& exchange)
{
    Message m;
    m.round = exchange.round;
    m.bus = exchange.boundary_bus;
    if (exchange.direction == Direction::Downstream) {
        m.type = MessageType::BoundaryV;
        m.v_abc = exchange.v_abc;
    } else {
        m.type = MessageType::Equiv;
        m.s_plus = exchange.equivalent_load;
        m.i_neg = exchange.i_neg;
        m.i_zero = exchange.i_zero;
    }
    return m;
}

BoundaryExchange message_to_boundary(const Message& m)
{
    BoundaryExchange b;
    b.round = m.round;
    b.boundary_bus = m.bus;
    if (m.type == MessageType::BoundaryV) {
        b.direction = Direction::Downstream;
        b.v_abc = m.v_abc;
    } else if (m.type == MessageType::Equiv) {
        b.direction = Direction::Upstream;
        b.equivalent_load = m.s_plus;
        b.i_neg = m.i_neg;
        b.i_zero = m.i_zero;
    } else {
        throw Error(ErrorKind::Protocol, std::string("expected BOUNDARY_V or EQUIV, got ") + to_string(m.type));
    }
    return b;
}

}  // namespace gridengine
